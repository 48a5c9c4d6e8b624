#include <cmath>
#include <numbers>

#include "cuepref/error.hpp"
#include "cuepref/likelihood.hpp"

namespace cuepref {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

// k <= 4, so the covariance algebra stays on the stack.
using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1>;

double sign_of(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

PosteriorModel::PosteriorModel(const Problem& problem, const Dataset& dataset,
                               PiecewiseConfig config, VariantSpec spec)
    : PosteriorModel(problem, dataset, config, spec,
                     Hyperparams::defaults(config.total(), spec.k())) {}

PosteriorModel::PosteriorModel(const Problem& problem, const Dataset& dataset,
                               PiecewiseConfig config, VariantSpec spec, Hyperparams hyper)
    : config_(std::move(config)), spec_(spec), hyper_(std::move(hyper)) {
  if (config_.num_criteria() != problem.num_criteria()) {
    throw ValidationError("segment config does not match the number of criteria");
  }
  if (const auto violations = validate_dataset(dataset, problem); !violations.empty()) {
    const auto& v = violations.front();
    throw ValidationError("record " + std::to_string(v.record) + " field " + v.field + ": " +
                          v.message);
  }
  hyper_.validate(config_.total(), spec_.k());

  const Eigen::MatrixXd chars = characteristic_matrix(problem, config_);
  records_.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) {
    Record r;
    const auto w = static_cast<Eigen::Index>(problem.alternative_index(rec.choice));
    const auto l = static_cast<Eigen::Index>(problem.alternative_index(rec.rejected()));
    r.diff = (chars.row(w) - chars.row(l)).transpose();
    r.response_time = rec.response_time_s;
    r.log_rt = std::log(rec.response_time_s);
    for (const auto& c : problem.criteria()) {
      const double t = rec.attention_s.at(c.id);
      const bool missing = t < kAttentionFloorSeconds;
      r.attention.push_back(missing ? -1.0 : t);
      r.log_attention.push_back(missing ? 0.0 : std::log(t));
    }
    records_.push_back(std::move(r));
  }

  const int k = spec_.k();
  if (k > 0) {
    gamma_inv_ = hyper_.gamma_cov.inverse();
    log_det_gamma_ = std::log(hyper_.gamma_cov.determinant());
    log_det_psi_ = std::log(hyper_.psi.determinant());
  }
  lgamma_tau_sum_ = std::lgamma(hyper_.tau.sum());
  lgamma_tau_each_ = 0.0;
  for (Eigen::Index i = 0; i < hyper_.tau.size(); ++i) lgamma_tau_each_ += std::lgamma(hyper_.tau[i]);
}

std::size_t PosteriorModel::dim() const {
  const int k = spec_.k();
  return static_cast<std::size_t>(gamma() - 1 + 2 * k + k * (k + 1) / 2);
}

LatentState PosteriorModel::constrain(const Eigen::VectorXd& x) const {
  const int g = gamma();
  const int k = spec_.k();
  LatentState s;
  s.u = from_unconstrained(x.head(g - 1)).u;
  s.mu = x.segment(g - 1 + k, k);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(k, k);
  Eigen::Index p = g - 1 + 2 * k;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j, ++p) L(i, j) = (i == j) ? std::exp(x[p]) : x[p];
  }
  s.sigma = L * L.transpose();
  s.c = s.mu + L * x.segment(g - 1, k);
  return s;
}

Eigen::VectorXd PosteriorModel::unconstrain(const LatentState& state) const {
  const int g = gamma();
  const int k = spec_.k();
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim()));
  x.head(g - 1) = to_unconstrained(state.u);
  if (k == 0) return x;
  x.segment(g - 1 + k, k) = state.mu;
  Eigen::LLT<Eigen::MatrixXd> llt(state.sigma);
  if (llt.info() != Eigen::Success) throw ValidationError("Sigma is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  x.segment(g - 1, k) = llt.matrixL().solve(state.c - state.mu);
  Eigen::Index p = g - 1 + 2 * k;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j <= i; ++j, ++p) x[p] = (i == j) ? std::log(L(i, i)) : L(i, j);
  }
  return x;
}

LatentState PosteriorModel::initial_state() const {
  const int g = gamma();
  const int k = spec_.k();
  LatentState s;
  s.u = Eigen::VectorXd::Constant(g, 1.0 / g);
  s.c = Eigen::VectorXd::Zero(k);
  // Intercepts matched to the mean observed duration with zero slopes, so
  // chains start on the data's time scale.
  double sum = 0.0;
  double count = 0.0;
  for (const auto& r : records_) {
    if (spec_.uses_response_time()) {
      sum += spec_.family == Family::kPoisson ? std::ceil(r.response_time) : r.response_time;
      count += 1.0;
    }
    if (spec_.uses_attention()) {
      for (double t : r.attention) {
        if (t < 0) continue;
        sum += spec_.family == Family::kPoisson ? std::ceil(t) : t;
        count += 1.0;
      }
    }
  }
  if (count > 0 && sum > 0 && std::isfinite(sum)) {
    const double log_mean = std::log(sum / count);
    switch (spec_.family) {
      case Family::kExponential: s.c[1] = -log_mean; break;
      case Family::kGamma: s.c[3] = log_mean; break;
      case Family::kPoisson: s.c[1] = log_mean; break;
    }
  }
  s.mu = s.c;
  const double denom = hyper_.epsilon - k - 1;
  s.sigma = denom > 0 ? Eigen::MatrixXd(hyper_.psi / denom) : hyper_.psi;
  return s;
}

double PosteriorModel::log_posterior(const LatentState& state) const {
  if (state.u.size() != gamma()) throw ValidationError("u has the wrong length");
  double out = prior_log_prob(state, hyper_, spec_);
  const Family fam = spec_.family;
  for (const auto& r : records_) {
    const double gap = state.u.dot(r.diff);
    out += bt_log_prob(gap);
    if (spec_.uses_response_time()) {
      out += duration_log_prob(fam, state.c, std::abs(gap), r.response_time);
    }
    if (spec_.uses_attention()) {
      for (std::size_t m = 0; m < config_.num_criteria(); ++m) {
        if (r.attention[m] < 0) continue;
        const int off = config_.offset(m);
        const int len = config_.segments(m);
        const double gm = state.u.segment(off, len).dot(r.diff.segment(off, len));
        out += duration_log_prob(fam, state.c, std::abs(gm), r.attention[m]);
      }
    }
  }
  return out;
}

double PosteriorModel::log_density(const Eigen::VectorXd& x) const { return evaluate(x, nullptr); }

double PosteriorModel::log_density_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
  return evaluate(x, &grad);
}

double PosteriorModel::evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  const int g = gamma();
  const int k = spec_.k();
  const std::size_t num_crit = config_.num_criteria();
  if (static_cast<std::size_t>(x.size()) != dim()) throw ValidationError("state has the wrong dimension");

  const Eigen::VectorXd z = x.head(g - 1);
  const SimplexPoint sp = from_unconstrained(z);
  const Eigen::VectorXd& u = sp.u;
  double lp = sp.log_jacobian;

  Eigen::VectorXd grad_u = Eigen::VectorXd::Zero(g);
  SmallVec grad_c = SmallVec::Zero(k);

  // Dirichlet prior.
  lp += lgamma_tau_sum_ - lgamma_tau_each_;
  for (int i = 0; i < g; ++i) {
    const double a = hyper_.tau[i] - 1.0;
    if (a != 0.0) {
      lp += a * std::log(u[i]);
      grad_u[i] += a / u[i];
    }
  }

  // Hierarchical prior on the regression coefficients, non-centered:
  // c = mu + L eta. The Gaussian term and the Jacobian det L of eta -> c
  // combine to a standard normal density on eta.
  SmallVec c(k);
  SmallVec eta(k);
  SmallMat L = SmallMat::Zero(k, k);
  SmallMat G(k, k);
  SmallVec grad_mu(k);
  if (k > 0) {
    eta = x.segment(g - 1, k);
    const SmallVec mu = x.segment(g - 1 + k, k);
    Eigen::Index p = g - 1 + 2 * k;
    double sum_log_diag = 0.0;
    double jacobian = k * std::numbers::ln2;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j, ++p) {
        if (i == j) {
          L(i, i) = std::exp(x[p]);
          sum_log_diag += x[p];
          jacobian += (k - i + 1) * x[p];
        } else {
          L(i, j) = x[p];
        }
      }
    }
    const double log_det_sigma = 2.0 * sum_log_diag;
    const SmallMat L_inv = L.triangularView<Eigen::Lower>().solve(SmallMat::Identity(k, k));
    const SmallMat sigma_inv = L_inv.transpose() * L_inv;

    c = mu + L * eta;
    lp += -0.5 * k * kLogTwoPi - 0.5 * eta.squaredNorm();
    grad_mu = SmallVec::Zero(k);
    G = SmallMat::Zero(k, k);

    const SmallVec dmu = mu - SmallVec(hyper_.zeta);
    const SmallVec gdmu = SmallMat(gamma_inv_) * dmu;
    lp += -0.5 * k * kLogTwoPi - 0.5 * log_det_gamma_ - 0.5 * dmu.dot(gdmu);
    grad_mu -= gdmu;

    const double eps = hyper_.epsilon;
    const SmallMat psi = hyper_.psi;
    lp += 0.5 * eps * log_det_psi_ - 0.5 * eps * k * std::numbers::ln2 -
          log_multivariate_gamma(k, 0.5 * eps) - 0.5 * (eps + k + 1) * log_det_sigma -
          0.5 * (psi * sigma_inv).trace();
    G += -0.5 * (eps + k + 1) * sigma_inv + 0.5 * sigma_inv * psi * sigma_inv;

    lp += jacobian;
  }

  // Data.
  const Family fam = spec_.family;
  const bool use_rt = spec_.uses_response_time();
  const bool use_att = spec_.uses_attention();
  double block_gap[64];
  std::vector<double> block_heap;
  double* gaps = block_gap;
  if (num_crit > 64) {
    block_heap.resize(num_crit);
    gaps = block_heap.data();
  }
  for (const auto& r : records_) {
    double gap = 0.0;
    for (std::size_t m = 0; m < num_crit; ++m) {
      const int off = config_.offset(m);
      const int len = config_.segments(m);
      double s = 0.0;
      for (int i = off; i < off + len; ++i) s += u[i] * r.diff[i];
      gaps[m] = s;
      gap += s;
    }
    lp += bt_log_prob(gap);
    // d/dgap log(logistic(gap)) = logistic(-gap)
    double coef = gap >= 0 ? std::exp(-gap) / (1.0 + std::exp(-gap)) : 1.0 / (1.0 + std::exp(gap));
    if (use_rt) {
      const DurationTerm t = duration_term(fam, c.data(), std::abs(gap), r.response_time);
      lp += t.value;
      coef += t.d_delta * sign_of(gap);
      for (int j = 0; j < k; ++j) grad_c[j] += t.d_c[j];
    }
    if (grad) grad_u += coef * r.diff;
    if (use_att) {
      for (std::size_t m = 0; m < num_crit; ++m) {
        if (r.attention[m] < 0) continue;
        const DurationTerm t = duration_term(fam, c.data(), std::abs(gaps[m]), r.attention[m]);
        lp += t.value;
        for (int j = 0; j < k; ++j) grad_c[j] += t.d_c[j];
        if (grad) {
          const double bc = t.d_delta * sign_of(gaps[m]);
          const int off = config_.offset(m);
          const int len = config_.segments(m);
          for (int i = off; i < off + len; ++i) grad_u[i] += bc * r.diff[i];
        }
      }
    }
  }

  if (grad) {
    grad->resize(x.size());
    grad->head(g - 1) = simplex_gradient(z, grad_u);
    if (k > 0) {
      grad->segment(g - 1, k) = L.transpose() * grad_c - eta;
      grad->segment(g - 1 + k, k) = grad_mu + grad_c;
      const SmallMat dL = 2.0 * G * L + grad_c * eta.transpose();
      Eigen::Index p = g - 1 + 2 * k;
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j, ++p) {
          (*grad)[p] = (i == j) ? dL(i, i) * L(i, i) + (k - i + 1) : dL(i, j);
        }
      }
    }
  }
  return lp;
}

}  // namespace cuepref
