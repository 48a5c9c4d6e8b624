#include "cuepref/likelihood.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>

#include "cuepref/error.hpp"

namespace cuepref {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void require_finite(const Eigen::VectorXd& c) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i])) throw ValidationError("regression coefficients must be finite");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// VariantSpec

std::string family_name(Family f) {
  switch (f) {
    case Family::kExponential: return "exponential";
    case Family::kGamma: return "gamma";
    case Family::kPoisson: return "poisson";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "exponential" || name == "exp") return Family::kExponential;
  if (name == "gamma") return Family::kGamma;
  if (name == "poisson") return Family::kPoisson;
  throw ValidationError("unknown duration family '" + std::string(name) + "'");
}

VariantSpec VariantSpec::parse(std::string_view name) {
  if (name == "bor") return {Channels::kPcOnly, Family::kExponential};
  if (name.size() < 2) throw ValidationError("unknown variant '" + std::string(name) + "'");
  const char digit = name.back();
  const std::string_view roman = name.substr(0, name.size() - 1);
  VariantSpec spec;
  if (roman == "i") {
    spec.channels = Channels::kPcRtAtt;
  } else if (roman == "ii") {
    spec.channels = Channels::kPcRt;
  } else if (roman == "iii") {
    spec.channels = Channels::kPcAtt;
  } else {
    throw ValidationError("unknown variant '" + std::string(name) + "'");
  }
  switch (digit) {
    case '1': spec.family = Family::kGamma; break;
    case '2': spec.family = Family::kExponential; break;
    case '3': spec.family = Family::kPoisson; break;
    default: throw ValidationError("unknown variant '" + std::string(name) + "'");
  }
  return spec;
}

std::string VariantSpec::name() const {
  if (pairwise_only()) return "bor";
  std::string out = channels == Channels::kPcRtAtt ? "i" : channels == Channels::kPcRt ? "ii" : "iii";
  out += family == Family::kGamma ? '1' : family == Family::kExponential ? '2' : '3';
  return out;
}

std::vector<VariantSpec> VariantSpec::all() {
  std::vector<VariantSpec> out;
  for (const char* n : {"bor", "i1", "i2", "i3", "ii1", "ii2", "ii3", "iii1", "iii2", "iii3"}) {
    out.push_back(parse(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hyperparameters

Hyperparams Hyperparams::defaults(int gamma, int k) {
  Hyperparams h;
  h.tau = Eigen::VectorXd::Ones(gamma);
  h.zeta = Eigen::VectorXd::Zero(k);
  h.gamma_cov = 100.0 * Eigen::MatrixXd::Identity(k, k);
  h.epsilon = k + 2.0;
  h.psi = 1e-2 * Eigen::MatrixXd::Identity(k, k);
  return h;
}

void Hyperparams::validate(int gamma, int k) const {
  if (tau.size() != gamma) throw ValidationError("tau must have one entry per segment");
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    if (!(tau[i] > 0)) throw ValidationError("tau entries must be positive");
  }
  if (k == 0) return;
  if (zeta.size() != k || gamma_cov.rows() != k || gamma_cov.cols() != k || psi.rows() != k ||
      psi.cols() != k) {
    throw ValidationError("hyperparameter dimensions do not match k = " + std::to_string(k));
  }
  if (!(epsilon > k - 1)) throw ValidationError("inverse-Wishart degrees of freedom must exceed k - 1");
  auto spd = [](const Eigen::MatrixXd& m) {
    if (!m.isApprox(m.transpose())) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
  };
  if (!spd(gamma_cov)) throw ValidationError("Gamma must be symmetric positive definite");
  if (!spd(psi)) throw ValidationError("Psi must be symmetric positive definite");
}

// ---------------------------------------------------------------------------
// Likelihood terms

double bt_log_prob(double gap) {
  // log(e^a / (e^a + e^b)) = -log(1 + e^{-(a-b)})
  return gap >= 0 ? -std::log1p(std::exp(-gap)) : gap - std::log1p(std::exp(gap));
}

double bt_log_prob(const Eigen::VectorXd& u, const Eigen::VectorXd& v_winner,
                   const Eigen::VectorXd& v_loser) {
  return bt_log_prob(comprehensive_value(u, v_winner) - comprehensive_value(u, v_loser));
}

namespace {

// Extreme coefficients during a trajectory must surface as non-finite
// values (a divergence), not as exceptions.
using QuietPolicy = boost::math::policies::policy<
    boost::math::policies::overflow_error<boost::math::policies::ignore_error>,
    boost::math::policies::pole_error<boost::math::policies::ignore_error>,
    boost::math::policies::domain_error<boost::math::policies::ignore_error>,
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>>;
constexpr QuietPolicy kQuietPolicy{};

}  // namespace

DurationTerm duration_term(Family family, const double* c, double delta, double t) {
  DurationTerm out;
  switch (family) {
    case Family::kExponential: {
      const double eta = c[0] * delta + c[1];
      const double rate = std::exp(eta);
      out.value = eta - rate * t;
      const double d_eta = 1.0 - rate * t;
      out.d_delta = c[0] * d_eta;
      out.d_c = {delta * d_eta, d_eta, 0.0, 0.0};
      break;
    }
    case Family::kGamma: {
      const double log_shape = c[0] * delta + c[1];
      const double log_scale = c[2] * delta + c[3];
      const double shape = std::exp(log_shape);
      const double log_t = std::log(t);
      const double t_over_scale = t * std::exp(-log_scale);
      out.value = (shape - 1.0) * log_t - t_over_scale - shape * log_scale - std::lgamma(shape);
      const double d_log_shape = shape * (log_t - log_scale - boost::math::digamma(shape, kQuietPolicy));
      const double d_log_scale = t_over_scale - shape;
      out.d_delta = c[0] * d_log_shape + c[2] * d_log_scale;
      out.d_c = {delta * d_log_shape, d_log_shape, delta * d_log_scale, d_log_scale};
      break;
    }
    case Family::kPoisson: {
      const double n = std::ceil(t);
      const double eta = c[0] * delta + c[1];
      const double rate = std::exp(eta);
      out.value = n * eta - rate - std::lgamma(n + 1.0);
      const double d_eta = n - rate;
      out.d_delta = c[0] * d_eta;
      out.d_c = {delta * d_eta, d_eta, 0.0, 0.0};
      break;
    }
  }
  return out;
}

double duration_log_prob(Family family, const Eigen::VectorXd& c, double delta, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("duration must be positive and finite");
  if (c.size() != VariantSpec::family_coefficients(family)) {
    throw ValidationError(family_name(family) + " family expects " +
                          std::to_string(VariantSpec::family_coefficients(family)) + " coefficients");
  }
  require_finite(c);
  return duration_term(family, c.data(), delta, t).value;
}

// ---------------------------------------------------------------------------
// Priors

double log_dirichlet(const Eigen::VectorXd& u, const Eigen::VectorXd& tau) {
  double out = std::lgamma(tau.sum());
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    out -= std::lgamma(tau[i]);
    if (tau[i] != 1.0) out += (tau[i] - 1.0) * std::log(u[i]);
  }
  return out;
}

double log_mvnormal(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                    const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ValidationError("covariance is not positive definite");
  const Eigen::VectorXd r = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(x.size()) * kLogTwoPi - 0.5 * log_det - 0.5 * r.squaredNorm();
}

double log_multivariate_gamma(int k, double a) {
  double out = 0.25 * k * (k - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= k; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

double log_inverse_wishart(const Eigen::MatrixXd& sigma, double dof, const Eigen::MatrixXd& scale) {
  const int k = static_cast<int>(sigma.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success || !sigma.isApprox(sigma.transpose())) {
    throw ValidationError("Sigma is not symmetric positive definite");
  }
  const double log_det_sigma = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det_scale = std::log(scale.determinant());
  const double trace = (scale * llt.solve(Eigen::MatrixXd::Identity(k, k))).trace();
  return 0.5 * dof * log_det_scale - 0.5 * dof * k * std::numbers::ln2 -
         log_multivariate_gamma(k, 0.5 * dof) - 0.5 * (dof + k + 1) * log_det_sigma - 0.5 * trace;
}

double prior_log_prob(const LatentState& state, const Hyperparams& hyper, const VariantSpec& spec) {
  double out = log_dirichlet(state.u, hyper.tau);
  if (spec.pairwise_only()) return out;
  out += log_mvnormal(state.mu, hyper.zeta, hyper.gamma_cov);
  out += log_inverse_wishart(state.sigma, hyper.epsilon, hyper.psi);
  out += log_mvnormal(state.c, state.mu, state.sigma);
  return out;
}

}  // namespace cuepref
