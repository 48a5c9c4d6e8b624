#include "cuepref/valuefn.hpp"

#include <algorithm>

#include <cmath>
#include <numeric>

#include "cuepref/error.hpp"

namespace cuepref {

PiecewiseConfig::PiecewiseConfig(std::vector<int> segments) : segments_(std::move(segments)) {
  offsets_.reserve(segments_.size());
  for (int s : segments_) {
    if (s < 1) throw ValidationError("every criterion needs at least one segment");
    offsets_.push_back(total_);
    total_ += s;
  }
}

PiecewiseConfig PiecewiseConfig::uniform(std::size_t num_criteria, int segments) {
  return PiecewiseConfig(std::vector<int>(num_criteria, segments));
}

PiecewiseConfig PiecewiseConfig::from_map(const Problem& problem,
                                          const std::map<std::string, int>& segments,
                                          int fallback) {
  std::vector<int> out(problem.num_criteria(), fallback);
  for (const auto& [id, s] : segments) out[problem.criterion_index(id)] = s;
  return PiecewiseConfig(std::move(out));
}

Eigen::VectorXd segment_coverage(double g, double lo, double hi, int segments) {
  if (g < lo || g > hi) throw ValidationError("performance outside the criterion scale");
  Eigen::VectorXd v(segments);
  const double width = (hi - lo) / segments;
  for (int t = 1; t <= segments; ++t) {
    const double left = lo + (t - 1) * width;
    const double right = lo + t * width;
    if (g > right) {
      v[t - 1] = 1.0;
    } else if (g >= left) {
      v[t - 1] = (g - left) / (right - left);
    } else {
      v[t - 1] = 0.0;
    }
  }
  return v;
}

Eigen::VectorXd characteristic_vector(const Problem& problem, const PiecewiseConfig& config,
                                      std::size_t alt) {
  if (config.num_criteria() != problem.num_criteria()) {
    throw ValidationError("segment config does not match the number of criteria");
  }
  Eigen::VectorXd v(config.total());
  for (std::size_t m = 0; m < problem.num_criteria(); ++m) {
    const auto& c = problem.criteria()[m];
    double g = problem.performance(alt, m);
    if (c.direction == Direction::kCost) {
      // The performance was validated against the bounds; keep rounding inside them.
      g = std::clamp(c.scale_min + c.scale_max - g, c.scale_min, c.scale_max);
    }
    v.segment(config.offset(m), config.segments(m)) =
        segment_coverage(g, c.scale_min, c.scale_max, config.segments(m));
  }
  return v;
}

Eigen::MatrixXd characteristic_matrix(const Problem& problem, const PiecewiseConfig& config) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(problem.num_alternatives()), config.total());
  for (std::size_t n = 0; n < problem.num_alternatives(); ++n) {
    out.row(static_cast<Eigen::Index>(n)) = characteristic_vector(problem, config, n).transpose();
  }
  return out;
}

double comprehensive_value(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) throw ValidationError("parameter and characteristic vector lengths differ");
  return u.dot(v);
}

double value_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& va,
                        const Eigen::VectorXd& vb) {
  return std::abs(comprehensive_value(u, va) - comprehensive_value(u, vb));
}

double marginal_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& va,
                           const Eigen::VectorXd& vb, const PiecewiseConfig& config,
                           std::size_t criterion) {
  const int off = config.offset(criterion);
  const int len = config.segments(criterion);
  return std::abs(u.segment(off, len).dot(va.segment(off, len) - vb.segment(off, len)));
}

Eigen::VectorXd block_sums(const Eigen::VectorXd& u, const PiecewiseConfig& config) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(config.num_criteria()));
  for (std::size_t m = 0; m < config.num_criteria(); ++m) {
    out[static_cast<Eigen::Index>(m)] = u.segment(config.offset(m), config.segments(m)).sum();
  }
  return out;
}

bool on_simplex(const Eigen::VectorXd& u, double tol) {
  if (u.size() == 0) return false;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!(u[i] >= 0.0)) return false;
  }
  return std::abs(u.sum() - 1.0) <= tol;
}

namespace {

// log(logistic(x)) without overflow.
double log_logistic(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// Stick-breaking with per-coordinate offsets log(K - k - 1) so that z = 0
// lands on the uniform point:
//   w_k = logistic(z_k - log(K-k-1)),  u_k = s_k w_k,  s_{k+1} = s_k (1 - w_k)
//   log|J| = sum_k log w_k + log(1 - w_k) + log s_k
SimplexPoint from_unconstrained(const Eigen::VectorXd& z) {
  const Eigen::Index n = z.size() + 1;
  SimplexPoint out;
  out.u.resize(n);
  double log_stick = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double x = z[k] - std::log(static_cast<double>(n - k - 1));
    const double log_w = log_logistic(x);
    const double log_1mw = log_logistic(-x);
    out.u[k] = std::exp(log_stick + log_w);
    out.log_jacobian += log_w + log_1mw + log_stick;
    log_stick += log_1mw;
  }
  out.u[n - 1] = std::exp(log_stick);
  return out;
}

Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& u) {
  if (u.size() < 1) throw ValidationError("empty simplex vector");
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (!(u[i] > 0.0)) throw ValidationError("simplex point must be strictly interior");
  }
  const Eigen::Index n = u.size();
  Eigen::VectorXd z(n - 1);
  double stick = 1.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double w = u[k] / stick;
    z[k] = std::log(w) - std::log1p(-w) + std::log(static_cast<double>(n - k - 1));
    stick -= u[k];
  }
  return z;
}

Eigen::VectorXd simplex_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& grad_u) {
  const Eigen::Index n = z.size() + 1;
  Eigen::VectorXd w(n - 1);
  Eigen::VectorXd stick(n);
  stick[0] = 1.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    w[k] = logistic(z[k] - std::log(static_cast<double>(n - k - 1)));
    stick[k + 1] = stick[k] * (1.0 - w[k]);
  }
  Eigen::VectorXd out(n - 1);
  // Adjoint of s_k, starting from u_{n-1} = s_{n-1}.
  double adj_stick = grad_u[n - 1];
  for (Eigen::Index k = n - 2; k >= 0; --k) {
    const double adj_w = grad_u[k] * stick[k] - adj_stick * stick[k];
    // d/dz of [log w + log(1-w)] is 1 - 2w; the chain through w is w(1-w).
    out[k] = adj_w * w[k] * (1.0 - w[k]) + (1.0 - 2.0 * w[k]);
    // log s_k term contributes 1/s_k for k >= 1; s_0 is constant.
    adj_stick = grad_u[k] * w[k] + adj_stick * (1.0 - w[k]) + (k > 0 ? 1.0 / stick[k] : 0.0);
  }
  return out;
}

}  // namespace cuepref
