#pragma once

// Piecewise-linear additive value functions.
//
// Each criterion scale is cut into equal-length segments. An alternative is
// encoded once as a characteristic vector v (one entry per segment, the
// fraction of that segment its performance covers); a value model is a
// simplex vector u of per-segment value increments, and U(a) = u . v(a).

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cuepref/domain.hpp"

namespace cuepref {

/// Number of equal-length segments per criterion, in problem order.
class PiecewiseConfig {
 public:
  PiecewiseConfig() = default;
  explicit PiecewiseConfig(std::vector<int> segments);

  /// Same segment count on every criterion.
  static PiecewiseConfig uniform(std::size_t num_criteria, int segments);
  /// Per-criterion overrides keyed by criterion id; unlisted criteria get
  /// `fallback`.
  static PiecewiseConfig from_map(const Problem& problem, const std::map<std::string, int>& segments,
                                  int fallback);

  const std::vector<int>& segments() const { return segments_; }
  int segments(std::size_t criterion) const { return segments_[criterion]; }
  std::size_t num_criteria() const { return segments_.size(); }
  /// Total parameter count (sum of segments).
  int total() const { return total_; }
  /// Index of the first entry of a criterion's block in u and v.
  int offset(std::size_t criterion) const { return offsets_[criterion]; }

  bool operator==(const PiecewiseConfig&) const = default;

 private:
  std::vector<int> segments_;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// Block of the characteristic vector for one performance on a gain scale.
Eigen::VectorXd segment_coverage(double performance, double scale_min, double scale_max,
                                 int segments);

/// Characteristic vector of an alternative. Cost criteria are reflected
/// onto a gain scale (g -> min + max - g) before encoding.
Eigen::VectorXd characteristic_vector(const Problem& problem, const PiecewiseConfig& config,
                                      std::size_t alt);

/// Row n is the characteristic vector of alternative n.
Eigen::MatrixXd characteristic_matrix(const Problem& problem, const PiecewiseConfig& config);

double comprehensive_value(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// |u . (va - vb)|
double value_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& va,
                        const Eigen::VectorXd& vb);

/// |u_m . (va_m - vb_m)| on the block of criterion m.
double marginal_difference(const Eigen::VectorXd& u, const Eigen::VectorXd& va,
                           const Eigen::VectorXd& vb, const PiecewiseConfig& config,
                           std::size_t criterion);

/// Sum of each criterion's block: the largest value it can contribute.
Eigen::VectorXd block_sums(const Eigen::VectorXd& u, const PiecewiseConfig& config);

bool on_simplex(const Eigen::VectorXd& u, double tol = 1e-10);

struct SimplexPoint {
  Eigen::VectorXd u;
  double log_jacobian = 0.0;
};

/// Stick-breaking map R^{n-1} -> open simplex in R^n. The zero vector maps
/// to the uniform point.
SimplexPoint from_unconstrained(const Eigen::VectorXd& z);

/// Inverse of from_unconstrained. Rejects points with a zero entry.
Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& u);

/// Given the gradient of f with respect to u, return the gradient of
/// f(u(z)) + log|J(z)| with respect to z.
Eigen::VectorXd simplex_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& grad_u);

}  // namespace cuepref
