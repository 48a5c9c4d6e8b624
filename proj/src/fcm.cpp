#include <cmath>
#include <limits>

#include "cuepref/analytics.hpp"
#include "cuepref/error.hpp"
#include "cuepref/random.hpp"

namespace cuepref {

Eigen::MatrixXd fcm_memberships(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                                double fuzzifier) {
  const Eigen::Index n = points.rows();
  const Eigen::Index c = centers.rows();
  const double power = 2.0 / (fuzzifier - 1.0);
  Eigen::MatrixXd u(n, c);
  Eigen::VectorXd dist(c);
  for (Eigen::Index i = 0; i < n; ++i) {
    int zero_count = 0;
    for (Eigen::Index j = 0; j < c; ++j) {
      dist[j] = (points.row(i) - centers.row(j)).norm();
      if (dist[j] == 0.0) ++zero_count;
    }
    if (zero_count > 0) {
      for (Eigen::Index j = 0; j < c; ++j) u(i, j) = dist[j] == 0.0 ? 1.0 / zero_count : 0.0;
      continue;
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      double denom = 0.0;
      for (Eigen::Index l = 0; l < c; ++l) denom += std::pow(dist[j] / dist[l], power);
      u(i, j) = 1.0 / denom;
    }
  }
  return u;
}

double fcm_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                     const Eigen::MatrixXd& membership, double fuzzifier) {
  double out = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < centers.rows(); ++j) {
      out += std::pow(membership(i, j), fuzzifier) * (points.row(i) - centers.row(j)).squaredNorm();
    }
  }
  return out;
}

FcmResult fcm(const Eigen::MatrixXd& points, int clusters, const FcmOptions& options) {
  const Eigen::Index n = points.rows();
  if (clusters < 1 || clusters > n) throw ValidationError("cluster count must lie in [1, points]");
  if (!(options.fuzzifier > 1.0)) throw ValidationError("fuzzifier must exceed 1");
  if (options.max_iter < 1) throw ValidationError("max_iter must be positive");

  // Random initial memberships, rows normalized.
  Rng rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd u(n, clusters);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < clusters; ++j) u(i, j) = unif(rng) + 1e-12;
    u.row(i) /= u.row(i).sum();
  }

  FcmResult out;
  Eigen::MatrixXd centers(clusters, points.cols());
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iter; ++it) {
    const Eigen::MatrixXd um = u.array().pow(options.fuzzifier).matrix();
    for (int j = 0; j < clusters; ++j) {
      centers.row(j) = (um.col(j).transpose() * points) / um.col(j).sum();
    }
    u = fcm_memberships(points, centers, options.fuzzifier);
    const double obj = fcm_objective(points, centers, u, options.fuzzifier);
    out.objective.push_back(obj);
    out.iterations = it;
    if (std::abs(prev - obj) <= options.tol * std::max(1.0, std::abs(obj))) break;
    prev = obj;
  }
  out.centers = std::move(centers);
  out.membership = std::move(u);
  return out;
}

}  // namespace cuepref
