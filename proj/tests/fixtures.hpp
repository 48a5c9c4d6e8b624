#pragma once

// Shared test data: datasets with moderate durations drawn from a fixed
// decision maker, and random unconstrained points.

#include <random>

#include "cuepref/io.hpp"
#include "cuepref/likelihood.hpp"
#include "cuepref/simulator.hpp"

namespace fixtures {

using namespace cuepref;

inline SyntheticDM fixed_dm(Family family, int gamma, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticDM dm;
  dm.family = family;
  dm.u_true = sample_dirichlet(Eigen::VectorXd::Ones(gamma), rng);
  const int k = VariantSpec::family_coefficients(family);
  dm.c_true.resize(k);
  switch (family) {
    case Family::kExponential: dm.c_true << 2.0, 0.3; break;
    case Family::kGamma: dm.c_true << -1.0, 0.8, -0.5, 0.2; break;
    case Family::kPoisson: dm.c_true << -1.5, 1.6; break;
  }
  dm.mu_true = dm.c_true;
  dm.sigma_true = 0.01 * Eigen::MatrixXd::Identity(k, k);
  return dm;
}

/// `pairs` comparisons on the phone contracts problem, two segments each.
inline Dataset moderate_dataset(Family family, std::size_t pairs, std::uint64_t seed) {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  const SyntheticDM dm = fixed_dm(family, config.total(), seed);
  return simulate_dataset(dm, p, config, sample_pairs(p, pairs, seed + 1), seed + 2);
}

inline Eigen::VectorXd random_point(std::size_t dim, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
  return x;
}

/// max_i |g_i - fd_i| / max(1, |g_i|, |fd_i|) with central differences.
inline double gradient_error(const PosteriorModel& model, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g;
  model.log_density_gradient(x, g);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (model.log_density(xp) - model.log_density(xm)) / (2 * h);
    const double scale = std::max({1.0, std::abs(g[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(g[i] - fd) / scale);
  }
  return worst;
}

}  // namespace fixtures
