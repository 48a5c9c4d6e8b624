#pragma once

// Synthetic decision makers drawn from the model's generative process, and
// datasets of comparisons, response times and attention durations they
// would produce.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cuepref/domain.hpp"
#include "cuepref/likelihood.hpp"
#include "cuepref/random.hpp"
#include "cuepref/valuefn.hpp"

namespace cuepref {

struct SyntheticDM {
  Eigen::VectorXd u_true;
  Eigen::VectorXd c_true;
  Eigen::VectorXd mu_true;
  Eigen::MatrixXd sigma_true;
  Family family = Family::kExponential;
  std::uint64_t seed = 0;

  LatentState state() const { return {u_true, c_true, mu_true, sigma_true}; }
};

/// u ~ Dirichlet(tau), mu ~ N(zeta, Gamma), Sigma ~ IW(epsilon, Psi),
/// c ~ N(mu, Sigma). Durations are always simulated, so the coefficient
/// count follows the family even for pairwise-only specs.
SyntheticDM sample_dm(const Hyperparams& hyper, const VariantSpec& spec, std::uint64_t seed);

/// Hyperparameter defaults sized for simulation under `spec`'s family.
Hyperparams simulation_hyperparams(int gamma, Family family);

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& tau, Rng& rng);
Eigen::VectorXd sample_mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);
/// Bartlett decomposition of the Wishart draw for Sigma^{-1}.
Eigen::MatrixXd sample_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng);

/// One duration for value difference `delta`.
///   poisson: n ~ Poisson(lambda) conditioned on n >= 1, then t uniform on
///   (n - 1, n] so that ceil(t) = n.
double sample_duration(Family family, const Eigen::VectorXd& c, double delta, Rng& rng);

struct SimulationOptions {
  /// Multiplies every duration by exp(sd * Z). Not part of the model; 0 = off.
  double lognormal_noise_sd = 0.0;
  /// Timestamp of the first record, seconds since the epoch.
  double start_time = 1.7e9;
};

/// `count` distinct candidate pairs, uniformly without replacement.
std::vector<IndexPair> sample_pairs(const Problem& problem, std::size_t count, std::uint64_t seed);

Dataset simulate_dataset(const SyntheticDM& dm, const Problem& problem, const PiecewiseConfig& config,
                         const std::vector<IndexPair>& pairs, std::uint64_t seed,
                         const SimulationOptions& options = {});

/// A DM together with its dataset; seeds for the DM, pair draw and data
/// are derived from `seed`.
struct SyntheticCase {
  SyntheticDM dm;
  PiecewiseConfig config;
  std::vector<IndexPair> pairs;
  Dataset dataset;
};

SyntheticCase generate_case(const Problem& problem, const PiecewiseConfig& config, Family family,
                            std::size_t num_pairs, std::uint64_t seed,
                            const SimulationOptions& options = {});

/// Ground truth for recovery scoring.
nlohmann::json manifest_json(const SyntheticCase& sc, const Problem& problem);
SyntheticDM dm_from_manifest(const nlohmann::json& j);
PiecewiseConfig config_from_manifest(const nlohmann::json& j);

}  // namespace cuepref
