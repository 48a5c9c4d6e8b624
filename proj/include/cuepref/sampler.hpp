#pragma once

// Hamiltonian Monte Carlo with a fixed leapfrog count, dual-averaging step
// size adaptation and a diagonal mass matrix estimated during warmup.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "cuepref/likelihood.hpp"

namespace cuepref {

struct SamplerConfig {
  int samples = 10000;      // retained draws per chain (K)
  int warmup = 1000;        // discarded adaptation draws (W)
  int chains = 3;
  int leapfrog_steps = 32;
  double step_size = 0.1;   // initial guess; refined before adaptation
  double target_accept = 0.8;
  std::uint64_t seed = 1;
  /// Chains run on separate threads when true.
  bool parallel = true;

  void validate() const;
};

/// Log density and gradient of an unconstrained target. Returns the log
/// density and writes the gradient into the second argument.
using LogDensityGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct Target {
  std::size_t dim = 0;
  LogDensityGradient log_density_gradient;
};

struct LeapfrogResult {
  Eigen::VectorXd position;
  Eigen::VectorXd momentum;
  double log_density = 0.0;
  Eigen::VectorXd gradient;
  bool divergent = false;   // a non-finite density or gradient was hit
};

/// `n_steps` leapfrog steps of Hamiltonian dynamics with kinetic energy
/// p' M^{-1} p / 2, M^{-1} = diag(inv_mass).
LeapfrogResult leapfrog(const Eigen::VectorXd& position, const Eigen::VectorXd& momentum,
                        double step_size, int n_steps, const Eigen::VectorXd& inv_mass,
                        const LogDensityGradient& f);

/// Hamiltonian (negative log joint) of a phase-space point.
double hamiltonian(double log_density, const Eigen::VectorXd& momentum,
                   const Eigen::VectorXd& inv_mass);

struct ChainResult {
  Eigen::MatrixXd draws;          // samples x dim, unconstrained
  double accept_rate = 0.0;       // mean acceptance probability after warmup
  int divergences = 0;            // after warmup
  int warmup_divergences = 0;
  double step_size = 0.0;         // adapted
  Eigen::VectorXd inv_mass;       // adapted diagonal
  std::vector<double> adaptation_trace;  // step size per warmup iteration
};

/// One Metropolis-corrected HMC chain from `init`. Deterministic given
/// (config, chain_seed). Throws ConvergenceError when more than 10% of the
/// retained transitions diverge.
ChainResult run_chain(const Target& target, const SamplerConfig& config, std::uint64_t chain_seed,
                      const Eigen::VectorXd& init);

/// Posterior draws for a compiled model across chains, in constrained space.
struct SampleSet {
  std::vector<std::vector<LatentState>> draws;  // [chain][iteration]
  std::vector<double> accept_rates;
  std::vector<int> divergences;
  std::vector<double> step_sizes;
  std::vector<std::vector<double>> adaptation_traces;
  SamplerConfig config;
  int gamma = 0;
  int k = 0;

  std::size_t num_chains() const { return draws.size(); }
  std::size_t draws_per_chain() const { return draws.empty() ? 0 : draws.front().size(); }
  /// All u draws pooled in chain order; rows are draws.
  Eigen::MatrixXd pooled_u() const;
  /// Per-chain series of one u entry.
  std::vector<std::vector<double>> u_series(int entry) const;
};

/// Chain starting points: the model's initial state, moved uniformly by up
/// to +-1 in every unconstrained coordinate per chain seed.
Eigen::VectorXd jittered_start(const PosteriorModel& model, std::uint64_t chain_seed);

/// Sample the posterior of `model`. `on_chain_done` (optional) is called
/// with the number of finished chains; it may be invoked from worker threads.
SampleSet sample_posterior(const PosteriorModel& model, const SamplerConfig& config,
                           const std::function<void(int)>& on_chain_done = {});

/// Same sampler over a bare target (tests, custom densities).
std::vector<ChainResult> sample_target(const Target& target, const SamplerConfig& config,
                                       const std::vector<Eigen::VectorXd>& inits);

}  // namespace cuepref
