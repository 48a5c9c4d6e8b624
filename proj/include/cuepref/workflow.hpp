#pragma once

// One dataset, one variant: sample, diagnose, summarize. Also the posterior
// dump format shared by `fit` and `diagnose`.

#include <functional>
#include <iosfwd>
#include <optional>

#include "cuepref/analytics.hpp"
#include "cuepref/diagnostics.hpp"
#include "cuepref/domain.hpp"
#include "cuepref/likelihood.hpp"
#include "cuepref/sampler.hpp"
#include "cuepref/valuefn.hpp"

namespace cuepref {

struct FitRequest {
  VariantSpec spec;
  PiecewiseConfig config;
  SamplerConfig sampler;
  double hpd_mass = 0.95;
  /// Rerun once with a derived seed when R-hat reaches this bound.
  double rhat_bound = 1.1;
  bool retry_on_nonconvergence = true;
};

struct FitResult {
  SampleSet samples;
  ResultBundle bundle;     // diagnostics embedded
  bool converged = false;
  int attempts = 1;
  std::uint64_t seed_used = 0;
};

/// Samples the posterior and summarizes it. Throws ValidationError on bad
/// input; ConvergenceError from the sampler propagates (after one retry
/// when enabled). A fit that still misses the R-hat bound is returned with
/// converged == false.
FitResult fit_model(const Problem& problem, const Dataset& dataset, const FitRequest& request,
                    const std::function<void(int)>& on_chain_done = {});

/// Seed of the retry after a failed attempt.
std::uint64_t retry_seed(std::uint64_t seed);

/// CSV: chain, iter, u_1..u_g, c_1..c_k, mu_1..mu_k, Sigma_i_j (i <= j).
void write_posterior_csv(const SampleSet& samples, std::ostream& out);
SampleSet read_posterior_csv(std::istream& in);

}  // namespace cuepref
