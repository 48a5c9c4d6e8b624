#pragma once

// Convergence diagnostics for MCMC output.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "cuepref/sampler.hpp"

namespace cuepref {

/// Potential scale reduction from between- and within-chain variances
/// (Gelman-Rubin, unsplit chains). Needs >= 2 chains of equal length >= 4.
/// Returns 1.0 when every chain is constant.
double rhat(const std::vector<std::vector<double>>& chains);

/// Normalized autocovariance for lags 0..max_lag. A constant series gives
/// 1 at lag 0 and 0 elsewhere.
std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag);

/// Effective sample size of one series, truncating the autocorrelation sum
/// with Geyer's initial positive sequence.
double ess(std::span<const double> series);

/// Sum of per-chain effective sample sizes.
double ess(const std::vector<std::vector<double>>& chains);

struct FitDiagnostics {
  std::vector<double> rhat_u;
  std::vector<double> ess_u;
  std::vector<double> accept_rates;
  std::vector<int> divergences;
  double max_rhat = 0.0;
  double min_ess = 0.0;

  /// R-hat below the given bound for every u entry.
  bool converged(double rhat_bound = 1.1) const { return max_rhat < rhat_bound; }
  nlohmann::json to_json() const;
};

FitDiagnostics diagnose(const SampleSet& samples);

}  // namespace cuepref
