#include "cuepref/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cuepref/error.hpp"

namespace cuepref {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw ValidationError("R-hat needs at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw ValidationError("R-hat needs chains of length >= 4");
  for (const auto& c : chains) {
    if (c.size() != n) throw ValidationError("R-hat needs chains of equal length");
  }
  const double m = static_cast<double>(chains.size());
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    means.push_back(mu);
    double ss = 0.0;
    for (double x : c) ss += (x - mu) * (x - mu);
    within += ss / static_cast<double>(n - 1);
  }
  within /= m;
  const double grand = mean_of(means);
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(n) / (m - 1.0);
  if (within <= 0.0) return 1.0;
  const double nd = static_cast<double>(n);
  const double pooled = (nd - 1.0) / nd * within + between / nd;
  return std::sqrt(pooled / within);
}

std::vector<double> autocorrelation(std::span<const double> series, std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) throw ValidationError("series must be longer than the maximum lag");
  const double mu = mean_of(series);
  std::vector<double> out(max_lag + 1, 0.0);
  double c0 = 0.0;
  for (double x : series) c0 += (x - mu) * (x - mu);
  out[0] = 1.0;
  if (c0 <= 0.0) return out;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (series[i] - mu) * (series[i + lag] - mu);
    out[lag] = s / c0;
  }
  return out;
}

double ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 4) return static_cast<double>(n);
  const std::size_t max_lag = std::min<std::size_t>(n - 1, 2000);
  const auto rho = autocorrelation(series, max_lag);
  // Pairs rho[2t] + rho[2t+1] summed while positive, made non-increasing.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; 2 * t + 1 <= max_lag; ++t) {
    double pair = rho[2 * t] + rho[2 * t + 1];
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  // tau = -1 + 2 * sum of pairs
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / std::log10(static_cast<double>(n) + 10.0));
  return static_cast<double>(n) / tau;
}

double ess(const std::vector<std::vector<double>>& chains) {
  double total = 0.0;
  for (const auto& c : chains) total += ess(std::span<const double>(c));
  return total;
}

FitDiagnostics diagnose(const SampleSet& samples) {
  FitDiagnostics d;
  d.accept_rates = samples.accept_rates;
  d.divergences = samples.divergences;
  d.min_ess = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples.gamma; ++i) {
    const auto series = samples.u_series(i);
    const double r = (series.size() >= 2 && series.front().size() >= 4) ? rhat(series) : 1.0;
    const double e = ess(series);
    d.rhat_u.push_back(r);
    d.ess_u.push_back(e);
    d.max_rhat = std::max(d.max_rhat, r);
    d.min_ess = std::min(d.min_ess, e);
  }
  if (samples.gamma == 0) d.min_ess = 0.0;
  return d;
}

nlohmann::json FitDiagnostics::to_json() const {
  return {{"rhat", rhat_u},
          {"ess", ess_u},
          {"accept_rate", accept_rates},
          {"divergences", divergences},
          {"max_rhat", max_rhat},
          {"min_ess", min_ess}};
}

}  // namespace cuepref
