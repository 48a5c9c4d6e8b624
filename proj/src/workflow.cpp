#include "cuepref/workflow.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cuepref/error.hpp"
#include "cuepref/random.hpp"

namespace cuepref {

std::uint64_t retry_seed(std::uint64_t seed) { return derive_seed(seed, {0x5eed}); }

FitResult fit_model(const Problem& problem, const Dataset& dataset, const FitRequest& request,
                    const std::function<void(int)>& on_chain_done) {
  const PosteriorModel model(problem, dataset, request.config, request.spec);
  SamplerConfig sampler = request.sampler;
  FitResult out;
  const int max_attempts = request.retry_on_nonconvergence ? 2 : 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    out.attempts = attempt;
    out.seed_used = sampler.seed;
    try {
      out.samples = sample_posterior(model, sampler, on_chain_done);
    } catch (const ConvergenceError&) {
      if (attempt == max_attempts) throw;
      sampler.seed = retry_seed(sampler.seed);
      continue;
    }
    FitDiagnostics diag = diagnose(out.samples);
    out.converged = diag.converged(request.rhat_bound);
    out.bundle = summarize(out.samples, problem, request.config, request.hpd_mass);
    out.bundle.diagnostics = std::move(diag);
    if (out.converged) break;
    sampler.seed = retry_seed(sampler.seed);
  }
  return out;
}

void write_posterior_csv(const SampleSet& samples, std::ostream& out) {
  const int g = samples.gamma;
  const int k = samples.k;
  out << "chain,iter";
  for (int i = 1; i <= g; ++i) out << ",u_" << i;
  for (int i = 1; i <= k; ++i) out << ",c_" << i;
  for (int i = 1; i <= k; ++i) out << ",mu_" << i;
  for (int i = 1; i <= k; ++i) {
    for (int j = i; j <= k; ++j) out << ",Sigma_" << i << '_' << j;
  }
  out << '\n';
  char buf[32];
  auto put = [&](double x) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
  };
  for (std::size_t c = 0; c < samples.draws.size(); ++c) {
    for (std::size_t it = 0; it < samples.draws[c].size(); ++it) {
      const auto& s = samples.draws[c][it];
      out << c << ',' << it;
      for (int i = 0; i < g; ++i) put(s.u[i]);
      for (int i = 0; i < k; ++i) put(s.c[i]);
      for (int i = 0; i < k; ++i) put(s.mu[i]);
      for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) put(s.sigma(i, j));
      }
      out << '\n';
    }
  }
}

SampleSet read_posterior_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("posterior dump is empty");
  int g = 0;
  int k = 0;
  std::size_t columns = 0;
  {
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) {
      ++columns;
      if (col.rfind("u_", 0) == 0) ++g;
      if (col.rfind("c_", 0) == 0) ++k;
    }
  }
  const std::size_t expected = 2 + static_cast<std::size_t>(g + 2 * k + k * (k + 1) / 2);
  if (g < 1 || columns != expected) throw ValidationError("posterior dump header is malformed");

  SampleSet out;
  out.gamma = g;
  out.k = k;
  std::size_t line_no = 1;
  std::vector<double> values(columns);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t col = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end && col < columns) {
      const char* comma = std::find(p, end, ',');
      const auto res = std::from_chars(p, comma, values[col]);
      if (res.ec != std::errc() || res.ptr != comma) {
        throw ValidationError("posterior dump line " + std::to_string(line_no) + " is malformed");
      }
      ++col;
      p = comma + 1;
    }
    if (col != columns) throw ValidationError("posterior dump line " + std::to_string(line_no) + " is short");
    const auto chain = static_cast<std::size_t>(values[0]);
    if (chain >= out.draws.size()) out.draws.resize(chain + 1);
    LatentState s;
    std::size_t pos = 2;
    s.u.resize(g);
    for (int i = 0; i < g; ++i) s.u[i] = values[pos++];
    s.c.resize(k);
    for (int i = 0; i < k; ++i) s.c[i] = values[pos++];
    s.mu.resize(k);
    for (int i = 0; i < k; ++i) s.mu[i] = values[pos++];
    s.sigma.resize(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = i; j < k; ++j) s.sigma(i, j) = s.sigma(j, i) = values[pos++];
    }
    out.draws[chain].push_back(std::move(s));
  }
  for (const auto& chain : out.draws) {
    if (chain.size() != out.draws.front().size()) throw ValidationError("chains have unequal lengths");
  }
  out.accept_rates.assign(out.draws.size(), 0.0);
  out.divergences.assign(out.draws.size(), 0);
  out.step_sizes.assign(out.draws.size(), 0.0);
  out.adaptation_traces.resize(out.draws.size());
  return out;
}

}  // namespace cuepref
