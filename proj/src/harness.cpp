#include "cuepref/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "cuepref/error.hpp"
#include "cuepref/random.hpp"
#include "cuepref/workflow.hpp"

namespace cuepref {

std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction, std::uint64_t seed) {
  const std::size_t n = dataset.records.size();
  if (n < 2) throw ValidationError("splitting needs at least two records");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("train fraction must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw ValidationError("train fraction leaves one side of the split empty");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[idx[i]] = true;
  std::pair<Dataset, Dataset> out;
  out.first.problem_ref = out.second.problem_ref = dataset.problem_ref;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? out.first : out.second).records.push_back(dataset.records[i]);
  }
  return out;
}

std::vector<Comparison> score_targets(const Dataset& test, const Problem& problem,
                                      const std::optional<std::pair<Eigen::VectorXd, PiecewiseConfig>>& truth) {
  std::vector<Comparison> out = comparisons_from(test, problem);
  if (!truth) return out;
  const Eigen::MatrixXd chars = characteristic_matrix(problem, truth->second);
  const Eigen::VectorXd values = chars * truth->first;
  for (auto& c : out) {
    const double vw = values[static_cast<Eigen::Index>(c.winner)];
    const double vl = values[static_cast<Eigen::Index>(c.loser)];
    if (vl > vw) std::swap(c.winner, c.loser);
  }
  return out;
}

GammaSelection select_gamma(const Problem& problem, const Dataset& train, std::vector<int> candidates,
                            const VariantSpec& spec, const SamplerConfig& sampler, std::uint64_t seed,
                            double inner_fraction) {
  if (candidates.empty()) throw ValidationError("no segment-count candidates");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.front() < 1) throw ValidationError("segment counts must be positive");
  GammaSelection out{candidates.front(), {}};
  if (candidates.size() == 1) return out;

  const auto [inner, validation] = split(train, inner_fraction, derive_seed(seed, {0}));
  const std::vector<Comparison> targets = comparisons_from(validation, problem);
  double best = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    FitRequest req{spec, PiecewiseConfig::uniform(problem.num_criteria(), candidates[i]), sampler};
    req.sampler.seed = derive_seed(seed, {1, i});
    const FitResult fit = fit_model(problem, inner, req);
    const double score = asp(targets, fit.bundle.pwi);
    out.validation_asp.emplace_back(candidates[i], score);
    if (score > best) {
      best = score;
      out.gamma = candidates[i];
    }
  }
  return out;
}

void ExperimentPlan::validate() const {
  if (datasets.empty()) throw ValidationError("plan has no datasets");
  if (variants.empty()) throw ValidationError("plan has no variants");
  if (repeats < 1) throw ValidationError("repeats must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train fraction must lie in (0, 1)");
  if (gamma_candidates.empty()) throw ValidationError("plan has no segment-count candidates");
  sampler.validate();
}

std::string variant_label(const VariantSpec& spec) {
  if (spec.pairwise_only()) return "BOR";
  std::string name = spec.name();
  const char digit = name.back();
  name.pop_back();
  std::transform(name.begin(), name.end(), name.begin(), [](char c) { return static_cast<char>(c - 'a' + 'A'); });
  return "BABOR " + name + "-" + digit;
}

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

ExperimentReport run_experiment(const Problem& problem, const ExperimentPlan& plan,
                                const std::function<void(const CellResult&)>& on_cell) {
  plan.validate();
  ExperimentReport report;
  for (const auto& d : plan.datasets) report.dataset_names.push_back(d.name);
  for (const auto& v : plan.variants) report.variant_names.push_back(v.name());

  for (std::size_t d = 0; d < plan.datasets.size(); ++d) {
    const auto& ds = plan.datasets[d];
    for (int r = 0; r < plan.repeats; ++r) {
      const auto rr = static_cast<std::uint64_t>(r);
      // The same split serves every variant so their metrics are paired.
      const auto [train, test] = split(ds.data, plan.train_fraction, derive_seed(plan.master_seed, {d, rr}));
      const std::vector<Comparison> targets = score_targets(test, problem, ds.truth);
      for (std::size_t v = 0; v < plan.variants.size(); ++v) {
        const VariantSpec& spec = plan.variants[v];
        CellResult cell;
        cell.dataset = d;
        cell.repeat = r;
        cell.variant = v;
        cell.seed = derive_seed(plan.master_seed, {d, rr, v, 2});
        try {
          const GammaSelection sel = select_gamma(problem, train, plan.gamma_candidates, spec, plan.sampler,
                                                  derive_seed(plan.master_seed, {d, rr, v, 3}));
          cell.gamma = sel.gamma;
          FitRequest req{spec, PiecewiseConfig::uniform(problem.num_criteria(), sel.gamma), plan.sampler};
          req.sampler.seed = cell.seed;
          const FitResult fit = fit_model(problem, train, req);
          cell.converged = fit.converged;
          cell.attempts = fit.attempts;
          cell.max_rhat = fit.bundle.diagnostics->max_rhat;
          cell.min_ess = fit.bundle.diagnostics->min_ess;
          cell.asp = asp(targets, fit.bundle.pwi);
          cell.art = art(targets, fit.bundle.pwi);
        } catch (const ConvergenceError& e) {
          cell.error = e.what();
        }
        if (on_cell) on_cell(cell);
        report.cells.push_back(std::move(cell));
      }
    }
  }

  for (std::size_t v = 0; v < plan.variants.size(); ++v) {
    VariantSummary s;
    s.variant = plan.variants[v].name();
    std::vector<double> asps;
    std::vector<double> arts;
    for (const auto& c : report.cells) {
      if (c.variant != v) continue;
      if (c.converged && c.asp && c.art) {
        asps.push_back(*c.asp);
        arts.push_back(*c.art);
      } else {
        ++s.flagged;
      }
    }
    s.fits = asps.size();
    std::tie(s.asp_mean, s.asp_sd) = mean_sd(asps);
    std::tie(s.art_mean, s.art_sd) = mean_sd(arts);
    report.summary.push_back(s);
  }
  return report;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"dataset", dataset_names[c.dataset]},
                          {"repeat", c.repeat},
                          {"variant", variant_names[c.variant]},
                          {"gamma", c.gamma},
                          {"seed", c.seed},
                          {"asp", c.asp ? nlohmann::json(*c.asp) : nlohmann::json(nullptr)},
                          {"art", c.art ? nlohmann::json(*c.art) : nlohmann::json(nullptr)},
                          {"converged", c.converged},
                          {"flagged", !c.converged},
                          {"attempts", c.attempts},
                          {"max_rhat", c.max_rhat},
                          {"min_ess", c.min_ess},
                          {"error", c.error}});
  }
  nlohmann::json summary_json = nlohmann::json::array();
  for (const auto& s : summary) {
    summary_json.push_back({{"variant", s.variant},
                            {"label", variant_label(VariantSpec::parse(s.variant))},
                            {"fits", s.fits},
                            {"flagged", s.flagged},
                            {"asp_mean", s.asp_mean},
                            {"asp_sd", s.asp_sd},
                            {"art_mean", s.art_mean},
                            {"art_sd", s.art_sd}});
  }
  return {{"datasets", dataset_names}, {"variants", variant_names}, {"cells", cells_json},
          {"summary", summary_json}};
}

void ExperimentReport::write_table_csv(std::ostream& out) const {
  out << "Model,ASP,ART\n";
  char buf[64];
  for (const auto& s : summary) {
    out << variant_label(VariantSpec::parse(s.variant));
    std::snprintf(buf, sizeof buf, ",%.3f(%.3f)", s.asp_mean, s.asp_sd);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.3f(%.3f)", s.art_mean, s.art_sd);
    out << buf << '\n';
  }
}

}  // namespace cuepref
