#pragma once

// Evaluation protocol: train/test splits, segment-count selection on an
// inner validation split, and the variant-by-repeat experiment grid with
// its summary table.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cuepref/analytics.hpp"
#include "cuepref/domain.hpp"
#include "cuepref/likelihood.hpp"
#include "cuepref/sampler.hpp"
#include "cuepref/valuefn.hpp"

namespace cuepref {

/// Disjoint partition with |train| = round(fraction * L). Records keep
/// their original order on both sides.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Winner/loser of each test record. With a ground-truth value model the
/// truly better alternative wins (observed choice on exact ties); without
/// one the reported choice does.
std::vector<Comparison> score_targets(const Dataset& test, const Problem& problem,
                                      const std::optional<std::pair<Eigen::VectorXd, PiecewiseConfig>>& truth);

struct GammaSelection {
  int gamma = 0;
  std::vector<std::pair<int, double>> validation_asp;  // (candidate, ASP); empty for one candidate
};

/// Splits `train` 75/25, fits every candidate (segments per criterion) on
/// the inner part and keeps the one with the best validation ASP; ties go
/// to the smaller candidate.
GammaSelection select_gamma(const Problem& problem, const Dataset& train, std::vector<int> candidates,
                            const VariantSpec& spec, const SamplerConfig& sampler, std::uint64_t seed,
                            double inner_fraction = 0.75);

struct ExperimentDataset {
  std::string name;
  Dataset data;
  /// Hidden value model for recovery scoring (synthetic data only).
  std::optional<std::pair<Eigen::VectorXd, PiecewiseConfig>> truth;
};

struct ExperimentPlan {
  std::vector<ExperimentDataset> datasets;
  std::vector<VariantSpec> variants = VariantSpec::all();
  int repeats = 20;
  double train_fraction = 0.8;
  std::vector<int> gamma_candidates = {1, 2, 3, 4};
  SamplerConfig sampler;
  std::uint64_t master_seed = 1;

  void validate() const;
};

struct CellResult {
  std::size_t dataset = 0;
  int repeat = 0;
  std::size_t variant = 0;
  int gamma = 0;
  std::uint64_t seed = 0;
  std::optional<double> asp;
  std::optional<double> art;
  bool converged = false;
  int attempts = 0;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::string error;  // set when the fit failed outright
};

struct VariantSummary {
  std::string variant;
  std::size_t fits = 0;     // converged cells aggregated
  std::size_t flagged = 0;  // non-converged or failed cells, excluded
  double asp_mean = 0.0;
  double asp_sd = 0.0;
  double art_mean = 0.0;
  double art_sd = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> dataset_names;
  std::vector<std::string> variant_names;
  std::vector<CellResult> cells;  // ordered by (dataset, repeat, variant)
  std::vector<VariantSummary> summary;

  nlohmann::json to_json() const;
  /// Model,ASP,ART with "mean(sd)" cells.
  void write_table_csv(std::ostream& out) const;
};

/// Display label: "BOR", "BABOR I-2", ...
std::string variant_label(const VariantSpec& spec);

ExperimentReport run_experiment(const Problem& problem, const ExperimentPlan& plan,
                                const std::function<void(const CellResult&)>& on_cell = {});

/// Sample mean and standard deviation (n - 1 denominator; 0 for n < 2).
std::pair<double, double> mean_sd(const std::vector<double>& xs);

}  // namespace cuepref
