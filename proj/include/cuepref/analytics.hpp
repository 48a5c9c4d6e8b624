#pragma once

// Decision outputs from posterior samples: pairwise winning indices, rank
// acceptability indices, HPD intervals, weight shares, held-out metrics and
// fuzzy C-means profiling.

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cuepref/diagnostics.hpp"
#include "cuepref/domain.hpp"
#include "cuepref/sampler.hpp"
#include "cuepref/valuefn.hpp"

namespace cuepref {

/// Comprehensive values per draw: rows are draws, columns alternatives.
Eigen::MatrixXd value_draws(const Eigen::MatrixXd& u_draws, const Problem& problem,
                            const PiecewiseConfig& config);

struct PairwiseWinning {
  Eigen::MatrixXd wins;  // (a, b): share of draws with U(a) > U(b)
  Eigen::MatrixXd ties;  // (a, b): share of draws with U(a) == U(b); 1 on the diagonal
};

PairwiseWinning pwi(const Eigen::MatrixXd& values);
PairwiseWinning pwi(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config);

/// (alternative, rank): share of draws in which the alternative takes the
/// rank (0 = best) when sorted by value, ties broken by alternative index.
Eigen::MatrixXd rai(const Eigen::MatrixXd& values);
Eigen::MatrixXd rai(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config);

/// Shortest window of the sorted sample holding ceil(mass * n) points.
std::pair<double, double> hpd(std::span<const double> samples, double mass = 0.95);

/// A held-out comparison: `winner` was (truly or reportedly) preferred.
struct Comparison {
  std::size_t winner = 0;
  std::size_t loser = 0;
};

std::vector<Comparison> comparisons_from(const Dataset& dataset, const Problem& problem);

/// Mean PWI(winner, loser) over the comparisons.
double asp(const std::vector<Comparison>& tests, const Eigen::MatrixXd& pwi_wins);
/// Share of comparisons with PWI(winner, loser) > 0.5.
double art(const std::vector<Comparison>& tests, const Eigen::MatrixXd& pwi_wins);

/// Per-criterion sum of u's block (the criterion's maximal marginal value).
Eigen::VectorXd weight_shares(const Eigen::VectorXd& u, const PiecewiseConfig& config);

struct ResultBundle {
  Eigen::MatrixXd pwi;
  Eigen::MatrixXd ties;
  Eigen::MatrixXd rai;
  Eigen::VectorXd posterior_mean_u;
  std::vector<std::pair<double, double>> hpd_u;
  Eigen::VectorXd weight_shares;
  Eigen::VectorXd posterior_mean_c;
  Eigen::VectorXd posterior_mean_mu;
  std::optional<std::pair<double, double>> metrics;  // (asp, art)
  std::optional<FitDiagnostics> diagnostics;
  std::vector<std::string> alternative_ids;
  std::vector<std::string> criterion_ids;
  std::vector<int> segments;

  /// {pwi, ties, rai (percent, alternatives x ranks), posterior_mean,
  /// hpd, weight_shares, metrics, diagnostics}
  nlohmann::json to_json() const;
};

ResultBundle summarize(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config,
                       double hpd_mass = 0.95);

// ---------------------------------------------------------------------------
// Fuzzy C-means

struct FcmOptions {
  double fuzzifier = 2.0;
  double tol = 1e-6;
  int max_iter = 1000;
  std::uint64_t seed = 1;
};

struct FcmResult {
  Eigen::MatrixXd centers;     // clusters x features
  Eigen::MatrixXd membership;  // points x clusters, rows sum to 1
  std::vector<double> objective;  // per iteration
  int iterations = 0;
};

/// Rows of `points` are observations.
FcmResult fcm(const Eigen::MatrixXd& points, int clusters, const FcmOptions& options = {});

/// Membership update for fixed centers. A point sitting on one or more
/// centers is shared equally among them.
Eigen::MatrixXd fcm_memberships(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                                double fuzzifier);

double fcm_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                     const Eigen::MatrixXd& membership, double fuzzifier);

}  // namespace cuepref
