#include "cuepref/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cuepref/error.hpp"

namespace cuepref {

Eigen::MatrixXd value_draws(const Eigen::MatrixXd& u_draws, const Problem& problem,
                            const PiecewiseConfig& config) {
  const Eigen::MatrixXd chars = characteristic_matrix(problem, config);
  if (u_draws.cols() != chars.cols()) throw ValidationError("draws do not match the segment config");
  return u_draws * chars.transpose();
}

PairwiseWinning pwi(const Eigen::MatrixXd& values) {
  const Eigen::Index draws = values.rows();
  const Eigen::Index n = values.cols();
  if (draws == 0) throw ValidationError("PWI needs at least one draw");
  PairwiseWinning out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index d = 0; d < draws; ++d) {
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = a + 1; b < n; ++b) {
        const double ua = values(d, a);
        const double ub = values(d, b);
        if (ua > ub) {
          out.wins(a, b) += 1;
        } else if (ub > ua) {
          out.wins(b, a) += 1;
        } else {
          out.ties(a, b) += 1;
          out.ties(b, a) += 1;
        }
      }
    }
  }
  out.wins /= static_cast<double>(draws);
  out.ties /= static_cast<double>(draws);
  out.ties.diagonal().setOnes();
  return out;
}

PairwiseWinning pwi(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config) {
  return pwi(value_draws(samples.pooled_u(), problem, config));
}

Eigen::MatrixXd rai(const Eigen::MatrixXd& values) {
  const Eigen::Index draws = values.rows();
  const Eigen::Index n = values.cols();
  if (draws == 0) throw ValidationError("RAI needs at least one draw");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < draws; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return values(d, a) > values(d, b); });
    for (Eigen::Index r = 0; r < n; ++r) out(order[static_cast<std::size_t>(r)], r) += 1;
  }
  return out / static_cast<double>(draws);
}

Eigen::MatrixXd rai(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config) {
  return rai(value_draws(samples.pooled_u(), problem, config));
}

std::pair<double, double> hpd(std::span<const double> samples, double mass) {
  if (!(mass > 0.0 && mass < 1.0)) throw ValidationError("HPD mass must lie in (0, 1)");
  if (samples.empty()) throw ValidationError("HPD needs samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const auto count = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n)));
  const std::size_t width = std::clamp<std::size_t>(count, 1, n);
  std::size_t best = 0;
  double best_len = sorted[width - 1] - sorted[0];
  for (std::size_t i = 1; i + width <= n; ++i) {
    const double len = sorted[i + width - 1] - sorted[i];
    if (len < best_len) {
      best_len = len;
      best = i;
    }
  }
  return {sorted[best], sorted[best + width - 1]};
}

std::vector<Comparison> comparisons_from(const Dataset& dataset, const Problem& problem) {
  std::vector<Comparison> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    out.push_back({problem.alternative_index(r.choice), problem.alternative_index(r.rejected())});
  }
  return out;
}

double asp(const std::vector<Comparison>& tests, const Eigen::MatrixXd& pwi_wins) {
  if (tests.empty()) throw ValidationError("ASP needs a non-empty test set");
  double sum = 0.0;
  for (const auto& t : tests) {
    sum += pwi_wins(static_cast<Eigen::Index>(t.winner), static_cast<Eigen::Index>(t.loser));
  }
  return sum / static_cast<double>(tests.size());
}

double art(const std::vector<Comparison>& tests, const Eigen::MatrixXd& pwi_wins) {
  if (tests.empty()) throw ValidationError("ART needs a non-empty test set");
  std::size_t hits = 0;
  for (const auto& t : tests) {
    if (pwi_wins(static_cast<Eigen::Index>(t.winner), static_cast<Eigen::Index>(t.loser)) > 0.5) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(tests.size());
}

Eigen::VectorXd weight_shares(const Eigen::VectorXd& u, const PiecewiseConfig& config) {
  if (u.size() != config.total()) throw ValidationError("u does not match the segment config");
  return block_sums(u, config);
}

ResultBundle summarize(const SampleSet& samples, const Problem& problem, const PiecewiseConfig& config,
                       double hpd_mass) {
  if (samples.draws_per_chain() == 0) throw ValidationError("no posterior draws to summarize");
  ResultBundle out;
  const Eigen::MatrixXd u = samples.pooled_u();
  const Eigen::MatrixXd values = value_draws(u, problem, config);
  auto w = pwi(values);
  out.pwi = std::move(w.wins);
  out.ties = std::move(w.ties);
  out.rai = rai(values);
  out.posterior_mean_u = u.colwise().mean().transpose();
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    const Eigen::VectorXd col = u.col(i);
    out.hpd_u.push_back(hpd(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                            hpd_mass));
  }
  out.weight_shares = weight_shares(out.posterior_mean_u, config);
  out.posterior_mean_c = Eigen::VectorXd::Zero(samples.k);
  out.posterior_mean_mu = Eigen::VectorXd::Zero(samples.k);
  std::size_t count = 0;
  for (const auto& chain : samples.draws) {
    for (const auto& s : chain) {
      if (samples.k > 0) {
        out.posterior_mean_c += s.c;
        out.posterior_mean_mu += s.mu;
      }
      ++count;
    }
  }
  if (samples.k > 0) {
    out.posterior_mean_c /= static_cast<double>(count);
    out.posterior_mean_mu /= static_cast<double>(count);
  }
  for (const auto& a : problem.alternatives()) out.alternative_ids.push_back(a.id);
  for (const auto& c : problem.criteria()) out.criterion_ids.push_back(c.id);
  out.segments = config.segments();
  return out;
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m, double scale = 1.0) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c) * scale);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

nlohmann::json ResultBundle::to_json() const {
  nlohmann::json j;
  j["alternatives"] = alternative_ids;
  j["criteria"] = criterion_ids;
  j["segments"] = segments;
  j["pwi"] = matrix_json(pwi);
  j["ties"] = matrix_json(ties);
  j["rai"] = matrix_json(rai, 100.0);
  j["posterior_mean"] = {{"u", vector_json(posterior_mean_u)},
                         {"c", vector_json(posterior_mean_c)},
                         {"mu", vector_json(posterior_mean_mu)}};
  nlohmann::json h = nlohmann::json::array();
  std::size_t entry = 0;
  for (std::size_t m = 0; m < segments.size(); ++m) {
    for (int t = 0; t < segments[m]; ++t, ++entry) {
      h.push_back({{"criterion", m < criterion_ids.size() ? criterion_ids[m] : std::to_string(m)},
                   {"segment", t + 1},
                   {"mean", posterior_mean_u[static_cast<Eigen::Index>(entry)]},
                   {"low", hpd_u[entry].first},
                   {"high", hpd_u[entry].second}});
    }
  }
  j["hpd"] = std::move(h);
  j["weight_shares"] = vector_json(weight_shares);
  if (metrics) {
    j["metrics"] = {{"asp", metrics->first}, {"art", metrics->second}};
  } else {
    j["metrics"] = nullptr;
  }
  j["diagnostics"] = diagnostics ? diagnostics->to_json() : nlohmann::json(nullptr);
  return j;
}

}  // namespace cuepref
