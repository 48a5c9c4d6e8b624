#include "cuepref/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cuepref/error.hpp"
#include "cuepref/io.hpp"

namespace cuepref {

namespace {

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Hyperparams simulation_hyperparams(int gamma, Family family) {
  return Hyperparams::defaults(gamma, VariantSpec::family_coefficients(family));
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& tau, Rng& rng) {
  Eigen::VectorXd out(tau.size());
  for (Eigen::Index i = 0; i < tau.size(); ++i) {
    std::gamma_distribution<double> g(tau[i], 1.0);
    out[i] = g(rng);
  }
  const double s = out.sum();
  if (!(s > 0.0)) {
    out.setConstant(1.0 / static_cast<double>(tau.size()));
    return out;
  }
  return out / s;
}

Eigen::VectorXd sample_mvnormal(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw ValidationError("covariance is not positive definite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean + llt.matrixL() * z;
}

Eigen::MatrixXd sample_inverse_wishart(double dof, const Eigen::MatrixXd& scale, Rng& rng) {
  const Eigen::Index k = scale.rows();
  Eigen::LLT<Eigen::MatrixXd> scale_llt(scale);
  if (scale_llt.info() != Eigen::Success) throw ValidationError("scale is not positive definite");
  const Eigen::MatrixXd scale_inv = scale_llt.solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(scale_inv).matrixL();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::chi_squared_distribution<double> chi(dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::MatrixXd la = l * a;
  const Eigen::MatrixXd wishart = la * la.transpose();
  Eigen::MatrixXd sigma = wishart.llt().solve(Eigen::MatrixXd::Identity(k, k));
  return 0.5 * (sigma + sigma.transpose());
}

SyntheticDM sample_dm(const Hyperparams& hyper, const VariantSpec& spec, std::uint64_t seed) {
  const int k = VariantSpec::family_coefficients(spec.family);
  hyper.validate(static_cast<int>(hyper.tau.size()), k);
  Rng rng(seed);
  SyntheticDM dm;
  dm.family = spec.family;
  dm.seed = seed;
  dm.u_true = sample_dirichlet(hyper.tau, rng);
  dm.mu_true = sample_mvnormal(hyper.zeta, hyper.gamma_cov, rng);
  dm.sigma_true = sample_inverse_wishart(hyper.epsilon, hyper.psi, rng);
  dm.c_true = sample_mvnormal(dm.mu_true, dm.sigma_true, rng);
  return dm;
}

double sample_duration(Family family, const Eigen::VectorXd& c, double delta, Rng& rng) {
  switch (family) {
    case Family::kExponential: {
      std::exponential_distribution<double> d(std::exp(c[0] * delta + c[1]));
      return d(rng);
    }
    case Family::kGamma: {
      std::gamma_distribution<double> d(std::exp(c[0] * delta + c[1]), std::exp(c[2] * delta + c[3]));
      return d(rng);
    }
    case Family::kPoisson: {
      const double lambda = std::exp(c[0] * delta + c[1]);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      long long n = 0;
      if (lambda < 1.0) {
        // Inversion on the truncated pmf; rejection would stall as lambda -> 0.
        double p = lambda / std::expm1(lambda);
        double cdf = p;
        const double target = unif(rng);
        n = 1;
        while (cdf < target && p > 0.0) {
          p *= lambda / static_cast<double>(n + 1);
          cdf += p;
          ++n;
        }
      } else {
        std::poisson_distribution<long long> d(lambda);
        while (n == 0) n = d(rng);
      }
      return static_cast<double>(n) - unif(rng);
    }
  }
  return 0.0;
}

std::vector<IndexPair> sample_pairs(const Problem& problem, std::size_t count, std::uint64_t seed) {
  std::vector<IndexPair> pool = candidate_pairs(problem);
  if (count == 0) throw ValidationError("pair count must be positive");
  if (count > pool.size()) {
    throw ValidationError("requested " + std::to_string(count) + " pairs but only " +
                          std::to_string(pool.size()) + " are non-dominated");
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

Dataset simulate_dataset(const SyntheticDM& dm, const Problem& problem, const PiecewiseConfig& config,
                         const std::vector<IndexPair>& pairs, std::uint64_t seed,
                         const SimulationOptions& options) {
  if (pairs.empty()) throw ValidationError("pair list is empty");
  if (dm.u_true.size() != config.total()) throw ValidationError("u_true does not match the segment config");
  const Eigen::MatrixXd chars = characteristic_matrix(problem, config);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  // Prior-scale coefficients can push a draw to 0 or infinity in double
  // precision; keep every stored duration positive and finite.
  auto noisy = [&](double t) {
    if (options.lognormal_noise_sd > 0.0) t *= std::exp(options.lognormal_noise_sd * normal(rng));
    return std::clamp(t, std::numeric_limits<double>::min(), std::numeric_limits<double>::max());
  };

  Dataset out;
  out.problem_ref = problem.id();
  double clock = options.start_time;
  for (const auto& [a, b] : pairs) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    const Eigen::VectorXd diff = (chars.row(ia) - chars.row(ib)).transpose();
    const double gap = dm.u_true.dot(diff);
    PreferenceRecord r;
    r.pair = {problem.alternatives()[a].id, problem.alternatives()[b].id};
    const double p_first = 1.0 / (1.0 + std::exp(-gap));
    r.choice = unif(rng) < p_first ? r.pair.first : r.pair.second;
    r.response_time_s = noisy(sample_duration(dm.family, dm.c_true, std::abs(gap), rng));
    for (std::size_t m = 0; m < problem.num_criteria(); ++m) {
      const int off = config.offset(m);
      const int len = config.segments(m);
      const double gm = dm.u_true.segment(off, len).dot(diff.segment(off, len));
      r.attention_s[problem.criteria()[m].id] =
          noisy(sample_duration(dm.family, dm.c_true, std::abs(gm), rng));
    }
    r.recorded_at = format_rfc3339(clock);
    clock += std::ceil(r.response_time_s) + 1.0;
    out.records.push_back(std::move(r));
  }
  return out;
}

SyntheticCase generate_case(const Problem& problem, const PiecewiseConfig& config, Family family,
                            std::size_t num_pairs, std::uint64_t seed, const SimulationOptions& options) {
  SyntheticCase sc;
  sc.config = config;
  VariantSpec spec{Channels::kPcRtAtt, family};
  sc.dm = sample_dm(simulation_hyperparams(config.total(), family), spec, derive_seed(seed, {0}));
  sc.pairs = sample_pairs(problem, num_pairs, derive_seed(seed, {1}));
  sc.dataset = simulate_dataset(sc.dm, problem, config, sc.pairs, derive_seed(seed, {2}), options);
  return sc;
}

nlohmann::json manifest_json(const SyntheticCase& sc, const Problem& problem) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : sc.pairs) {
    pairs.push_back({problem.alternatives()[a].id, problem.alternatives()[b].id});
  }
  return {{"problem_ref", problem.id()},
          {"family", family_name(sc.dm.family)},
          {"seed", sc.dm.seed},
          {"segments", sc.config.segments()},
          {"u_true", vector_json(sc.dm.u_true)},
          {"c_true", vector_json(sc.dm.c_true)},
          {"mu_true", vector_json(sc.dm.mu_true)},
          {"sigma_true", [&] {
             nlohmann::json rows = nlohmann::json::array();
             for (Eigen::Index i = 0; i < sc.dm.sigma_true.rows(); ++i) {
               rows.push_back(vector_json(sc.dm.sigma_true.row(i).transpose()));
             }
             return rows;
           }()},
          {"pairs", pairs}};
}

SyntheticDM dm_from_manifest(const nlohmann::json& j) {
  SyntheticDM dm;
  dm.family = parse_family(j.at("family").get<std::string>());
  dm.seed = j.value("seed", std::uint64_t{0});
  dm.u_true = json_vector(j.at("u_true"));
  dm.c_true = json_vector(j.at("c_true"));
  dm.mu_true = json_vector(j.at("mu_true"));
  const auto& rows = j.at("sigma_true");
  const auto k = static_cast<Eigen::Index>(rows.size());
  dm.sigma_true.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) dm.sigma_true.row(i) = json_vector(rows[static_cast<std::size_t>(i)]);
  if (!on_simplex(dm.u_true, 1e-8)) throw ValidationError("manifest u_true is not on the simplex");
  return dm;
}

PiecewiseConfig config_from_manifest(const nlohmann::json& j) {
  return PiecewiseConfig(j.at("segments").get<std::vector<int>>());
}

}  // namespace cuepref
