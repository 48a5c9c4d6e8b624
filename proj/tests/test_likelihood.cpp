#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cuepref/error.hpp"
#include "fixtures.hpp"

using namespace cuepref;
using doctest::Approx;

TEST_CASE("Bradley-Terry closed forms") {
  CHECK(bt_log_prob(0.0) == Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(bt_log_prob(1.0) == Approx(std::log(std::numbers::e / (1 + std::numbers::e))).epsilon(1e-14));
  for (double gap : {-40.0, -1.3, 0.0, 0.2, 5.0, 800.0}) {
    CHECK(std::exp(bt_log_prob(gap)) + std::exp(bt_log_prob(-gap)) == Approx(1.0).epsilon(1e-14));
    CHECK(std::isfinite(bt_log_prob(gap)));
  }
  Eigen::VectorXd u(2), va(2), vb(2);
  u << 0.25, 0.75;
  va << 1, 1;
  vb << 0, 0;
  CHECK(bt_log_prob(u, va, vb) == Approx(std::log(std::numbers::e / (1 + std::numbers::e))));
}

TEST_CASE("duration closed forms") {
  CHECK(duration_log_prob(Family::kExponential, Eigen::Vector2d(0, 0), 0.3, 2.0) == Approx(-2.0).epsilon(1e-14));
  CHECK(duration_log_prob(Family::kGamma, Eigen::Vector4d(0, 0, 0, 0), 0.3, 2.0) == Approx(-2.0).epsilon(1e-14));
  CHECK(duration_log_prob(Family::kPoisson, Eigen::Vector2d(0, 0), 0.3, 1.2) ==
        Approx(-1.0 - std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("duration errors") {
  CHECK_THROWS_AS(duration_log_prob(Family::kExponential, Eigen::Vector2d(0, 0), 0.1, 0.0), ValidationError);
  CHECK_THROWS_AS(duration_log_prob(Family::kExponential, Eigen::Vector2d(0, 0), 0.1, -1.0), ValidationError);
  CHECK_THROWS_AS(duration_log_prob(Family::kExponential, Eigen::Vector2d(NAN, 0), 0.1, 1.0), ValidationError);
  CHECK_THROWS_AS(duration_log_prob(Family::kGamma, Eigen::Vector2d(0, 0), 0.1, 1.0), ValidationError);
}

TEST_CASE("continuous duration densities integrate to one") {
  struct Case {
    Family family;
    Eigen::VectorXd c;
  };
  Eigen::VectorXd ce(2), cg(4), cg2(4);
  ce << 1.5, -0.5;
  cg << 0.7, 0.4, -0.3, -0.2;
  cg2 << -0.4, 1.2, 0.5, -0.6;
  for (const auto& [family, c] : {Case{Family::kExponential, ce}, Case{Family::kGamma, cg}, Case{Family::kGamma, cg2}}) {
    for (double delta : {0.0, 0.4, 1.0}) {
      // Substitute t = e^s to resolve both the origin and the tail.
      const double lo = -25.0;
      const double hi = 6.0;
      const int n = 200000;
      const double h = (hi - lo) / n;
      double total = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double s = lo + i * h;
        const double f = std::exp(duration_log_prob(family, c, delta, std::exp(s)) + s);
        total += (i == 0 || i == n) ? 0.5 * f : f;
      }
      CHECK(total * h == Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("poisson mass sums to one") {
  const Eigen::Vector2d c(-1.2, 2.0);
  for (double delta : {0.0, 0.5, 1.0}) {
    const double lambda = std::exp(c[0] * delta + c[1]);
    double total = std::exp(-lambda);  // n = 0 is outside t > 0
    for (int n = 1; n <= 200; ++n) total += std::exp(duration_log_prob(Family::kPoisson, c, delta, n));
    CHECK(total == Approx(1.0).epsilon(1e-6));
    // Every t in (n - 1, n] carries the mass of n.
    CHECK(duration_log_prob(Family::kPoisson, c, delta, 2.0001) ==
          Approx(duration_log_prob(Family::kPoisson, c, delta, 3.0)));
  }
}

TEST_CASE("duration_term derivatives match finite differences") {
  const double h = 1e-6;
  double cs[4] = {0.6, -0.3, 0.9, 0.1};
  for (const Family f : {Family::kExponential, Family::kGamma, Family::kPoisson}) {
    const int k = VariantSpec::family_coefficients(f);
    for (double delta : {0.05, 0.5}) {
      for (double t : {0.3, 2.7}) {
        const DurationTerm term = duration_term(f, cs, delta, t);
        const double fd_delta = (duration_term(f, cs, delta + h, t).value - duration_term(f, cs, delta - h, t).value) / (2 * h);
        CHECK(term.d_delta == Approx(fd_delta).epsilon(1e-6));
        for (int j = 0; j < k; ++j) {
          double cp[4], cm[4];
          std::copy(cs, cs + 4, cp);
          std::copy(cs, cs + 4, cm);
          cp[j] += h;
          cm[j] -= h;
          const double fd = (duration_term(f, cp, delta, t).value - duration_term(f, cm, delta, t).value) / (2 * h);
          CHECK(term.d_c[static_cast<std::size_t>(j)] == Approx(fd).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("prior terms") {
  SUBCASE("flat Dirichlet is the constant log Gamma(gamma)") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd u = sample_dirichlet(Eigen::VectorXd::Ones(12), rng);
      CHECK(log_dirichlet(u, Eigen::VectorXd::Ones(12)) == Approx(std::lgamma(12.0)).epsilon(1e-12));
    }
  }
  SUBCASE("Gaussian at its mean") {
    Eigen::Matrix2d sigma;
    sigma << 2.0, 0.3, 0.3, 0.5;
    const Eigen::Vector2d mu(0.4, -1.0);
    CHECK(log_mvnormal(mu, mu, sigma) ==
          Approx(-std::log(2 * std::numbers::pi) - 0.5 * std::log(sigma.determinant())).epsilon(1e-12));
  }
  SUBCASE("inverse-Wishart at the identity") {
    // k = 2, dof = 4, Psi = 0.01 I: Gamma_2(2) = pi / 2.
    const double expected = 2.0 * std::log(1e-4) - 4.0 * std::log(2.0) - std::log(std::numbers::pi / 2.0) - 0.01;
    CHECK(log_inverse_wishart(Eigen::Matrix2d::Identity(), 4.0, 0.01 * Eigen::Matrix2d::Identity()) ==
          Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(log_inverse_wishart(-Eigen::Matrix2d::Identity(), 4.0, Eigen::Matrix2d::Identity()),
                    ValidationError);
  }
  SUBCASE("hyperparameter defaults") {
    const Hyperparams h = Hyperparams::defaults(12, 4);
    CHECK(h.tau.isApprox(Eigen::VectorXd::Ones(12)));
    CHECK(h.zeta.isZero());
    CHECK(h.gamma_cov.isApprox(100.0 * Eigen::MatrixXd::Identity(4, 4)));
    CHECK(h.epsilon == 6.0);
    CHECK(h.psi.isApprox(0.01 * Eigen::MatrixXd::Identity(4, 4)));
  }
  SUBCASE("pairwise-only prior is the Dirichlet alone") {
    LatentState s;
    s.u = Eigen::VectorXd::Constant(4, 0.25);
    CHECK(prior_log_prob(s, Hyperparams::defaults(4, 0), VariantSpec::parse("bor")) ==
          Approx(std::lgamma(4.0)).epsilon(1e-12));
  }
}

TEST_CASE("variant names") {
  const auto all = VariantSpec::all();
  REQUIRE(all.size() == 10);
  CHECK(all[0].pairwise_only());
  CHECK(all[0].k() == 0);
  CHECK(VariantSpec::parse("i1").k() == 4);
  CHECK(VariantSpec::parse("iii3").k() == 2);
  CHECK(VariantSpec::parse("ii2").channels == Channels::kPcRt);
  CHECK(VariantSpec::parse("iii1").channels == Channels::kPcAtt);
  for (const auto& v : all) CHECK(VariantSpec::parse(v.name()) == v);
  CHECK_THROWS_AS(VariantSpec::parse("iv2"), ValidationError);
  CHECK_THROWS_AS(VariantSpec::parse("i4"), ValidationError);
}

namespace {

LatentState some_state(int gamma, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LatentState s;
  s.u = sample_dirichlet(Eigen::VectorXd::Ones(gamma), rng);
  s.c = fixtures::random_point(static_cast<std::size_t>(k), rng, 0.5);
  s.mu = fixtures::random_point(static_cast<std::size_t>(k), rng, 0.5);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(k, k);
  s.sigma = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(k, k);
  return s;
}

}  // namespace

TEST_CASE("log posterior structure") {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  const Dataset data = fixtures::moderate_dataset(Family::kExponential, 10, 3);

  SUBCASE("empty dataset is the prior") {
    for (const auto& spec : VariantSpec::all()) {
      const PosteriorModel model(p, Dataset{p.id(), {}}, config, spec);
      const LatentState s = some_state(12, spec.k(), 4);
      CHECK(model.log_posterior(s) == Approx(prior_log_prob(s, model.hyper(), spec)).epsilon(1e-12));
    }
  }
  SUBCASE("pairwise-only is Dirichlet plus Bradley-Terry") {
    const PosteriorModel model(p, data, config, VariantSpec::parse("bor"));
    const LatentState s = some_state(12, 0, 5);
    const Eigen::MatrixXd chars = characteristic_matrix(p, config);
    double expected = std::lgamma(12.0);
    for (const auto& r : data.records) {
      const auto w = static_cast<Eigen::Index>(p.alternative_index(r.choice));
      const auto l = static_cast<Eigen::Index>(p.alternative_index(r.rejected()));
      const double gap = s.u.dot(chars.row(w) - chars.row(l));
      expected += -std::log1p(std::exp(-gap));
    }
    CHECK(model.log_posterior(s) == Approx(expected).epsilon(1e-12));
  }
  SUBCASE("single record equals hand-summed terms") {
    for (const Family f : {Family::kExponential, Family::kGamma, Family::kPoisson}) {
      Dataset one{p.id(), {data.records.front()}};
      one.records[0].attention_s["g3"] = 0.0;  // missing entry drops its term
      const VariantSpec spec{Channels::kPcRtAtt, f};
      const PosteriorModel model(p, one, config, spec);
      const LatentState s = some_state(12, spec.k(), 6);
      const auto& r = one.records[0];
      const Eigen::VectorXd vw = characteristic_vector(p, config, p.alternative_index(r.choice));
      const Eigen::VectorXd vl = characteristic_vector(p, config, p.alternative_index(r.rejected()));
      double expected = prior_log_prob(s, model.hyper(), spec) + bt_log_prob(s.u, vw, vl);
      expected += duration_log_prob(f, s.c, value_difference(s.u, vw, vl), r.response_time_s);
      for (std::size_t m = 0; m < 6; ++m) {
        const double t = r.attention_s.at(p.criteria()[m].id);
        if (t < kAttentionFloorSeconds) continue;
        expected += duration_log_prob(f, s.c, marginal_difference(s.u, vw, vl, config, m), t);
      }
      CHECK(model.log_posterior(s) == Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("response time and attention share one coefficient block") {
    const LatentState s = some_state(12, 2, 7);
    LatentState s2 = s;
    s2.c[0] += 0.3;
    s2.c[1] -= 0.2;
    auto delta = [&](const char* name) {
      const PosteriorModel m(p, data, config, VariantSpec::parse(name));
      return m.log_posterior(s2) - m.log_posterior(s);
    };
    const Hyperparams hyper = Hyperparams::defaults(12, 2);
    const double prior_delta = prior_log_prob(s2, hyper, VariantSpec::parse("i2")) -
                               prior_log_prob(s, hyper, VariantSpec::parse("i2"));
    const double both = delta("i2");
    const double rt = delta("ii2");
    const double att = delta("iii2");
    CHECK(std::abs(rt - prior_delta) > 1e-6);
    CHECK(std::abs(att - prior_delta) > 1e-6);
    CHECK(both == Approx(rt + att - prior_delta).epsilon(1e-10));
  }
  SUBCASE("finite on random interior points") {
    std::mt19937_64 rng(8);
    for (const auto& spec : VariantSpec::all()) {
      const PosteriorModel model(p, data, config, spec);
      for (int i = 0; i < 20; ++i) {
        CHECK(std::isfinite(model.log_density(fixtures::random_point(model.dim(), rng))));
      }
    }
  }
}

TEST_CASE("unconstrained density adds the transform Jacobians") {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  const Dataset data = fixtures::moderate_dataset(Family::kGamma, 8, 9);
  const PosteriorModel model(p, data, config, VariantSpec::parse("i1"));
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = fixtures::random_point(model.dim(), rng, 0.7);
    const LatentState s = model.constrain(x);
    CHECK((model.unconstrain(s) - x).cwiseAbs().maxCoeff() < 1e-9);
    const int k = 4;
    double log_jac = from_unconstrained(x.head(11)).log_jacobian + k * std::numbers::ln2;
    Eigen::Index pos = 11 + 2 * k;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j, ++pos) {
        // Cholesky factor, plus det L from eta -> c = mu + L eta.
        if (i == j) log_jac += (k - i + 2) * x[pos];
      }
    }
    CHECK(model.log_density(x) == Approx(model.log_posterior(s) + log_jac).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradient matches central differences") {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  std::mt19937_64 rng(12);
  for (const Family f : {Family::kExponential, Family::kGamma, Family::kPoisson}) {
    const Dataset data = fixtures::moderate_dataset(f, 12, 13);
    for (const Channels ch : {Channels::kPcOnly, Channels::kPcRt, Channels::kPcAtt, Channels::kPcRtAtt}) {
      const PosteriorModel model(p, data, config, VariantSpec{ch, f});
      for (int i = 0; i < 20; ++i) {
        CHECK(fixtures::gradient_error(model, fixtures::random_point(model.dim(), rng)) <= 1e-4);
      }
    }
  }
}

TEST_CASE("gradient is finite where a value difference is exactly zero") {
  Eigen::MatrixXd perf(3, 2);
  perf << 1, 2, 1, 2, 0, 3;
  const Problem p("twins", {{"x", "x", Direction::kGain, 0, 3}, {"y", "y", Direction::kGain, 0, 3}},
                  {{"a", "a"}, {"b", "b"}, {"c", "c"}}, perf);
  PreferenceRecord r{{"a", "b"}, "a", 1.5, {{"x", 0.4}, {"y", 0.6}}, ""};
  const PosteriorModel model(p, Dataset{"twins", {r}}, PiecewiseConfig::uniform(2, 2), VariantSpec::parse("i2"));
  std::mt19937_64 rng(14);
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd g;
    // Moderate c keeps the density small enough for central differences.
    const Eigen::VectorXd x = fixtures::random_point(model.dim(), rng, 0.5);
    CHECK(std::isfinite(model.log_density_gradient(x, g)));
    CHECK(g.allFinite());
    CHECK(fixtures::gradient_error(model, x) <= 1e-4);
  }
}

TEST_CASE("prior-only gradient at the centered point") {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  const PosteriorModel model(p, Dataset{p.id(), {}}, config, VariantSpec::parse("i2"));
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.dim()));
  Eigen::VectorXd g;
  model.log_density_gradient(x, g);
  // eta = mu = 0, Sigma = I: Gaussian terms are stationary; for the Cholesky
  // block d/dl_ii = -(eps + k + 1) + Psi_ii + (k - i + 1) with eps = 4, k = 2.
  CHECK(g.segment(11, 4).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g[15] == Approx(-3.99).epsilon(1e-12));
  CHECK(g[16] == Approx(0.0));
  CHECK(g[17] == Approx(-4.99).epsilon(1e-12));
  CHECK(fixtures::gradient_error(model, x) <= 1e-6);
}

TEST_CASE("initial state starts on the data's time scale") {
  const Problem p = phone_contracts_problem();
  const auto config = PiecewiseConfig::uniform(6, 2);
  PreferenceRecord r;
  r.pair = {"a8", "a3"};
  r.choice = "a8";
  r.response_time_s = 3.5;
  r.attention_s = {{"g1", 1.2}, {"g2", 0.0}, {"g3", 0.3}, {"g4", 2.0}, {"g5", 0.5}, {"g6", 1.0}};
  const Dataset d{p.id(), {r}};
  // g2 is below the missing threshold and is skipped.
  const double rt_att_mean = (3.5 + 1.2 + 0.3 + 2.0 + 0.5 + 1.0) / 6.0;
  const LatentState e = PosteriorModel(p, d, config, VariantSpec::parse("i2")).initial_state();
  CHECK(e.c[0] == 0.0);
  CHECK(e.c[1] == Approx(-std::log(rt_att_mean)).epsilon(1e-12));
  CHECK(e.mu == e.c);
  const LatentState rt = PosteriorModel(p, d, config, VariantSpec::parse("ii1")).initial_state();
  CHECK(rt.c[1] == 0.0);
  CHECK(rt.c[3] == Approx(std::log(3.5)).epsilon(1e-12));
  const LatentState att = PosteriorModel(p, d, config, VariantSpec::parse("iii3")).initial_state();
  CHECK(att.c[1] == Approx(std::log((2.0 + 1.0 + 1.0 + 2.0 + 1.0) / 5.0)).epsilon(1e-12));
  const LatentState bor = PosteriorModel(p, d, config, VariantSpec::parse("bor")).initial_state();
  CHECK(bor.c.isZero());
  CHECK(on_simplex(bor.u));
}
