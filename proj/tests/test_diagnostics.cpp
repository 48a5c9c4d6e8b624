#include <doctest.h>

#include <cmath>
#include <random>

#include "cuepref/diagnostics.hpp"
#include "cuepref/error.hpp"

using namespace cuepref;
using doctest::Approx;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> x(n);
  double state = normal(rng) / std::sqrt(1 - phi * phi);
  for (auto& v : x) {
    state = phi * state + normal(rng);
    v = state + shift;
  }
  return x;
}

}  // namespace

TEST_CASE("R-hat on a hand-computed example") {
  // B = 2, W = 5/3, pooled = 3/4 W + B/4 = 1.75.
  CHECK(rhat({{1, 2, 3, 4}, {2, 3, 4, 5}}) == Approx(std::sqrt(1.05)).epsilon(1e-12));
  CHECK(rhat({{1, 2, 3, 4}, {1, 2, 3, 4}}) == Approx(std::sqrt(0.75)).epsilon(1e-12));
}

TEST_CASE("R-hat behaviour") {
  CHECK(rhat({{2, 2, 2, 2}, {2, 2, 2, 2}}) == 1.0);
  CHECK_THROWS_AS(rhat({{1, 2, 3, 4}}), ValidationError);
  CHECK_THROWS_AS(rhat({{1, 2, 3}, {1, 2, 3}}), ValidationError);
  CHECK_THROWS_AS(rhat({{1, 2, 3, 4}, {1, 2, 3, 4, 5}}), ValidationError);
  const double noise = rhat({ar1(0.0, 10000, 1), ar1(0.0, 10000, 2), ar1(0.0, 10000, 3)});
  CHECK(std::abs(noise - 1.0) < 0.01);
  const double shifted = rhat({ar1(0.0, 10000, 1), ar1(0.0, 10000, 2, 10.0)});
  CHECK(shifted > 5.0);
}

TEST_CASE("autocorrelation") {
  const std::vector<double> x = {1, 2, 3, 4};
  const auto acf = autocorrelation(x, 2);
  CHECK(acf[0] == 1.0);
  CHECK(acf[1] == Approx(0.25).epsilon(1e-12));
  CHECK(acf[2] == Approx(-0.3).epsilon(1e-12));
  const std::vector<double> flat = {3, 3, 3};
  CHECK(autocorrelation(flat, 2) == std::vector<double>{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(autocorrelation(x, 4), ValidationError);
  const auto white = ar1(0.0, 10000, 4);
  CHECK(autocorrelation(white, 1)[0] == 1.0);
  CHECK(std::abs(autocorrelation(white, 1)[1]) < 0.03);
  const auto a = ar1(0.9, 10000, 5);
  CHECK(std::abs(autocorrelation(a, 1)[1] - 0.9) < 0.02);
}

TEST_CASE("effective sample size") {
  SUBCASE("independent draws") {
    const auto x = ar1(0.0, 20000, 7);
    CHECK(ess(x) == Approx(20000).epsilon(0.1));
  }
  SUBCASE("AR(1) matches n (1 - phi) / (1 + phi)") {
    for (double phi : {0.5, 0.9}) {
      const auto x = ar1(phi, 100000, 8);
      CHECK(ess(x) == Approx(100000 * (1 - phi) / (1 + phi)).epsilon(0.15));
    }
  }
  SUBCASE("chains add up") {
    const auto a = ar1(0.5, 4000, 9);
    const auto b = ar1(0.5, 4000, 10);
    CHECK(ess({a, b}) == Approx(ess(a) + ess(b)));
  }
  SUBCASE("antithetic draws stay bounded") {
    std::vector<double> x(1000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = i % 2 ? 1.0 : -1.0;
    CHECK(std::isfinite(ess(x)));
    CHECK(ess(x) <= 1000 * std::log10(1010.0) + 1e-9);
  }
}

TEST_CASE("diagnose summarizes u entries") {
  SampleSet s;
  s.gamma = 2;
  s.accept_rates = {0.8, 0.85};
  s.divergences = {0, 1};
  for (int c = 0; c < 2; ++c) {
    const auto a = ar1(0.3, 400, 20 + c);
    std::vector<LatentState> chain;
    for (double v : a) {
      LatentState st;
      const double p = 1.0 / (1.0 + std::exp(-v));
      st.u = Eigen::Vector2d(p, 1 - p);
      chain.push_back(st);
    }
    s.draws.push_back(chain);
  }
  const FitDiagnostics d = diagnose(s);
  REQUIRE(d.rhat_u.size() == 2);
  CHECK(d.rhat_u[0] == Approx(d.rhat_u[1]).epsilon(1e-9));
  CHECK(d.max_rhat < 1.1);
  CHECK(d.converged());
  CHECK(d.min_ess > 100);
  const auto j = d.to_json();
  CHECK(j["divergences"][1] == 1);
  CHECK(j.contains("max_rhat"));
}
