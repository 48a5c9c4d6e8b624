#include <doctest.h>

#include <random>
#include <sstream>

#include "cuepref/domain.hpp"
#include "cuepref/error.hpp"
#include "cuepref/io.hpp"

using namespace cuepref;

namespace {

Problem gain_problem(const Eigen::MatrixXd& perf) {
  std::vector<Criterion> crit;
  for (Eigen::Index m = 0; m < perf.cols(); ++m) {
    crit.push_back({"g" + std::to_string(m + 1), "c", Direction::kGain, -100, 100});
  }
  std::vector<Alternative> alts;
  for (Eigen::Index n = 0; n < perf.rows(); ++n) alts.push_back({"a" + std::to_string(n + 1), "a"});
  return Problem("p", crit, alts, perf);
}

// Independent dominance check on a gain-reflected copy of the matrix.
bool oracle_dominates(const Problem& p, std::size_t a, std::size_t b) {
  bool strict = false;
  for (std::size_t m = 0; m < p.num_criteria(); ++m) {
    const double sign = p.criteria()[m].direction == Direction::kGain ? 1.0 : -1.0;
    const double ga = sign * p.performance(a, m);
    const double gb = sign * p.performance(b, m);
    if (ga < gb) return false;
    if (ga > gb) strict = true;
  }
  return strict;
}

PreferenceRecord good_record() {
  PreferenceRecord r;
  r.pair = {"a8", "a3"};
  r.choice = "a8";
  r.response_time_s = 26.001;
  r.attention_s = {{"g1", 3.511}, {"g2", 4.2}, {"g3", 0.0}, {"g4", 1.0}, {"g5", 2.5}, {"g6", 0.7}};
  r.recorded_at = "2024-05-01T10:00:00.000Z";
  return r;
}

}  // namespace

TEST_CASE("dominance on two gain criteria") {
  Eigen::MatrixXd perf(2, 2);
  perf << 2, 2, 1, 1;
  const Problem p = gain_problem(perf);
  CHECK(dominates(p, "a1", "a2"));
  CHECK_FALSE(dominates(p, "a2", "a1"));
}

TEST_CASE("identical performances do not dominate") {
  Eigen::MatrixXd perf(2, 2);
  perf << 1, 1, 1, 1;
  const Problem p = gain_problem(perf);
  CHECK_FALSE(dominates(p, "a1", "a2"));
  CHECK_FALSE(dominates(p, "a2", "a1"));
}

TEST_CASE("phone contracts: a4 does not dominate a3 because of the monthly fee") {
  const Problem p = phone_contracts_problem();
  CHECK_FALSE(dominates(p, "a4", "a3"));
  CHECK_FALSE(dominates(p, "a3", "a4"));
}

TEST_CASE("dominates rejects unknown ids") {
  const Problem p = phone_contracts_problem();
  CHECK_THROWS_AS(dominates(p, "a1", "zz"), ValidationError);
}

TEST_CASE("candidate pairs") {
  SUBCASE("one alternative dominates the other") {
    Eigen::MatrixXd perf(2, 2);
    perf << 2, 2, 1, 1;
    CHECK(candidate_pairs(gain_problem(perf)).empty());
  }
  SUBCASE("three mutually non-dominated alternatives") {
    Eigen::MatrixXd perf(3, 2);
    perf << 1, 3, 2, 2, 3, 1;
    CHECK(candidate_pairs(gain_problem(perf)).size() == 3);
  }
  SUBCASE("phone contracts match a brute-force scan") {
    const Problem p = phone_contracts_problem();
    std::size_t expected = 0;
    for (std::size_t a = 0; a < 10; ++a) {
      for (std::size_t b = a + 1; b < 10; ++b) {
        if (!oracle_dominates(p, a, b) && !oracle_dominates(p, b, a)) ++expected;
      }
    }
    const auto pairs = candidate_pairs(p);
    CHECK(pairs.size() == expected);
    CHECK(pairs.size() == 45);
    for (const auto& [a, b] : pairs) {
      CHECK(a < b);
      CHECK_FALSE(dominates(p, a, b));
      CHECK_FALSE(dominates(p, b, a));
    }
  }
}

TEST_CASE("dominance is irreflexive, antisymmetric and transitive on random problems") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd perf(6, 3);
    for (Eigen::Index i = 0; i < perf.size(); ++i) perf(i) = level(rng);
    const Problem p = gain_problem(perf);
    for (std::size_t a = 0; a < 6; ++a) {
      CHECK_FALSE(dominates(p, a, a));
      for (std::size_t b = 0; b < 6; ++b) {
        CHECK(dominates(p, a, b) == oracle_dominates(p, a, b));
        if (dominates(p, a, b)) CHECK_FALSE(dominates(p, b, a));
        for (std::size_t c = 0; c < 6; ++c) {
          if (dominates(p, a, b) && dominates(p, b, c)) CHECK(dominates(p, a, c));
        }
      }
    }
  }
}

TEST_CASE("problem invariants are enforced") {
  Eigen::MatrixXd perf(2, 1);
  perf << 0.5, 2.0;
  std::vector<Alternative> alts = {{"a", "a"}, {"b", "b"}};
  CHECK_THROWS_AS(Problem("p", {{"g", "g", Direction::kGain, 0, 1}}, alts, perf), ValidationError);
  CHECK_THROWS_AS(Problem("p", {{"g", "g", Direction::kGain, 1, 1}}, alts, Eigen::MatrixXd::Ones(2, 1)),
                  ValidationError);
  CHECK_THROWS_AS(Problem("p", {{"g", "g", Direction::kGain, 0, 1}}, {{"a", "a"}}, Eigen::MatrixXd::Zero(1, 1)),
                  ValidationError);
  CHECK_THROWS_AS(Problem("p", {{"g", "g", Direction::kGain, 0, 3}}, {{"a", "a"}, {"a", "b"}}, perf),
                  ValidationError);
}

TEST_CASE("validate_dataset") {
  const Problem p = phone_contracts_problem();
  SUBCASE("a well-formed log has no violations") {
    Dataset d{"phone_contracts", {good_record(), good_record()}};
    CHECK(validate_dataset(d, p).empty());
  }
  SUBCASE("negative response time") {
    auto r = good_record();
    r.response_time_s = -1;
    const auto v = validate_dataset(Dataset{"p", {r}}, p);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "response_time_s");
    CHECK(v[0].record == 0);
  }
  SUBCASE("missing attention entry") {
    auto r = good_record();
    r.attention_s.erase("g4");
    const auto v = validate_dataset(Dataset{"p", {good_record(), r}}, p);
    REQUIRE(v.size() == 1);
    CHECK(v[0].field == "attention_s.g4");
    CHECK(v[0].record == 1);
  }
  SUBCASE("choice outside the pair and unknown ids") {
    auto r = good_record();
    r.choice = "a1";
    r.pair.second = "zz";
    const auto v = validate_dataset(Dataset{"p", {r}}, p);
    CHECK(v.size() == 2);
  }
}

TEST_CASE("problem JSON round trip and defaults") {
  const Problem p = phone_contracts_problem();
  CHECK(problem_from_json(problem_to_json(p)) == p);

  const Json j = Json::parse(R"({
    "id": "tiny",
    "criteria": [{"id": "x", "name": "X", "direction": "gain"},
                 {"id": "y", "name": "Y", "direction": "cost", "min": 0, "max": 10}],
    "alternatives": [{"id": "a", "name": "A"}, {"id": "b", "name": "B"}],
    "performances": [[1, 2], [3, 4]]})");
  const Problem t = problem_from_json(j);
  CHECK(t.criteria()[0].scale_min == 1.0);
  CHECK(t.criteria()[0].scale_max == 3.0);
  CHECK(t.criteria()[1].scale_max == 10.0);
  CHECK(t.criteria()[1].direction == Direction::kCost);
}

TEST_CASE("dataset JSON-lines round trip") {
  Dataset d{"phone_contracts", {good_record()}};
  auto r2 = good_record();
  r2.choice = "a3";
  r2.response_time_s = 1.0 / 3.0;
  d.records.push_back(r2);
  std::stringstream ss;
  write_dataset(d, ss);
  CHECK(read_dataset(ss, "phone_contracts") == d);
}

TEST_CASE("malformed records are validation errors") {
  std::stringstream ss("{\"pair\": [\"a1\"], \"choice\": \"a1\"}\n");
  CHECK_THROWS_AS(read_dataset(ss), ValidationError);
}

TEST_CASE("CSV export layout") {
  const Problem p = phone_contracts_problem();
  std::stringstream ss;
  write_dataset_csv(Dataset{"p", {good_record()}}, p, ss);
  std::string header;
  std::string row;
  std::getline(ss, header);
  std::getline(ss, row);
  CHECK(header == "Index,Pairwise comparison,Response time,Attention duration");
  CHECK(row == "I_1,a8 > a3,26.001,\"(3.511, 4.200, 0.000, 1.000, 2.500, 0.700)\"");
}
