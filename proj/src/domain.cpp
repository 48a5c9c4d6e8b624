#include "cuepref/domain.hpp"

#include <cmath>
#include <set>

#include "cuepref/error.hpp"

namespace cuepref {

Problem::Problem(std::string id, std::vector<Criterion> criteria,
                 std::vector<Alternative> alternatives, Eigen::MatrixXd performances)
    : id_(std::move(id)),
      criteria_(std::move(criteria)),
      alternatives_(std::move(alternatives)),
      performances_(std::move(performances)) {
  if (alternatives_.size() < 2) throw ValidationError("problem needs at least 2 alternatives");
  if (criteria_.empty()) throw ValidationError("problem needs at least 1 criterion");
  if (static_cast<std::size_t>(performances_.rows()) != alternatives_.size() ||
      static_cast<std::size_t>(performances_.cols()) != criteria_.size()) {
    throw ValidationError("performance matrix must be " + std::to_string(alternatives_.size()) +
                          "x" + std::to_string(criteria_.size()));
  }
  std::set<std::string> seen;
  for (const auto& c : criteria_) {
    if (c.id.empty()) throw ValidationError("criterion with empty id");
    if (!seen.insert(c.id).second) throw ValidationError("duplicate criterion id '" + c.id + "'");
    if (!(c.scale_min < c.scale_max)) {
      throw ValidationError("criterion '" + c.id + "': scale min must be below max");
    }
  }
  seen.clear();
  for (const auto& a : alternatives_) {
    if (a.id.empty()) throw ValidationError("alternative with empty id");
    if (!seen.insert(a.id).second) throw ValidationError("duplicate alternative id '" + a.id + "'");
  }
  for (std::size_t n = 0; n < alternatives_.size(); ++n) {
    for (std::size_t m = 0; m < criteria_.size(); ++m) {
      const double g = performance(n, m);
      const auto& c = criteria_[m];
      if (!std::isfinite(g) || g < c.scale_min || g > c.scale_max) {
        throw ValidationError("performance of '" + alternatives_[n].id + "' on '" + c.id +
                              "' lies outside the criterion scale");
      }
    }
  }
}

std::optional<std::size_t> Problem::find_alternative(std::string_view id) const {
  for (std::size_t i = 0; i < alternatives_.size(); ++i) {
    if (alternatives_[i].id == id) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Problem::find_criterion(std::string_view id) const {
  for (std::size_t i = 0; i < criteria_.size(); ++i) {
    if (criteria_[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t Problem::alternative_index(std::string_view id) const {
  if (auto i = find_alternative(id)) return *i;
  throw ValidationError("unknown alternative '" + std::string(id) + "'");
}

std::size_t Problem::criterion_index(std::string_view id) const {
  if (auto i = find_criterion(id)) return *i;
  throw ValidationError("unknown criterion '" + std::string(id) + "'");
}

bool Problem::operator==(const Problem& other) const {
  return id_ == other.id_ && criteria_ == other.criteria_ &&
         alternatives_ == other.alternatives_ && performances_ == other.performances_;
}

bool dominates(const Problem& problem, std::size_t a, std::size_t b) {
  if (a >= problem.num_alternatives() || b >= problem.num_alternatives()) {
    throw ValidationError("alternative index out of range");
  }
  bool strictly_better = false;
  for (std::size_t m = 0; m < problem.num_criteria(); ++m) {
    double diff = problem.performance(a, m) - problem.performance(b, m);
    if (problem.criteria()[m].direction == Direction::kCost) diff = -diff;
    if (diff < 0) return false;
    if (diff > 0) strictly_better = true;
  }
  return strictly_better;
}

bool dominates(const Problem& problem, std::string_view a, std::string_view b) {
  return dominates(problem, problem.alternative_index(a), problem.alternative_index(b));
}

std::vector<IndexPair> candidate_pairs(const Problem& problem) {
  std::vector<IndexPair> out;
  const std::size_t n = problem.num_alternatives();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!dominates(problem, i, j) && !dominates(problem, j, i)) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<Violation> validate_dataset(const Dataset& dataset, const Problem& problem) {
  std::vector<Violation> out;
  auto flag = [&out](std::size_t r, std::string field, std::string message) {
    out.push_back({r, std::move(field), std::move(message)});
  };
  for (std::size_t r = 0; r < dataset.records.size(); ++r) {
    const auto& rec = dataset.records[r];
    const bool first_ok = problem.find_alternative(rec.pair.first).has_value();
    const bool second_ok = problem.find_alternative(rec.pair.second).has_value();
    if (!first_ok) flag(r, "pair", "unknown alternative '" + rec.pair.first + "'");
    if (!second_ok) flag(r, "pair", "unknown alternative '" + rec.pair.second + "'");
    if (rec.pair.first == rec.pair.second) flag(r, "pair", "pair members must differ");
    if (rec.choice != rec.pair.first && rec.choice != rec.pair.second) {
      flag(r, "choice", "choice '" + rec.choice + "' is not a member of the pair");
    }
    if (!std::isfinite(rec.response_time_s) || rec.response_time_s <= 0.0) {
      flag(r, "response_time_s", "response time must be a positive number of seconds");
    }
    for (const auto& c : problem.criteria()) {
      auto it = rec.attention_s.find(c.id);
      if (it == rec.attention_s.end()) {
        flag(r, "attention_s." + c.id, "missing attention entry");
      } else if (!std::isfinite(it->second) || it->second < 0.0) {
        flag(r, "attention_s." + c.id, "attention duration must be non-negative");
      }
    }
    for (const auto& [key, value] : rec.attention_s) {
      (void)value;
      if (!problem.find_criterion(key)) flag(r, "attention_s." + key, "unknown criterion");
    }
  }
  return out;
}

}  // namespace cuepref
