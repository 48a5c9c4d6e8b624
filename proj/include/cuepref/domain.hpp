#pragma once

// Decision problems, elicited preference records and dominance filtering.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cuepref {

enum class Direction { kGain, kCost };

struct Criterion {
  std::string id;
  std::string name;
  Direction direction = Direction::kGain;
  double scale_min = 0.0;
  double scale_max = 1.0;

  bool operator==(const Criterion&) const = default;
};

struct Alternative {
  std::string id;
  std::string name;

  bool operator==(const Alternative&) const = default;
};

/// Alternatives evaluated on criteria. Immutable once constructed; the
/// constructor enforces every structural invariant and throws
/// ValidationError otherwise.
class Problem {
 public:
  Problem(std::string id, std::vector<Criterion> criteria,
          std::vector<Alternative> alternatives, Eigen::MatrixXd performances);

  const std::string& id() const { return id_; }
  const std::vector<Criterion>& criteria() const { return criteria_; }
  const std::vector<Alternative>& alternatives() const { return alternatives_; }
  const Eigen::MatrixXd& performances() const { return performances_; }
  double performance(std::size_t alt, std::size_t crit) const {
    return performances_(static_cast<Eigen::Index>(alt), static_cast<Eigen::Index>(crit));
  }

  std::size_t num_alternatives() const { return alternatives_.size(); }
  std::size_t num_criteria() const { return criteria_.size(); }

  /// Throws ValidationError for an unknown id.
  std::size_t alternative_index(std::string_view id) const;
  std::size_t criterion_index(std::string_view id) const;
  std::optional<std::size_t> find_alternative(std::string_view id) const;
  std::optional<std::size_t> find_criterion(std::string_view id) const;

  bool operator==(const Problem&) const;

 private:
  std::string id_;
  std::vector<Criterion> criteria_;
  std::vector<Alternative> alternatives_;
  Eigen::MatrixXd performances_;
};

/// One elicited triple: the comparison, its response time and the
/// per-criterion attention durations.
struct PreferenceRecord {
  std::pair<std::string, std::string> pair;
  std::string choice;
  double response_time_s = 0.0;
  std::map<std::string, double> attention_s;
  std::string recorded_at;

  /// The alternative that was not chosen.
  const std::string& rejected() const {
    return choice == pair.first ? pair.second : pair.first;
  }

  bool operator==(const PreferenceRecord&) const = default;
};

struct Dataset {
  std::string problem_ref;
  std::vector<PreferenceRecord> records;

  bool operator==(const Dataset&) const = default;
};

/// Attention durations below this floor count as never observed.
inline constexpr double kAttentionFloorSeconds = 0.001;

struct Violation {
  std::size_t record = 0;
  std::string field;
  std::string message;
};

/// True iff `a` is at least as good as `b` on every criterion and strictly
/// better on one. Directions are respected.
bool dominates(const Problem& problem, std::size_t a, std::size_t b);
bool dominates(const Problem& problem, std::string_view a, std::string_view b);

/// Index pair (i, j), i < j, in problem order.
using IndexPair = std::pair<std::size_t, std::size_t>;

/// Every unordered pair in which neither alternative dominates the other,
/// ordered lexicographically by position in the problem.
std::vector<IndexPair> candidate_pairs(const Problem& problem);

/// Empty iff every record is well formed and every id resolves.
std::vector<Violation> validate_dataset(const Dataset& dataset, const Problem& problem);

}  // namespace cuepref
