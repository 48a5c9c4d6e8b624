#include "cuepref/io.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cuepref/error.hpp"

namespace cuepref {

namespace {

Direction parse_direction(const std::string& s) {
  if (s == "gain") return Direction::kGain;
  if (s == "cost") return Direction::kCost;
  throw ValidationError("criterion direction must be \"gain\" or \"cost\", got \"" + s + "\"");
}

const char* direction_name(Direction d) { return d == Direction::kGain ? "gain" : "cost"; }

std::string format_number(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << x;
  return os.str();
}

}  // namespace

Problem problem_from_json(const Json& j) {
  try {
    const auto& jc = j.at("criteria");
    const auto& ja = j.at("alternatives");
    const auto& jp = j.at("performances");
    const auto n = ja.size();
    const auto m = jc.size();
    Eigen::MatrixXd perf(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    if (jp.size() != n) throw ValidationError("performances must have one row per alternative");
    for (std::size_t r = 0; r < n; ++r) {
      if (jp[r].size() != m) throw ValidationError("performance row " + std::to_string(r) +
                                                   " must have one entry per criterion");
      for (std::size_t c = 0; c < m; ++c) {
        perf(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = jp[r][c].get<double>();
      }
    }
    std::vector<Criterion> criteria;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& e = jc[c];
      Criterion crit;
      crit.id = e.at("id").get<std::string>();
      crit.name = e.value("name", crit.id);
      crit.direction = parse_direction(e.value("direction", std::string("gain")));
      const auto col = perf.col(static_cast<Eigen::Index>(c));
      crit.scale_min = e.contains("min") ? e["min"].get<double>() : (n ? col.minCoeff() : 0.0);
      crit.scale_max = e.contains("max") ? e["max"].get<double>() : (n ? col.maxCoeff() : 0.0);
      criteria.push_back(std::move(crit));
    }
    std::vector<Alternative> alternatives;
    for (const auto& e : ja) {
      Alternative a;
      a.id = e.at("id").get<std::string>();
      a.name = e.value("name", a.id);
      alternatives.push_back(std::move(a));
    }
    return Problem(j.value("id", std::string("problem")), std::move(criteria),
                   std::move(alternatives), std::move(perf));
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed problem JSON: ") + e.what());
  }
}

Json problem_to_json(const Problem& problem) {
  Json j;
  j["id"] = problem.id();
  j["criteria"] = Json::array();
  for (const auto& c : problem.criteria()) {
    j["criteria"].push_back({{"id", c.id},
                             {"name", c.name},
                             {"direction", direction_name(c.direction)},
                             {"min", c.scale_min},
                             {"max", c.scale_max}});
  }
  j["alternatives"] = Json::array();
  for (const auto& a : problem.alternatives()) {
    j["alternatives"].push_back({{"id", a.id}, {"name", a.name}});
  }
  j["performances"] = Json::array();
  for (std::size_t n = 0; n < problem.num_alternatives(); ++n) {
    Json row = Json::array();
    for (std::size_t m = 0; m < problem.num_criteria(); ++m) row.push_back(problem.performance(n, m));
    j["performances"].push_back(std::move(row));
  }
  return j;
}

Problem read_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open problem file " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ValidationError("problem file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("id")) j["id"] = path.stem().string();
  return problem_from_json(j);
}

void write_problem(const Problem& problem, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << problem_to_json(problem).dump(2) << "\n";
}

PreferenceRecord record_from_json(const Json& j) {
  try {
    PreferenceRecord r;
    const auto& p = j.at("pair");
    if (!p.is_array() || p.size() != 2) throw ValidationError("pair must be a 2-element array");
    r.pair = {p[0].get<std::string>(), p[1].get<std::string>()};
    r.choice = j.at("choice").get<std::string>();
    r.response_time_s = j.at("response_time_s").get<double>();
    for (const auto& [key, value] : j.at("attention_s").items()) {
      r.attention_s[key] = value.get<double>();
    }
    r.recorded_at = j.value("recorded_at", std::string());
    return r;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed preference record: ") + e.what());
  }
}

Json record_to_json(const PreferenceRecord& record) {
  Json att = Json::object();
  for (const auto& [key, value] : record.attention_s) att[key] = value;
  return Json{{"pair", {record.pair.first, record.pair.second}},
              {"choice", record.choice},
              {"response_time_s", record.response_time_s},
              {"attention_s", std::move(att)},
              {"recorded_at", record.recorded_at}};
}

Dataset read_dataset(std::istream& in, std::string problem_ref) {
  Dataset d;
  d.problem_ref = std::move(problem_ref);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    d.records.push_back(record_from_json(j));
  }
  return d;
}

Dataset read_dataset(const std::filesystem::path& path, std::string problem_ref) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open preference log " + path.string());
  return read_dataset(in, std::move(problem_ref));
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& r : dataset.records) out << record_to_json(r).dump() << "\n";
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_dataset(dataset, out);
}

void write_dataset_csv(const Dataset& dataset, const Problem& problem, std::ostream& out) {
  out << "Index,Pairwise comparison,Response time,Attention duration\n";
  for (std::size_t r = 0; r < dataset.records.size(); ++r) {
    const auto& rec = dataset.records[r];
    out << "I_" << (r + 1) << "," << rec.choice << " > " << rec.rejected() << ","
        << format_number(rec.response_time_s) << ",\"(";
    for (std::size_t m = 0; m < problem.num_criteria(); ++m) {
      auto it = rec.attention_s.find(problem.criteria()[m].id);
      if (m) out << ", ";
      out << (it == rec.attention_s.end() ? std::string("NA") : format_number(it->second));
    }
    out << ")\"\n";
  }
}

Problem phone_contracts_problem() {
  std::vector<Criterion> criteria = {
      {"g1", "Domestic calls (min.)", Direction::kGain, 0, 1000},
      {"g2", "Domestic data (GB)", Direction::kGain, 3, 60},
      {"g3", "Overage call fee (RMB/min.)", Direction::kCost, 0.1, 0.25},
      {"g4", "Overage data fee (RMB/GB)", Direction::kCost, 3, 10},
      {"g5", "Monthly fee", Direction::kCost, 29, 199},
      {"g6", "Initial deposit", Direction::kCost, 0, 200},
  };
  std::vector<Alternative> alternatives;
  for (int i = 1; i <= 10; ++i) {
    alternatives.push_back({"a" + std::to_string(i), "Contract a" + std::to_string(i)});
  }
  Eigen::MatrixXd perf(10, 6);
  perf << 150, 15, 0.19, 3, 79, 100,
          50, 3, 0.25, 10, 29, 200,
          700, 40, 0.13, 3, 169, 0,
          1000, 60, 0.10, 3, 199, 0,
          500, 30, 0.16, 3, 129, 0,
          50, 5, 0.23, 10, 39, 150,
          100, 10, 0.21, 5, 59, 100,
          0, 15, 0.23, 5, 39, 200,
          200, 20, 0.18, 5, 99, 200,
          300, 20, 0.15, 3, 119, 0;
  return Problem("phone_contracts", std::move(criteria), std::move(alternatives), std::move(perf));
}

std::string format_rfc3339(double epoch_seconds) {
  const auto whole = static_cast<std::time_t>(std::floor(epoch_seconds));
  const int millis = static_cast<int>(std::lround((epoch_seconds - std::floor(epoch_seconds)) * 1000.0));
  std::tm tm{};
  gmtime_r(&whole, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::ostringstream os;
  os << buf << "." << std::setw(3) << std::setfill('0') << std::min(millis, 999) << "Z";
  return os.str();
}

}  // namespace cuepref
