#pragma once

// File formats: problem JSON, preference-log JSON lines, CSV inspection export.

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cuepref/domain.hpp"

namespace cuepref {

using Json = nlohmann::json;

/// Problem JSON: {id?, criteria:[{id,name,direction,min?,max?}],
/// alternatives:[{id,name}], performances:[[...]]}. Missing scale bounds
/// default to the observed per-criterion range.
Problem problem_from_json(const Json& j);
Json problem_to_json(const Problem& problem);
Problem read_problem(const std::filesystem::path& path);
void write_problem(const Problem& problem, const std::filesystem::path& path);

PreferenceRecord record_from_json(const Json& j);
Json record_to_json(const PreferenceRecord& record);

/// One PreferenceRecord per line; blank lines are skipped.
Dataset read_dataset(std::istream& in, std::string problem_ref = {});
Dataset read_dataset(const std::filesystem::path& path, std::string problem_ref = {});
void write_dataset(const Dataset& dataset, std::ostream& out);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Human-readable export: Index, Pairwise comparison, Response time,
/// Attention duration (one tuple in criterion order).
void write_dataset_csv(const Dataset& dataset, const Problem& problem, std::ostream& out);

/// The ten-contract mobile phone fixture bundled with the project.
Problem phone_contracts_problem();

/// RFC3339 UTC timestamp for seconds since the Unix epoch.
std::string format_rfc3339(double epoch_seconds);

}  // namespace cuepref
