#pragma once

// JSON encodings of the core records, plus file helpers. Field names follow
// the struct members.

#include "shepherd/backend.hpp"
#include "shepherd/checklist.hpp"
#include "shepherd/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace shepherd {

using Json = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_text_file(const std::filesystem::path& path, std::string_view content);
void append_line(const std::filesystem::path& path, std::string_view line);

/// Parses JSON text; throws ParseError naming `what` on failure.
Json parse_json(std::string_view text, std::string_view what);

/// Calls fn(json, line_number) for every non-blank line. Throws ParseError
/// with the line number on malformed JSON.
void for_each_jsonl(std::string_view text, const std::function<void(const Json&, std::size_t)>& fn);

Json to_json(const TaskSpec& t);
TaskSpec task_from_json(const Json& j);

Json to_json(const Observation& o);
Observation observation_from_json(const Json& j);

Json to_json(const Checklist& c);
/// Accepts [{"title":..,"goal_desc":..}], {"items":[...]} or a checklist text string.
Checklist checklist_from_json(const Json& j, ChecklistSource source = ChecklistSource::Reference);

Json to_json(const Step& s);
Step step_from_json(const Json& j);

Json to_json(const Completion& c);
Completion completion_from_json(const Json& j);

Json to_json(const TrajectoryRecord& r);
TrajectoryRecord trajectory_record_from_json(const Json& j);

/// Action stored as its serialized string; throws ParseError if it does not parse.
Action action_from_json(const Json& j);

/// Fixed-precision number formatting used in every report so output files
/// are byte-stable.
std::string format_metric(double v);

}  // namespace shepherd
