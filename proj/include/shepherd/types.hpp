#pragma once

// Instructions, observations and trajectories.

#include "shepherd/action.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace shepherd {

enum class Difficulty { Easy, Medium, Hard, Unknown };

std::string_view difficulty_name(Difficulty d) noexcept;
Difficulty parse_difficulty(std::string_view s) noexcept;

struct TaskSpec {
    std::string id;
    std::string intent;
    std::string start_url;
    Difficulty difficulty = Difficulty::Unknown;
    std::string website;
};

/// Screenshot passed through opaquely to model backends.
struct Screenshot {
    std::string path;
    std::string media_type = "image/png";

    friend bool operator==(const Screenshot&, const Screenshot&) = default;
};

struct Observation {
    std::string url;
    std::string axtree;
    std::optional<Screenshot> screenshot;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct Step {
    std::string thought;
    Action action;
    Observation observation_before;
};

struct Trajectory {
    TaskSpec task;
    std::vector<Step> steps;
};

inline constexpr std::size_t kDefaultHistoryCap = 30;
inline constexpr std::size_t kDefaultAxtreeChars = 40'000;
inline constexpr std::string_view kNoPriorActions = "(no prior actions)";
inline constexpr std::string_view kTruncatedSentinel = "[truncated]";

/// Renders steps [0, upto) as numbered THOUGHT/ACTION blocks. Only the most
/// recent `cap` steps are shown; older ones collapse into a count marker.
/// Throws std::out_of_range if upto > steps.size().
std::string render_trajectory(const Trajectory& t, std::size_t upto, std::size_t cap = kDefaultHistoryCap);

/// Cuts the accessibility tree at the last complete line that fits in
/// max_chars and appends "[truncated]". The sentinel is not counted against
/// the budget, which keeps the operation idempotent.
Observation truncate_axtree(const Observation& o, std::size_t max_chars = kDefaultAxtreeChars);

/// One JSONL record of a stored trajectory.
struct TrajectoryRecord {
    std::string task_id;
    std::size_t step_index = 0;
    std::string thought;
    std::string action;
    std::string url;
    std::string axtree;
    std::optional<std::string> screenshot_path;
};

}  // namespace shepherd
