#pragma once

// Reward-guided best-of-n search: sample the policy, keep the most frequent
// actions, score them, execute the best one, and optionally ask the policy
// to revise when the reward drops. TraceEnv replays a recorded state graph
// in place of a live website.

#include "shepherd/backend.hpp"
#include "shepherd/io.hpp"
#include "shepherd/scorer.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <set>

namespace shepherd {

struct SearchConfig {
    int n_policy_samples = 20;
    double policy_temperature = 1.0;
    double policy_top_p = 0.95;
    int top_n_candidates = 5;
    bool refine = false;
    int max_refinements = 2;
    int max_steps = 30;
    std::size_t history_cap = kDefaultHistoryCap;
    std::size_t axtree_chars = kDefaultAxtreeChars;
    std::uint64_t seed = 0;

    /// Throws ConfigError when the fields contradict each other.
    void validate() const;
};

struct Candidate {
    Action action;
    int frequency = 0;
    std::string thought;
    std::optional<RewardScore> reward;
    std::string feedback;  // judge feedback used for refinement
};

struct CandidateSet {
    std::vector<Candidate> entries;
    int samples_drawn = 0;
    int samples_parsed = 0;

    /// Orders entries by reward desc, frequency desc, action key asc
    /// (unscored entries last).
    void sort();
};

/// Policy prompt for the current observation.
Prompt build_policy_prompt(const TaskSpec& task, const Trajectory& history, const Observation& obs,
                           const SearchConfig& cfg);

/// Draws cfg.n_policy_samples completions and keeps the top_n most frequent
/// actions (ties by key). Unparseable samples are dropped. Throws NoCandidates.
CandidateSet collect_candidates(ModelBackend& policy, const Prompt& prompt, const SearchConfig& cfg,
                                std::uint64_t seed);

/// Index of the entry to execute: highest reward, then higher frequency, then
/// smaller action key. Throws MissingReward if any entry is unscored and
/// NoCandidates if the set is empty.
std::size_t select_index(const CandidateSet& cs);
Action select_action(const CandidateSet& cs);

struct Attempt {
    std::string thought;
    Action action;
    RewardScore reward;
    std::string feedback;
};

/// Context needed to prompt the policy for a revision and to score it.
struct RefineContext {
    TaskSpec task;
    Trajectory history;
    Observation observation;
    std::function<Attempt(const std::string& thought, const Action& action)> score;
    std::uint64_t seed = 0;
};

Prompt build_refinement_prompt(const RefineContext& ctx, const Attempt& draft, const SearchConfig& cfg);

/// Returns every scored attempt, the current one first. Refinement only runs
/// when a previous reward exists and the current reward is below it; it
/// repeats while the newest reward beats the one before, at most
/// cfg.max_refinements times. A revision that does not parse ends the loop.
std::vector<Attempt> refine_step(std::optional<double> prev_reward, Attempt current, ModelBackend& policy,
                                 const RefineContext& ctx, const SearchConfig& cfg);

/// Highest reward; the earliest attempt wins ties.
std::size_t best_attempt(const std::vector<Attempt>& attempts);

struct TraceTask {
    TaskSpec task;
    std::vector<std::string> expert;  // action keys along the recorded path
    std::optional<Checklist> checklist;
    std::string initial;
    std::set<std::string> terminal_success;
    std::set<std::string> terminal_failure;
};

struct StepResult {
    Observation observation;
    bool done = false;
    bool success = false;
    bool changed = true;  // false when the action had no recorded transition
};

inline constexpr std::string_view kNoChangeNote =
    "[note] The previous action had no effect: no recorded transition matches it, so the page did not change.";

/// Recorded state graph. JSON layout:
///   {"initial": "s0",
///    "states": {"s0": {"url": ..., "axtree": ...}, ...},
///    "edges": [{"from": "s0", "action": "click('12')", "to": "s1"}, ...],
///    "terminal_success": ["s9"], "terminal_failure": [...],
///    "tasks": [{"id", "intent", "start_url", "expert": [...], "checklist"?,
///               "initial"?, "terminal_success"?, "terminal_failure"?}]}
/// Edge actions are normalized through the action parser, so any spelling of
/// the same action matches.
class TraceEnv {
public:
    static TraceEnv from_json(const Json& j);
    static TraceEnv from_file(const std::filesystem::path& path);

    const TraceTask& task(const std::string& id) const;  // throws ConfigError for unknown ids
    std::vector<std::string> task_ids() const;

    Observation reset(const std::string& task_id);
    StepResult step(const Action& action);

    const std::string& state() const { return state_; }
    /// Target of the edge (state, action key), if recorded.
    std::optional<std::string> transition(const std::string& state, const std::string& key) const;
    Observation observation_of(const std::string& state) const;

private:
    std::map<std::string, Observation> states_;
    std::map<std::pair<std::string, std::string>, std::string> edges_;
    std::vector<TraceTask> tasks_;
    const TraceTask* active_ = nullptr;
    std::string state_;
    bool annotate_ = false;
};

enum class EpisodeStatus { Running, Success, Failure, Budget };
std::string_view episode_status_name(EpisodeStatus s) noexcept;

struct EpisodeStep {
    std::size_t index = 0;
    std::string state_before;
    std::string state_after;
    Observation observation;
    CandidateSet candidates;
    std::vector<Attempt> attempts;  // refinement chain; attempts[0] is the BoN pick
    std::string thought;
    Action executed;
    RewardScore reward;
};

struct SearchEpisode {
    TaskSpec task;
    std::optional<Checklist> checklist;
    std::vector<EpisodeStep> steps;
    EpisodeStatus status = EpisodeStatus::Running;
};

/// A failure inside run_episode, carrying the steps completed so far.
class EpisodeError : public Error {
public:
    EpisodeError(std::string stage, std::string cause_type, const std::string& what, SearchEpisode partial)
        : Error(what), stage_(std::move(stage)), cause_(std::move(cause_type)), partial_(std::move(partial)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& cause_type() const noexcept { return cause_; }
    const SearchEpisode& partial() const noexcept { return partial_; }

private:
    std::string stage_;
    std::string cause_;
    SearchEpisode partial_;
};

/// observe -> sample -> score -> (refine) -> select -> step, until the trace
/// reaches a terminal state or max_steps is used up.
SearchEpisode run_episode(TraceEnv& env, const std::string& task_id, ModelBackend& policy, RewardModel& reward_model,
                          const SearchConfig& cfg);

/// r_T minus the mean of the earlier step rewards (r_1 for one step).
/// Throws EmptyEpisode.
double normalized_final_reward(const SearchEpisode& e);

/// One JSON line per step followed by a summary line.
std::string episode_to_jsonl(const SearchEpisode& e);

/// Rows "normalized_step,mean_reward,success" averaged over episodes, with
/// steps bucketed into `bins` equal slices of each episode's length.
std::string reward_trend_csv(const std::vector<SearchEpisode>& episodes, int bins = 10);

}  // namespace shepherd
