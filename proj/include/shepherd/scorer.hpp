#pragma once

// Scores one (observation, action) pair with a judge backend under one of the
// benchmark modes: Likert without a checklist, or checklist scoring against a
// reference or a generated checklist.

#include "shepherd/backend.hpp"
#include "shepherd/checklist.hpp"
#include "shepherd/reward.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace shepherd {

enum class RewardMode { Likert, ReferenceChecklist, GeneratedChecklist };

std::string_view reward_mode_name(RewardMode m) noexcept;
/// Accepts likert | reference | generated. Throws ConfigError.
RewardMode parse_reward_mode(std::string_view s);

struct RewardModelConfig {
    RewardMode mode = RewardMode::ReferenceChecklist;
    ChecklistStyle style = ChecklistStyle::Shepherd;  // judge and checklist prompt family
    ScoringStrategy strategy;
    VerbalizerTable verbalizer = VerbalizerTable::defaults();
    std::size_t history_cap = kDefaultHistoryCap;
    std::size_t axtree_chars = kDefaultAxtreeChars;
    bool search_prompts = false;  // the trajectory-search prompt variants (baseline style only)
    std::uint64_t seed = 0;
};

struct ScoreRequest {
    TaskSpec task;
    Trajectory history;  // steps taken before this observation
    Observation observation;
    std::string thought;
    Action action;
    std::optional<Checklist> reference;
};

struct ScoredAction {
    RewardScore score;
    std::vector<RewardSample> samples;  // empty in Likert mode
    std::vector<std::string> responses;
    std::optional<Checklist> checklist;
};

/// Renders the judge prompt for a request (exposed for fixtures and tests).
Prompt build_reward_prompt(const ScoreRequest& req, const Checklist* checklist, const RewardModelConfig& cfg);

/// Feedback text given to the policy on refinement: the judge's reason and
/// its per-item labels. The numeric reward is deliberately left out.
std::string render_feedback(const RewardSample& sample, const Checklist& checklist);

class RewardModel {
public:
    RewardModel(BackendPtr judge, RewardModelConfig cfg);

    ScoredAction score(const ScoreRequest& req);

    /// Reference checklist, or a generated one (generated once per task id).
    /// Returns nullopt in Likert mode.
    std::optional<Checklist> checklist_for(const TaskSpec& task, const std::optional<Checklist>& reference);

    const RewardModelConfig& config() const { return cfg_; }
    /// Strategy actually used: Prob strategies fall back to Token ones when
    /// the judge cannot return log-probabilities.
    ScoringStrategy effective_strategy() const;

private:
    BackendPtr judge_;
    RewardModelConfig cfg_;
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<std::once_flag>> generation_once_;
    std::map<std::string, Checklist> generated_;
};

}  // namespace shepherd
