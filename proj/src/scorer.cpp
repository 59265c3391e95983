#include "shepherd/scorer.hpp"

#include "shepherd/error.hpp"
#include "shepherd/prompts.hpp"
#include "shepherd/rng.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace shepherd {

std::string_view reward_mode_name(RewardMode m) noexcept {
    switch (m) {
        case RewardMode::Likert: return "likert";
        case RewardMode::ReferenceChecklist: return "reference";
        case RewardMode::GeneratedChecklist: return "generated";
    }
    return "?";
}

RewardMode parse_reward_mode(std::string_view s) {
    auto v = to_lower(trim(s));
    if (v == "likert" || v == "none" || v == "no-checklist") return RewardMode::Likert;
    if (v == "reference" || v == "ref") return RewardMode::ReferenceChecklist;
    if (v == "generated" || v == "gen") return RewardMode::GeneratedChecklist;
    throw ConfigError(fmt::format("unknown reward mode '{}' (likert | reference | generated)", s));
}

Prompt build_reward_prompt(const ScoreRequest& req, const Checklist* checklist, const RewardModelConfig& cfg) {
    std::string_view key;
    if (!checklist) key = cfg.search_prompts ? prompt_key::kLikertRewardSearch : prompt_key::kLikertReward;
    else if (cfg.style == ChecklistStyle::Shepherd) key = prompt_key::kShepherdReward;
    else key = cfg.search_prompts ? prompt_key::kChecklistRewardSearch : prompt_key::kChecklistReward;

    auto obs = truncate_axtree(req.observation, cfg.axtree_chars);
    TemplateValues values{
        {"intent", req.task.intent},
        {"trajectory", render_trajectory(req.history, req.history.steps.size(), cfg.history_cap)},
        {"current_url", obs.url},
        {"text_observation", obs.axtree},
        {"thought", req.thought},
        {"action", serialize_action(req.action)},
        {"action_space", std::string(prompt_template(prompt_key::kActionSpace))},
    };
    if (checklist) values["checklist"] = render_checklist(*checklist);
    return Prompt::with_optional_image(render_template(prompt_template(key), values), obs.screenshot);
}

std::string render_feedback(const RewardSample& sample, const Checklist& checklist) {
    std::string out = sample.evaluation.reason;
    out += "\n\nChecklist evaluation:";
    for (std::size_t i = 0; i < sample.evaluation.labels.size(); ++i) {
        auto title = i < checklist.items.size() ? checklist.items[i].title : std::string();
        out += fmt::format("\n- Checklist {}: {}: {}", i + 1, title, label_name(sample.evaluation.labels[i]));
    }
    return out;
}

RewardModel::RewardModel(BackendPtr judge, RewardModelConfig cfg) : judge_(std::move(judge)), cfg_(std::move(cfg)) {
    if (!judge_) throw ConfigError("reward model needs a judge backend");
    if (cfg_.strategy.mode() == ScoreMode::Prob && !judge_->supports_logprobs())
        spdlog::warn("judge '{}' has no log-probabilities; scoring with {} instead of {}", judge_->name(),
                     effective_strategy().name(), cfg_.strategy.name());
}

ScoringStrategy RewardModel::effective_strategy() const {
    if (cfg_.strategy.mode() == ScoreMode::Prob && !judge_->supports_logprobs()) return cfg_.strategy.without_logprobs();
    return cfg_.strategy;
}

std::optional<Checklist> RewardModel::checklist_for(const TaskSpec& task, const std::optional<Checklist>& reference) {
    switch (cfg_.mode) {
        case RewardMode::Likert: return std::nullopt;
        case RewardMode::ReferenceChecklist:
            if (!reference || reference->items.empty())
                throw ConfigError(fmt::format("task '{}' has no reference checklist", task.id));
            return reference;
        case RewardMode::GeneratedChecklist: break;
    }

    auto key = task.id.empty() ? task.intent + "\n" + task.start_url : task.id;
    std::shared_ptr<std::once_flag> once;
    {
        std::lock_guard lock(mu_);
        auto& slot = generation_once_[key];
        if (!slot) slot = std::make_shared<std::once_flag>();
        once = slot;
    }
    std::call_once(*once, [&] {
        CompletionRequest req;
        req.prompt = Prompt::from_text(build_checklist_prompt(task, cfg_.style));
        req.temperature = 0.0;
        req.n = 1;
        req.seed = derive_seed(cfg_.seed, "checklist/" + key);
        auto out = judge_->complete(req);
        auto checklist = parse_checklist(out.front().text);
        std::lock_guard lock(mu_);
        generated_[key] = std::move(checklist);
    });
    std::lock_guard lock(mu_);
    return generated_.at(key);
}

ScoredAction RewardModel::score(const ScoreRequest& req) {
    ScoredAction out;
    out.checklist = checklist_for(req.task, req.reference);
    auto strategy = effective_strategy();

    CompletionRequest call;
    call.prompt = build_reward_prompt(req, out.checklist ? &*out.checklist : nullptr, cfg_);
    call.temperature = strategy.temperature();
    call.n = strategy.sample_count();
    call.logprobs = out.checklist && strategy.mode() == ScoreMode::Prob;
    call.seed = derive_seed(cfg_.seed, "reward");
    auto completions = judge_->complete(call);
    for (const auto& c : completions) out.responses.push_back(c.text);

    if (!out.checklist) {
        out.score.value = likert_reward(out.responses);
        out.score.strategy = strategy;
        out.score.samples_used = static_cast<int>(completions.size());
        return out;
    }

    auto items = static_cast<int>(out.checklist->items.size());
    for (const auto& c : completions) out.samples.push_back(build_reward_sample(c, items, cfg_.verbalizer));
    out.score = aggregate_reward(out.samples, strategy);
    return out;
}

}  // namespace shepherd
