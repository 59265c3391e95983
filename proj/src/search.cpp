#include "shepherd/search.hpp"

#include "shepherd/error.hpp"
#include "shepherd/prompts.hpp"
#include "shepherd/rng.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <future>
#include <numeric>

namespace shepherd {

void SearchConfig::validate() const {
    if (n_policy_samples < 1) throw ConfigError("search: n_policy_samples must be >= 1");
    if (top_n_candidates < 1 || top_n_candidates > n_policy_samples)
        throw ConfigError("search: top_n_candidates must be in [1, n_policy_samples]");
    if (max_refinements < 0) throw ConfigError("search: max_refinements must be >= 0");
    if (max_steps < 0) throw ConfigError("search: max_steps must be >= 0");
    if (!(policy_top_p > 0.0 && policy_top_p <= 1.0)) throw ConfigError("search: policy_top_p must be in (0, 1]");
}

namespace {

// Strict "a should run before b" for candidates.
bool ranks_before(const Candidate& a, const std::string& key_a, const Candidate& b, const std::string& key_b) {
    if (a.reward.has_value() != b.reward.has_value()) return a.reward.has_value();
    if (a.reward && a.reward->value != b.reward->value) return a.reward->value > b.reward->value;
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return key_a < key_b;
}

std::string error_type_name(const std::exception& e) {
    if (dynamic_cast<const NoCandidates*>(&e)) return "NoCandidates";
    if (dynamic_cast<const BackendError*>(&e)) return "BackendError";
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const FixtureMiss*>(&e)) return "FixtureMiss";
    if (dynamic_cast<const NoScore*>(&e)) return "NoScore";
    if (dynamic_cast<const MissingReward*>(&e)) return "MissingReward";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const TemplateError*>(&e)) return "TemplateError";
    if (dynamic_cast<const Error*>(&e)) return "Error";
    return "std::exception";
}

}  // namespace

void CandidateSet::sort() {
    std::vector<std::pair<std::string, Candidate>> keyed;
    for (auto& c : entries) keyed.emplace_back(action_key(c.action), std::move(c));
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return ranks_before(a.second, a.first, b.second, b.first); });
    entries.clear();
    for (auto& [k, c] : keyed) entries.push_back(std::move(c));
}

Prompt build_policy_prompt(const TaskSpec& task, const Trajectory& history, const Observation& obs,
                           const SearchConfig& cfg) {
    auto o = truncate_axtree(obs, cfg.axtree_chars);
    TemplateValues values{
        {"intent", task.intent},
        {"current_url", o.url},
        {"text_observation", o.axtree},
        {"trajectory", render_trajectory(history, history.steps.size(), cfg.history_cap)},
        {"action_space", std::string(prompt_template(prompt_key::kActionSpace))},
    };
    return Prompt::from_text(render_template(prompt_template(prompt_key::kPolicy), values));
}

CandidateSet collect_candidates(ModelBackend& policy, const Prompt& prompt, const SearchConfig& cfg,
                                std::uint64_t seed) {
    cfg.validate();
    CompletionRequest req;
    req.prompt = prompt;
    req.temperature = cfg.policy_temperature;
    req.top_p = cfg.policy_top_p;
    req.n = cfg.n_policy_samples;
    req.seed = seed;
    auto samples = policy.complete(req);

    CandidateSet cs;
    cs.samples_drawn = static_cast<int>(samples.size());
    std::map<std::string, Candidate> by_key;
    for (const auto& s : samples) {
        auto action = extract_action(s.text);
        if (!action) {
            spdlog::debug("dropping unparseable policy sample: {:.80}", s.text);
            continue;
        }
        ++cs.samples_parsed;
        auto key = action_key(*action);
        auto [it, inserted] = by_key.try_emplace(key);
        if (inserted) {
            it->second.action = std::move(*action);
            it->second.thought = extract_thought(s.text);
        }
        ++it->second.frequency;
    }
    if (by_key.empty())
        throw NoCandidates(fmt::format("none of the {} policy samples contained a parseable action", cs.samples_drawn));

    for (auto& [k, c] : by_key) cs.entries.push_back(std::move(c));
    cs.sort();  // no rewards yet: frequency desc, key asc
    if (cs.entries.size() > static_cast<std::size_t>(cfg.top_n_candidates))
        cs.entries.resize(static_cast<std::size_t>(cfg.top_n_candidates));
    return cs;
}

std::size_t select_index(const CandidateSet& cs) {
    if (cs.entries.empty()) throw NoCandidates("select_action: empty candidate set");
    std::vector<std::string> keys;
    for (std::size_t i = 0; i < cs.entries.size(); ++i) {
        if (!cs.entries[i].reward)
            throw MissingReward(fmt::format("candidate '{}' has no reward", serialize_action(cs.entries[i].action)));
        keys.push_back(action_key(cs.entries[i].action));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cs.entries.size(); ++i)
        if (ranks_before(cs.entries[i], keys[i], cs.entries[best], keys[best])) best = i;
    return best;
}

Action select_action(const CandidateSet& cs) { return cs.entries[select_index(cs)].action; }

Prompt build_refinement_prompt(const RefineContext& ctx, const Attempt& draft, const SearchConfig& cfg) {
    auto o = truncate_axtree(ctx.observation, cfg.axtree_chars);
    TemplateValues values{
        {"intent", ctx.task.intent},
        {"current_url", o.url},
        {"text_observation", o.axtree},
        {"trajectory", render_trajectory(ctx.history, ctx.history.steps.size(), cfg.history_cap)},
        {"action_space", std::string(prompt_template(prompt_key::kActionSpace))},
        {"thought", draft.thought},
        {"action", serialize_action(draft.action)},
        {"feedback", draft.feedback},
        {"examples", ""},
    };
    return Prompt::from_text(render_template(prompt_template(prompt_key::kRefinement), values));
}

std::vector<Attempt> refine_step(std::optional<double> prev_reward, Attempt current, ModelBackend& policy,
                                 const RefineContext& ctx, const SearchConfig& cfg) {
    std::vector<Attempt> attempts{std::move(current)};
    if (!prev_reward || !(attempts.front().reward.value < *prev_reward)) return attempts;

    for (int round = 0; round < cfg.max_refinements; ++round) {
        CompletionRequest req;
        req.prompt = build_refinement_prompt(ctx, attempts.back(), cfg);
        req.temperature = cfg.policy_temperature;
        req.top_p = cfg.policy_top_p;
        req.n = 1;
        req.seed = derive_seed(ctx.seed, fmt::format("refine/{}", round));
        auto text = policy.complete(req).front().text;
        auto action = extract_action(text);
        if (!action) {
            spdlog::warn("refinement {} produced no parseable action; keeping earlier attempts", round + 1);
            break;
        }
        attempts.push_back(ctx.score(extract_thought(text), *action));
        const auto& newest = attempts.back();
        const auto& before = attempts[attempts.size() - 2];
        if (!(newest.reward.value > before.reward.value)) break;
    }
    return attempts;
}

std::size_t best_attempt(const std::vector<Attempt>& attempts) {
    if (attempts.empty()) throw NoCandidates("best_attempt: no attempts");
    std::size_t best = 0;
    for (std::size_t i = 1; i < attempts.size(); ++i)
        if (attempts[i].reward.value > attempts[best].reward.value) best = i;
    return best;
}

// ---- TraceEnv ----

namespace {

std::set<std::string> string_set(const Json& j, const char* key) {
    std::set<std::string> out;
    if (j.contains(key))
        for (const auto& s : j[key]) out.insert(s.get<std::string>());
    return out;
}

std::string normalized_key(const std::string& action_text) {
    try {
        return action_key(parse_action(action_text));
    } catch (const SyntaxError& e) {
        throw ParseError(fmt::format("trace: bad action '{}': {}", action_text, e.what()));
    }
}

}  // namespace

TraceEnv TraceEnv::from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("trace must be a JSON object");
    TraceEnv env;
    try {
        if (!j.contains("states") || !j["states"].is_object()) throw ParseError("trace needs a \"states\" object");
        for (const auto& [id, s] : j["states"].items()) env.states_[id] = observation_from_json(s);

        auto need_state = [&](const std::string& id, const char* what) {
            if (!env.states_.count(id)) throw ParseError(fmt::format("trace: {} refers to unknown state '{}'", what, id));
        };

        if (j.contains("edges"))
            for (const auto& e : j["edges"]) {
                auto from = e.at("from").get<std::string>();
                auto to = e.at("to").get<std::string>();
                need_state(from, "edge");
                need_state(to, "edge");
                env.edges_[{from, normalized_key(e.at("action").get<std::string>())}] = to;
            }

        std::string initial = j.value("initial", "");
        auto success = string_set(j, "terminal_success");
        auto failure = string_set(j, "terminal_failure");

        if (!j.contains("tasks") || !j["tasks"].is_array() || j["tasks"].empty())
            throw ParseError("trace needs a non-empty \"tasks\" array");
        for (const auto& t : j["tasks"]) {
            TraceTask task;
            task.task = task_from_json(t);
            if (task.task.id.empty()) throw ParseError("trace task needs an \"id\"");
            if (t.contains("expert"))
                for (const auto& a : t["expert"]) task.expert.push_back(normalized_key(a.get<std::string>()));
            if (t.contains("checklist")) task.checklist = checklist_from_json(t["checklist"]);
            task.initial = t.value("initial", initial);
            task.terminal_success = t.contains("terminal_success") ? string_set(t, "terminal_success") : success;
            task.terminal_failure = t.contains("terminal_failure") ? string_set(t, "terminal_failure") : failure;
            need_state(task.initial, "task initial");
            for (const auto& s : task.terminal_success) need_state(s, "terminal_success");
            for (const auto& s : task.terminal_failure) need_state(s, "terminal_failure");
            if (task.terminal_success.empty()) throw ParseError(fmt::format("task '{}' has no success state", task.task.id));
            env.tasks_.push_back(std::move(task));
        }
    } catch (const Json::exception& e) {
        throw ParseError(fmt::format("trace: {}", e.what()));
    }
    return env;
}

TraceEnv TraceEnv::from_file(const std::filesystem::path& path) {
    return from_json(parse_json(read_text_file(path), path.string()));
}

const TraceTask& TraceEnv::task(const std::string& id) const {
    for (const auto& t : tasks_)
        if (t.task.id == id) return t;
    throw ConfigError(fmt::format("trace has no task '{}'", id));
}

std::vector<std::string> TraceEnv::task_ids() const {
    std::vector<std::string> ids;
    for (const auto& t : tasks_) ids.push_back(t.task.id);
    return ids;
}

Observation TraceEnv::observation_of(const std::string& state) const {
    auto it = states_.find(state);
    if (it == states_.end()) throw ConfigError(fmt::format("trace has no state '{}'", state));
    return it->second;
}

Observation TraceEnv::reset(const std::string& task_id) {
    active_ = &task(task_id);
    state_ = active_->initial;
    annotate_ = false;
    return observation_of(state_);
}

std::optional<std::string> TraceEnv::transition(const std::string& state, const std::string& key) const {
    auto it = edges_.find({state, key});
    if (it == edges_.end()) return std::nullopt;
    return it->second;
}

StepResult TraceEnv::step(const Action& action) {
    if (!active_) throw ConfigError("TraceEnv::step before reset");
    StepResult r;
    if (auto next = transition(state_, action_key(action))) {
        state_ = *next;
        r.observation = observation_of(state_);
    } else {
        r.changed = false;
        r.observation = observation_of(state_);
        r.observation.axtree = std::string(kNoChangeNote) + "\n" + r.observation.axtree;
    }
    r.success = active_->terminal_success.count(state_) > 0;
    r.done = r.success || active_->terminal_failure.count(state_) > 0;
    return r;
}

// ---- episodes ----

std::string_view episode_status_name(EpisodeStatus s) noexcept {
    switch (s) {
        case EpisodeStatus::Running: return "running";
        case EpisodeStatus::Success: return "success";
        case EpisodeStatus::Failure: return "failure";
        case EpisodeStatus::Budget: return "budget";
    }
    return "?";
}

namespace {

Attempt to_attempt(const std::string& thought, const Action& action, const ScoredAction& scored) {
    Attempt a;
    a.thought = thought;
    a.action = action;
    a.reward = scored.score;
    if (!scored.samples.empty() && scored.checklist) a.feedback = render_feedback(scored.samples.front(), *scored.checklist);
    else if (!scored.responses.empty()) a.feedback = scored.responses.front();
    return a;
}

}  // namespace

SearchEpisode run_episode(TraceEnv& env, const std::string& task_id, ModelBackend& policy, RewardModel& reward_model,
                          const SearchConfig& cfg) {
    cfg.validate();
    SearchEpisode ep;
    const auto& trace_task = env.task(task_id);
    ep.task = trace_task.task;

    std::string stage = "reset";
    auto fail = [&](const std::exception& e) -> EpisodeError {
        return EpisodeError(stage, error_type_name(e), fmt::format("{} stage failed: {}", stage, e.what()), ep);
    };

    Observation obs;
    try {
        obs = env.reset(task_id);
        if (cfg.max_steps == 0) {
            ep.status = EpisodeStatus::Budget;
            return ep;
        }
        stage = "checklist";
        ep.checklist = reward_model.checklist_for(ep.task, trace_task.checklist);
    } catch (const std::exception& e) {
        throw fail(e);
    }

    Trajectory history{ep.task, {}};
    std::optional<double> prev_reward;
    for (int t = 0; t < cfg.max_steps; ++t) {
        EpisodeStep step;
        step.index = static_cast<std::size_t>(t);
        step.state_before = env.state();
        step.observation = obs;
        auto step_seed = derive_seed(cfg.seed, fmt::format("{}/{}", task_id, t));

        auto score = [&](const std::string& thought, const Action& action) {
            ScoreRequest req{ep.task, history, obs, thought, action, trace_task.checklist};
            return to_attempt(thought, action, reward_model.score(req));
        };

        try {
            stage = "policy";
            step.candidates = collect_candidates(policy, build_policy_prompt(ep.task, history, obs, cfg), cfg, step_seed);

            stage = "reward";
            std::vector<std::future<Attempt>> pending;
            for (const auto& c : step.candidates.entries)
                pending.push_back(std::async(std::launch::async, score, c.thought, c.action));
            for (std::size_t i = 0; i < pending.size(); ++i) {
                auto a = pending[i].get();
                step.candidates.entries[i].reward = a.reward;
                step.candidates.entries[i].feedback = a.feedback;
            }
            step.candidates.sort();
            const auto& pick = step.candidates.entries[select_index(step.candidates)];
            Attempt first{pick.thought, pick.action, *pick.reward, pick.feedback};

            if (cfg.refine && cfg.max_refinements > 0) {
                stage = "refine";
                RefineContext ctx{ep.task, history, obs, score, derive_seed(step_seed, "refine")};
                step.attempts = refine_step(prev_reward, std::move(first), policy, ctx, cfg);
            } else {
                step.attempts.push_back(std::move(first));
            }
            const auto& chosen = step.attempts[best_attempt(step.attempts)];
            step.thought = chosen.thought;
            step.executed = chosen.action;
            step.reward = chosen.reward;

            stage = "env";
            auto result = env.step(step.executed);
            step.state_after = env.state();
            history.steps.push_back(Step{step.thought, step.executed, obs});
            prev_reward = step.reward.value;
            obs = result.observation;
            ep.steps.push_back(std::move(step));
            if (result.done) {
                ep.status = result.success ? EpisodeStatus::Success : EpisodeStatus::Failure;
                return ep;
            }
        } catch (const EpisodeError&) {
            throw;
        } catch (const std::exception& e) {
            throw fail(e);
        }
    }
    ep.status = EpisodeStatus::Budget;
    return ep;
}

double normalized_final_reward(const SearchEpisode& e) {
    if (e.steps.empty()) throw EmptyEpisode("normalized_final_reward: episode has no steps");
    auto last = e.steps.back().reward.value;
    if (e.steps.size() == 1) return last;
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < e.steps.size(); ++i) sum += e.steps[i].reward.value;
    return last - sum / static_cast<double>(e.steps.size() - 1);
}

std::string episode_to_jsonl(const SearchEpisode& e) {
    std::string out;
    for (const auto& s : e.steps) {
        Json cands = Json::array();
        for (const auto& c : s.candidates.entries) {
            Json cj{{"action", serialize_action(c.action)}, {"frequency", c.frequency}, {"thought", c.thought}};
            cj["reward"] = c.reward ? Json(c.reward->value) : Json();
            cands.push_back(cj);
        }
        Json attempts = Json::array();
        for (const auto& a : s.attempts)
            attempts.push_back(Json{{"action", serialize_action(a.action)}, {"reward", a.reward.value}});
        Json j{{"type", "step"},
               {"task_id", e.task.id},
               {"step_index", s.index},
               {"state_before", s.state_before},
               {"state_after", s.state_after},
               {"url", s.observation.url},
               {"thought", s.thought},
               {"action", serialize_action(s.executed)},
               {"reward", s.reward.value},
               {"per_item", s.reward.per_item},
               {"strategy", s.reward.strategy.name()},
               {"samples_used", s.reward.samples_used},
               {"candidates", cands},
               {"attempts", attempts}};
        out += j.dump() + "\n";
    }
    Json summary{{"type", "summary"},
                 {"task_id", e.task.id},
                 {"status", episode_status_name(e.status)},
                 {"steps", e.steps.size()}};
    summary["normalized_final_reward"] = e.steps.empty() ? Json() : Json(normalized_final_reward(e));
    out += summary.dump() + "\n";
    return out;
}

std::string reward_trend_csv(const std::vector<SearchEpisode>& episodes, int bins) {
    if (bins < 1) bins = 1;
    // (bin, success) -> (sum, count)
    std::map<std::pair<int, bool>, std::pair<double, int>> acc;
    for (const auto& e : episodes) {
        auto n = e.steps.size();
        bool success = e.status == EpisodeStatus::Success;
        for (std::size_t i = 0; i < n; ++i) {
            double pos = static_cast<double>(i + 1) / static_cast<double>(n);
            int bin = std::min(bins - 1, static_cast<int>(pos * bins - 1e-9));
            auto& slot = acc[{bin, success}];
            slot.first += e.steps[i].reward.value;
            ++slot.second;
        }
    }
    std::string out = "normalized_step,mean_reward,success\n";
    for (const auto& [key, v] : acc)
        out += fmt::format("{},{},{}\n", format_metric(static_cast<double>(key.first + 1) / bins),
                           format_metric(v.first / v.second), key.second ? 1 : 0);
    return out;
}

}  // namespace shepherd
