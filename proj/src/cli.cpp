#include "shepherd/cli.hpp"

#include "shepherd/bench.hpp"
#include "shepherd/config.hpp"
#include "shepherd/cost.hpp"
#include "shepherd/error.hpp"
#include "shepherd/filter.hpp"
#include "shepherd/io.hpp"
#include "shepherd/rng.hpp"
#include "shepherd/scorer.hpp"
#include "shepherd/search.hpp"

#include "CLI11.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <ostream>

namespace shepherd::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> max_concurrency;
    std::string output_dir;
    bool resume = false;
    std::string log_level = "warn";
};

struct Context {
    HarnessConfig cfg;
    std::shared_ptr<RequestSlots> slots;
    std::ostream& out;
    std::ostream& err;

    BackendPtr backend(const std::string& role) { return make_backend(cfg, role, slots); }
    fs::path output(const std::string& name) const { return cfg.output_dir / name; }
};

HarnessConfig resolve_config(const Globals& g) {
    HarnessConfig cfg = g.config_path.empty() ? HarnessConfig{} : load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.max_concurrency) cfg.max_concurrency = *g.max_concurrency;
    if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
    if (g.resume) cfg.resume = true;
    if (cfg.max_concurrency < 1) throw ConfigError("--max-concurrency must be >= 1");
    cfg.reward.seed = derive_seed(cfg.seed, "reward-model");
    cfg.search.seed = derive_seed(cfg.seed, "search");
    cfg.geval.seed = derive_seed(cfg.seed, "geval");
    return cfg;
}

Json load_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

Json score_json(const RewardScore& s, RewardMode mode) {
    return Json{{"value", s.value},
                {"per_item", s.per_item},
                {"samples_used", s.samples_used},
                {"strategy", s.strategy.name()},
                {"mode", reward_mode_name(mode)}};
}

// ---- subcommands ----

struct ChecklistArgs {
    std::string task;
    std::string style;
    std::string out_file;
};

int cmd_checklist(Context& ctx, const ChecklistArgs& a) {
    auto task = task_from_json(load_json_file(a.task));
    auto style = ctx.cfg.reward.style;
    if (a.style == "baseline") style = ChecklistStyle::Baseline;
    else if (a.style == "shepherd") style = ChecklistStyle::Shepherd;

    CompletionRequest req;
    req.prompt = Prompt::from_text(build_checklist_prompt(task, style));
    req.temperature = 0.0;
    req.seed = derive_seed(ctx.cfg.seed, "checklist/" + task.id);
    auto raw = ctx.backend("reward")->complete(req).front().text;
    auto checklist = parse_checklist(raw);

    Json j{{"task_id", task.id},
           {"style", style == ChecklistStyle::Baseline ? "baseline" : "shepherd"},
           {"checklist", to_json(checklist)["items"]},
           {"raw", raw}};
    auto text = j.dump(2) + "\n";
    write_text_file(a.out_file.empty() ? ctx.output("checklist.json") : fs::path(a.out_file), text);
    ctx.out << text;
    return kExitOk;
}

struct RewardArgs {
    std::string mode;
    std::string strategy;
};

void apply_reward_args(HarnessConfig& cfg, const RewardArgs& a) {
    if (!a.mode.empty()) cfg.reward.mode = parse_reward_mode(a.mode);
    if (!a.strategy.empty()) cfg.reward.strategy = ScoringStrategy::parse(a.strategy);
}

struct ScoreArgs {
    std::string instance;
    RewardArgs reward;
};

int cmd_score(Context& ctx, const ScoreArgs& a) {
    apply_reward_args(ctx.cfg, a.reward);
    auto j = load_json_file(a.instance);
    ScoreRequest req;
    try {
        req.task = task_from_json(j.contains("task") ? j["task"] : j);
        req.history.task = req.task;
        if (j.contains("history"))
            for (const auto& s : j["history"]) req.history.steps.push_back(step_from_json(s));
        if (!j.contains("observation")) throw ParseError("instance needs an \"observation\"");
        req.observation = observation_from_json(j["observation"]);
        if (!j.contains("action")) throw ParseError("instance needs an \"action\"");
        req.action = action_from_json(j["action"]);
        req.thought = j.value("thought", "");
        if (j.contains("reference_checklist")) req.reference = checklist_from_json(j["reference_checklist"]);
    } catch (const Json::exception& e) {
        throw ParseError(e.what());
    }

    RewardModel model(ctx.backend("reward"), ctx.cfg.reward);
    auto scored = model.score(req);
    auto text = score_json(scored.score, ctx.cfg.reward.mode).dump(2) + "\n";
    write_text_file(ctx.output("score.json"), text);
    ctx.out << text;
    return kExitOk;
}

struct BenchArgs {
    std::string dataset;
    RewardArgs reward;
    std::optional<std::size_t> max_instances;
};

int cmd_bench(Context& ctx, const BenchArgs& a) {
    apply_reward_args(ctx.cfg, a.reward);
    auto dataset = load_bench(a.dataset);
    if (dataset.empty()) throw ParseError(fmt::format("{}: no benchmark instances", a.dataset));

    RewardModel model(ctx.backend("reward"), ctx.cfg.reward);
    BenchOptions opts;
    opts.audit_path = ctx.output("audit.jsonl");
    opts.resume = ctx.cfg.resume;
    opts.max_concurrency = ctx.cfg.max_concurrency;
    opts.max_instances = a.max_instances;
    auto report = run_bench(dataset, model, opts);

    auto json = report_to_json(report);
    write_text_file(ctx.output("report.json"), json);
    write_text_file(ctx.output("report.csv"), report_to_csv(report));
    ctx.out << report_to_csv(report);
    if (report.partial())
        ctx.err << fmt::format("partial results: {} failed, {} pending\n", report.failed.size(), report.pending);
    return report.per_instance.empty() ? kExitBackend : kExitOk;
}

struct SearchArgs {
    std::string trace;
    std::string task;
    bool refine = false;
    std::optional<int> max_steps;
    RewardArgs reward;
};

int cmd_search(Context& ctx, const SearchArgs& a) {
    apply_reward_args(ctx.cfg, a.reward);
    auto env = TraceEnv::from_file(a.trace);
    try {
        env.task(a.task);
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
    auto cfg = ctx.cfg.search;
    if (a.refine) cfg.refine = true;
    if (a.max_steps) cfg.max_steps = *a.max_steps;
    cfg.validate();

    auto policy = ctx.backend("policy");
    RewardModel model(ctx.backend("reward"), ctx.cfg.reward);
    auto episode_path = ctx.output(fmt::format("episode-{}.jsonl", a.task));
    SearchEpisode episode;
    try {
        episode = run_episode(env, a.task, *policy, model, cfg);
    } catch (const EpisodeError& e) {
        auto partial = e.partial();
        write_text_file(episode_path, episode_to_jsonl(partial));
        ctx.err << fmt::format("episode aborted in {} stage ({}): {}\n", e.stage(), e.cause_type(), e.what());
        return kExitEpisode;
    }
    write_text_file(episode_path, episode_to_jsonl(episode));
    write_text_file(ctx.output("reward_trend.csv"), reward_trend_csv({episode}));

    Json summary{{"task_id", a.task}, {"status", episode_status_name(episode.status)}, {"steps", episode.steps.size()}};
    summary["normalized_final_reward"] = episode.steps.empty() ? Json() : Json(normalized_final_reward(episode));
    Json actions = Json::array();
    for (const auto& s : episode.steps) actions.push_back(serialize_action(s.executed));
    summary["actions"] = actions;
    ctx.out << summary.dump(2) << "\n";
    return kExitOk;
}

struct FilterArgs {
    std::string input;
    std::size_t max_keep = 5;
};

ThoughtAction thought_action_from_json(const Json& j) {
    if (j.is_string()) return ThoughtAction{"", action_from_json(j)};
    if (!j.is_object() || !j.contains("action")) throw ParseError("expected an action or {\"thought\", \"action\"}");
    return ThoughtAction{j.value("thought", ""), action_from_json(j["action"])};
}

int cmd_filter(Context& ctx, const FilterArgs& a) {
    if (a.max_keep == 0) throw ParseError("--max-keep must be >= 1");
    auto text = read_text_file(a.input);
    std::vector<Json> records;
    auto trimmed = text.find_first_not_of(" \t\r\n");
    if (trimmed != std::string::npos && text[trimmed] == '{' && text.find('\n', trimmed) != std::string::npos) {
        // Either one pretty-printed object or JSONL; try whole-file first.
        try {
            records.push_back(Json::parse(text));
        } catch (const Json::exception&) {
            for_each_jsonl(text, [&](const Json& j, std::size_t) { records.push_back(j); });
        }
    } else {
        for_each_jsonl(text, [&](const Json& j, std::size_t) { records.push_back(j); });
    }
    if (records.empty()) throw ParseError(fmt::format("{}: no filter records", a.input));

    std::string table = "record\tverdict\tcandidate\n";
    std::string kept_lines;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (!rec.is_object() || !rec.contains("chosen") || !rec.contains("candidates"))
            throw ParseError(fmt::format("record {}: needs \"chosen\" and \"candidates\"", r + 1));
        auto chosen = thought_action_from_json(rec["chosen"]);
        std::vector<ThoughtAction> cands;
        for (const auto& c : rec["candidates"]) cands.push_back(thought_action_from_json(c));
        for (const auto& c : cands)
            table += fmt::format("{}\t{}\t{}\n", r + 1, verdict_name(classify_rejected(chosen, c)),
                                 serialize_action(c.action));
        auto seed = derive_seed(ctx.cfg.seed, fmt::format("filter/{}", r));
        Json kept = Json::array();
        for (const auto& k : sample_rejected(chosen, cands, a.max_keep, seed)) kept.push_back(serialize_action(k));
        kept_lines += Json{{"record", r + 1}, {"chosen", serialize_action(chosen.action)}, {"rejected", kept}}.dump() + "\n";
    }
    write_text_file(ctx.output("filter.jsonl"), kept_lines);
    ctx.out << table << kept_lines;
    return kExitOk;
}

struct CostArgs {
    std::string usage;
    std::optional<std::int64_t> input_tokens;
    std::optional<std::int64_t> output_tokens;
    std::vector<std::string> models;
};

int cmd_cost(Context& ctx, const CostArgs& a) {
    TokenUsage per_instance;
    std::size_t records = 1;
    if (!a.usage.empty()) {
        TokenUsage total;
        records = 0;
        for_each_jsonl(read_text_file(a.usage), [&](const Json& j, std::size_t line) {
            auto in = j.value("input_tokens", std::int64_t{-1});
            auto out = j.value("output_tokens", std::int64_t{-1});
            if (in < 0 || out < 0) throw ParseError(fmt::format("line {}: needs non-negative input_tokens and output_tokens", line));
            total += TokenUsage{in, out};
            ++records;
        });
        if (records == 0) throw ParseError(fmt::format("{}: no usage records", a.usage));
        // Mean usage per instance, rounded to whole tokens.
        auto n = static_cast<std::int64_t>(records);
        per_instance = TokenUsage{(total.input_tokens + n / 2) / n, (total.output_tokens + n / 2) / n};
    } else {
        if (!a.input_tokens || !a.output_tokens)
            throw ParseError("cost: give --usage FILE or both --input-tokens and --output-tokens");
        if (*a.input_tokens < 0 || *a.output_tokens < 0) throw ParseError("cost: token counts must be >= 0");
        per_instance = TokenUsage{*a.input_tokens, *a.output_tokens};
    }

    std::vector<std::string> names = a.models;
    if (names.empty())
        for (const auto& [name, m] : ctx.cfg.cost_models) names.push_back(name);

    std::string csv = "model,input_tokens,output_tokens,usd_per_1k_instances\n";
    for (const auto& name : names) {
        auto it = ctx.cfg.cost_models.find(name);
        if (it == ctx.cfg.cost_models.end()) throw ParseError(fmt::format("cost: unknown model '{}'", name));
        csv += fmt::format("{},{},{},{:.2f}\n", name, per_instance.input_tokens, per_instance.output_tokens,
                           estimate_cost_per_1k(per_instance, it->second));
    }
    write_text_file(ctx.output("cost.csv"), csv);
    ctx.out << csv;
    return kExitOk;
}

struct GevalArgs {
    std::string task;
    std::string generated;
    std::string reference;
};

Checklist load_checklist_file(const std::string& path, ChecklistSource source) {
    auto text = read_text_file(path);
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '['))
        return checklist_from_json(parse_json(text, path), source);
    auto c = parse_checklist(text);
    c.source = source;
    return c;
}

int cmd_geval(Context& ctx, const GevalArgs& a) {
    auto task = task_from_json(load_json_file(a.task));
    auto generated = load_checklist_file(a.generated, ChecklistSource::Generated);
    auto reference = load_checklist_file(a.reference, ChecklistSource::Reference);
    auto scores = geval_checklist_quality(generated, reference, task, *ctx.backend("judge"), ctx.cfg.geval);
    Json j{{"task_id", task.id},
           {"validity", scores.validity},
           {"granularity", scores.granularity},
           {"coverage", scores.coverage},
           {"overall", scores.overall()}};
    auto text = j.dump(2) + "\n";
    write_text_file(ctx.output("geval.json"), text);
    ctx.out << text;
    return kExitOk;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const EpisodeError*>(&e)) return kExitEpisode;
    if (dynamic_cast<const BackendError*>(&e) || dynamic_cast<const FixtureMiss*>(&e) ||
        dynamic_cast<const JudgeError*>(&e))
        return kExitBackend;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const SyntaxError*>(&e) ||
        dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TemplateError*>(&e) ||
        dynamic_cast<const EmptyResults*>(&e) || dynamic_cast<const Json::exception*>(&e))
        return kExitInput;
    return kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Checklist-conditioned process rewards for web agents: scoring, benchmarking and search."};
    app.name("shepherd");
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "JSON manifest (supports ${VAR} interpolation)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "root seed for every random choice and backend request");
    app.add_option("--max-concurrency", g.max_concurrency, "maximum in-flight model requests")->check(CLI::PositiveNumber);
    app.add_option("--output-dir", g.output_dir, "directory for output files");
    app.add_flag("--resume", g.resume, "reuse completed entries from the audit ledger");
    app.add_option("--log-level", g.log_level, "trace | debug | info | warn | error | off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

    auto add_reward = [](CLI::App* sub, RewardArgs& r) {
        sub->add_option("--mode", r.mode, "likert | reference | generated")
            ->check(CLI::IsMember({"likert", "reference", "generated"}));
        sub->add_option("--strategy", r.strategy, "1res | 1prob | <K>avg | <K>prob");
    };

    ChecklistArgs checklist_args;
    auto* checklist = app.add_subcommand("checklist", "generate a checklist for a task");
    checklist->add_option("--task", checklist_args.task, "task JSON {id, intent, start_url}")->required();
    checklist->add_option("--style", checklist_args.style, "baseline | shepherd")
        ->check(CLI::IsMember({"baseline", "shepherd"}));
    checklist->add_option("--out", checklist_args.out_file, "output file (default <output-dir>/checklist.json)");

    ScoreArgs score_args;
    auto* score = app.add_subcommand("score", "score one action");
    score->add_option("--instance", score_args.instance, "instance JSON")->required();
    add_reward(score, score_args.reward);

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "evaluate a reward model on a benchmark JSONL file");
    bench->add_option("--dataset", bench_args.dataset, "benchmark JSONL")->required();
    add_reward(bench, bench_args.reward);
    bench->add_option("--max-instances", bench_args.max_instances, "stop after scoring this many new instances");

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "run reward-guided best-of-n search on a trace");
    search->add_option("--trace", search_args.trace, "trace JSON")->required();
    search->add_option("--task", search_args.task, "task id inside the trace")->required();
    search->add_flag("--refine", search_args.refine, "revise actions whose reward dropped");
    search->add_option("--max-steps", search_args.max_steps, "step budget")->check(CLI::NonNegativeNumber);
    add_reward(search, search_args.reward);

    FilterArgs filter_args;
    auto* filter = app.add_subcommand("filter", "screen candidate rejected actions");
    filter->add_option("--input", filter_args.input, "JSON or JSONL of {chosen, candidates}")->required();
    filter->add_option("--max-keep", filter_args.max_keep, "rejected actions kept per record");

    CostArgs cost_args;
    auto* cost = app.add_subcommand("cost", "cost per 1,000 instances");
    cost->add_option("--usage", cost_args.usage, "JSONL of {input_tokens, output_tokens} per instance");
    cost->add_option("--input-tokens", cost_args.input_tokens, "input tokens per instance");
    cost->add_option("--output-tokens", cost_args.output_tokens, "output tokens per instance");
    cost->add_option("--model", cost_args.models, "cost model name (repeatable; default: all)");

    GevalArgs geval_args;
    auto* geval = app.add_subcommand("geval", "rate a generated checklist against a reference");
    geval->add_option("--task", geval_args.task, "task JSON")->required();
    geval->add_option("--generated", geval_args.generated, "generated checklist (JSON or text)")->required();
    geval->add_option("--reference", geval_args.reference, "reference checklist (JSON or text)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitInput;
    }

    spdlog::set_level(spdlog::level::from_str(g.log_level));

    try {
        Context ctx{resolve_config(g), nullptr, out, err};
        ctx.slots = make_request_slots(ctx.cfg.max_concurrency);
        if (*checklist) return cmd_checklist(ctx, checklist_args);
        if (*score) return cmd_score(ctx, score_args);
        if (*bench) return cmd_bench(ctx, bench_args);
        if (*search) return cmd_search(ctx, search_args);
        if (*filter) return cmd_filter(ctx, filter_args);
        if (*cost) return cmd_cost(ctx, cost_args);
        if (*geval) return cmd_geval(ctx, geval_args);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return kExitFailure;
}

}  // namespace shepherd::cli
