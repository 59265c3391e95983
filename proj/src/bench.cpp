#include "shepherd/bench.hpp"

#include "shepherd/error.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

namespace shepherd {

namespace {

BenchCandidate candidate_from_json(const Json& j) {
    BenchCandidate c;
    if (j.is_string()) {
        c.action = action_from_json(j);
        return c;
    }
    if (!j.is_object() || !j.contains("action")) throw ParseError("candidate needs an \"action\"");
    c.action = action_from_json(j["action"]);
    c.thought = j.value("thought", "");
    return c;
}

Json candidate_to_json(const BenchCandidate& c) {
    return Json{{"thought", c.thought}, {"action", serialize_action(c.action)}};
}

}  // namespace

BenchInstance bench_instance_from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("bench instance must be a JSON object");
    try {
        BenchInstance b;
        b.task = task_from_json(j.contains("task") ? j["task"] : j);
        b.trajectory_id = j.value("trajectory_id", b.task.id);
        b.step_index = j.value("step_index", 0);
        b.id = j.value("id", fmt::format("{}/{}", b.trajectory_id, b.step_index));
        b.subset = j.value("subset", "default");
        b.history.task = b.task;
        if (j.contains("history"))
            for (const auto& s : j["history"]) b.history.steps.push_back(step_from_json(s));
        if (!j.contains("observation")) throw ParseError("missing field \"observation\"");
        b.observation = observation_from_json(j["observation"]);
        if (!j.contains("chosen")) throw ParseError("missing field \"chosen\"");
        b.chosen = candidate_from_json(j["chosen"]);
        if (!j.contains("rejected") || !j["rejected"].is_array()) throw ParseError("missing array \"rejected\"");
        for (const auto& r : j["rejected"]) b.rejected.push_back(candidate_from_json(r));
        if (b.rejected.size() != kBenchRejected)
            throw ParseError(fmt::format("expected {} rejected actions, got {}", kBenchRejected, b.rejected.size()));
        auto chosen_key = action_key(b.chosen.action);
        for (const auto& r : b.rejected)
            if (action_key(r.action) == chosen_key)
                throw ParseError(fmt::format("rejected action {} equals the chosen one", chosen_key));
        if (j.contains("reference_checklist") && !j["reference_checklist"].is_null())
            b.reference_checklist = checklist_from_json(j["reference_checklist"]);
        return b;
    } catch (const Json::exception& e) {
        throw ParseError(fmt::format("bench instance: {}", e.what()));
    }
}

Json to_json(const BenchInstance& b) {
    Json history = Json::array();
    for (const auto& s : b.history.steps) history.push_back(to_json(s));
    Json rejected = Json::array();
    for (const auto& r : b.rejected) rejected.push_back(candidate_to_json(r));
    Json j{{"id", b.id},
           {"task", to_json(b.task)},
           {"trajectory_id", b.trajectory_id},
           {"step_index", b.step_index},
           {"subset", b.subset},
           {"history", history},
           {"observation", to_json(b.observation)},
           {"chosen", candidate_to_json(b.chosen)},
           {"rejected", rejected}};
    if (b.reference_checklist) j["reference_checklist"] = to_json(*b.reference_checklist)["items"];
    return j;
}

std::vector<BenchInstance> parse_bench_jsonl(std::string_view text) {
    std::vector<BenchInstance> out;
    std::set<std::string> ids;
    for_each_jsonl(text, [&](const Json& j, std::size_t line) {
        try {
            out.push_back(bench_instance_from_json(j));
        } catch (const ParseError& e) {
            throw ParseError(fmt::format("line {}: {}", line, e.what()));
        }
        if (!ids.insert(out.back().id).second)
            throw ParseError(fmt::format("line {}: duplicate instance id '{}'", line, out.back().id));
    });
    return out;
}

std::vector<BenchInstance> load_bench(const std::filesystem::path& path) {
    try {
        return parse_bench_jsonl(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

int rank_of_chosen(const std::vector<double>& rewards, std::size_t chosen) {
    if (chosen >= rewards.size())
        throw std::out_of_range(fmt::format("chosen index {} out of range for {} rewards", chosen, rewards.size()));
    int rank = 1;
    for (std::size_t i = 0; i < rewards.size(); ++i)
        if (i != chosen && rewards[i] >= rewards[chosen]) ++rank;
    return rank;
}

Metrics compute_metrics(const std::vector<RankedStep>& results) {
    if (results.empty()) throw EmptyResults("compute_metrics: no results");
    Metrics m;
    std::map<std::string, bool> all_first;
    std::size_t firsts = 0;
    double rr = 0.0;
    for (const auto& r : results) {
        if (r.rank < 1) throw std::invalid_argument("compute_metrics: ranks are 1-based");
        rr += 1.0 / r.rank;
        bool first = r.rank == 1;
        if (first) ++firsts;
        auto [it, inserted] = all_first.try_emplace(r.trajectory_id, true);
        it->second = it->second && first;
    }
    m.instances = results.size();
    m.trajectories = all_first.size();
    m.mrr = rr / static_cast<double>(results.size());
    m.step_accuracy = static_cast<double>(firsts) / static_cast<double>(results.size());
    std::size_t good = 0;
    for (const auto& [id, ok] : all_first) good += ok ? 1 : 0;
    m.trajectory_accuracy = static_cast<double>(good) / static_cast<double>(all_first.size());
    return m;
}

Json to_json(const InstanceResult& r) {
    Json j{{"id", r.id}, {"trajectory_id", r.trajectory_id}, {"step_index", r.step_index}, {"subset", r.subset}};
    if (r.error) {
        j["status"] = "error";
        j["error"] = *r.error;
    } else {
        j["status"] = "ok";
        j["rank"] = r.rank;
        j["rewards"] = r.rewards;
    }
    return j;
}

InstanceResult instance_result_from_json(const Json& j) {
    InstanceResult r;
    r.id = j.at("id").get<std::string>();
    r.trajectory_id = j.value("trajectory_id", "");
    r.step_index = j.value("step_index", 0);
    r.subset = j.value("subset", "default");
    if (j.value("status", "ok") == "error") {
        r.error = j.value("error", "unknown error");
    } else {
        r.rank = j.at("rank").get<int>();
        r.rewards = j.at("rewards").get<std::vector<double>>();
    }
    return r;
}

BenchReport build_report(std::vector<InstanceResult> results, std::size_t total_instances) {
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    BenchReport r;
    std::vector<RankedStep> all;
    std::map<std::string, std::vector<RankedStep>> by_subset;
    for (auto& res : results) {
        if (res.error) {
            r.failed.push_back(std::move(res));
            continue;
        }
        RankedStep step{res.trajectory_id, res.rank};
        all.push_back(step);
        by_subset[res.subset].push_back(step);
        r.per_instance.push_back(std::move(res));
    }
    r.pending = total_instances - std::min(total_instances, r.per_instance.size() + r.failed.size());
    if (!all.empty()) r.overall = compute_metrics(all);
    for (const auto& [name, steps] : by_subset) r.subsets[name] = compute_metrics(steps);
    return r;
}

namespace {

Json metrics_json(const Metrics& m) {
    return Json{{"mrr", m.mrr},
                {"step_accuracy", m.step_accuracy},
                {"trajectory_accuracy", m.trajectory_accuracy},
                {"instances", m.instances},
                {"trajectories", m.trajectories}};
}

}  // namespace

std::string report_to_json(const BenchReport& r) {
    Json j = metrics_json(r.overall);
    j["failed"] = r.failed.size();
    j["pending"] = r.pending;
    j["partial"] = r.partial();
    Json subsets = Json::object();
    for (const auto& [name, m] : r.subsets) subsets[name] = metrics_json(m);
    j["subsets"] = subsets;
    Json per = Json::array();
    for (const auto& res : r.per_instance) {
        auto e = to_json(res);
        e.erase("status");
        per.push_back(e);
    }
    j["per_instance"] = per;
    Json failed = Json::array();
    for (const auto& res : r.failed) failed.push_back(Json{{"id", res.id}, {"error", *res.error}});
    j["failed_instances"] = failed;
    return j.dump(2) + "\n";
}

std::string report_to_csv(const BenchReport& r) {
    std::string out = "subset,mrr,acc_step,acc_traj,instances\n";
    auto row = [&](const std::string& name, const Metrics& m) {
        out += fmt::format("{},{},{},{},{}\n", name, format_metric(m.mrr), format_metric(m.step_accuracy),
                           format_metric(m.trajectory_accuracy), m.instances);
    };
    for (const auto& [name, m] : r.subsets) row(name, m);
    row("all", r.overall);
    return out;
}

namespace {

InstanceResult score_instance(const BenchInstance& inst, RewardModel& model) {
    InstanceResult res;
    res.id = inst.id;
    res.trajectory_id = inst.trajectory_id;
    res.step_index = inst.step_index;
    res.subset = inst.subset;
    try {
        std::vector<const BenchCandidate*> cands{&inst.chosen};
        for (const auto& r : inst.rejected) cands.push_back(&r);
        for (const auto* c : cands) {
            ScoreRequest req{inst.task, inst.history, inst.observation, c->thought, c->action, inst.reference_checklist};
            res.rewards.push_back(model.score(req).score.value);
        }
        res.rank = rank_of_chosen(res.rewards, 0);
    } catch (const std::exception& e) {
        res.rewards.clear();
        res.error = e.what();
    }
    return res;
}

std::map<std::string, InstanceResult> load_ledger(const std::filesystem::path& path) {
    std::map<std::string, InstanceResult> done;
    if (path.empty() || !std::filesystem::exists(path)) return done;
    auto text = read_text_file(path);
    // A crash can leave a torn final line; ignore anything that fails to parse.
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string::npos) break;  // unterminated line: incomplete write
        auto line = std::string_view(text).substr(start, nl - start);
        start = nl + 1;
        try {
            auto r = instance_result_from_json(Json::parse(line));
            if (!r.error) done[r.id] = std::move(r);
        } catch (const std::exception&) {
            spdlog::warn("audit ledger: skipping unreadable line");
        }
    }
    return done;
}

}  // namespace

BenchReport run_bench(const std::vector<BenchInstance>& dataset, RewardModel& model, const BenchOptions& opts) {
    if (dataset.empty()) throw EmptyResults("run_bench: dataset is empty");

    std::map<std::string, InstanceResult> reused;
    if (opts.resume) reused = load_ledger(opts.audit_path);
    else if (!opts.audit_path.empty() && std::filesystem::exists(opts.audit_path))
        std::filesystem::remove(opts.audit_path);

    std::vector<InstanceResult> results;
    std::vector<const BenchInstance*> todo;
    for (const auto& inst : dataset) {
        if (auto it = reused.find(inst.id); it != reused.end()) results.push_back(it->second);
        else todo.push_back(&inst);
    }
    if (opts.max_instances && todo.size() > *opts.max_instances) todo.resize(*opts.max_instances);
    if (!reused.empty()) spdlog::info("resuming: {} instance(s) already done, {} to run", results.size(), todo.size());

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= todo.size()) return;
            auto res = score_instance(*todo[i], model);
            std::lock_guard lock(mu);
            if (res.error) spdlog::warn("instance {} failed: {}", res.id, *res.error);
            if (!opts.audit_path.empty()) append_line(opts.audit_path, to_json(res).dump());
            results.push_back(std::move(res));
        }
    };
    auto threads = static_cast<std::size_t>(std::max(1, opts.max_concurrency));
    threads = std::min(threads, std::max<std::size_t>(1, todo.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    auto report = build_report(std::move(results), dataset.size());
    if (!report.failed.empty())
        spdlog::warn("{} of {} instance(s) failed and are excluded from the metrics", report.failed.size(),
                     dataset.size());
    return report;
}

}  // namespace shepherd
