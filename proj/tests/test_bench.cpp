#include "doctest.h"
#include "oracles.hpp"

#include "shepherd/bench.hpp"
#include "shepherd/error.hpp"

#include <atomic>
#include <fstream>
#include <stdexcept>

using namespace shepherd;

namespace {

Json minimal_instance() {
    return Json::parse(R"json({
        "task": {"id": "t1", "intent": "Find the forum post"},
        "trajectory_id": "traj-1", "step_index": 2, "subset": "forum",
        "observation": {"url": "http://forum.test/", "axtree": "[1] link 'Posts'"},
        "chosen": {"thought": "open posts", "action": "click('1')"},
        "rejected": ["click('2')", {"action": "scroll('down')"}, "hover('1')", "noop()"],
        "reference_checklist": [{"title": "Open posts", "goal_desc": "Go to the posts page"}]
    })json");
}

// Rank by placing the chosen entry after every equal rival in a descending sort.
int oracle_rank(const std::vector<double>& rewards, std::size_t chosen) {
    std::vector<std::pair<double, int>> order;
    for (std::size_t i = 0; i < rewards.size(); ++i) order.emplace_back(rewards[i], i == chosen ? 1 : 0);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i].second == 1) return static_cast<int>(i + 1);
    return -1;
}

InstanceResult ok(const std::string& id, const std::string& traj, const std::string& subset, int rank) {
    InstanceResult r;
    r.id = id;
    r.trajectory_id = traj;
    r.subset = subset;
    r.rank = rank;
    r.rewards = {0.5, 0.1, 0.2, 0.3, 0.4};
    return r;
}

RewardModelConfig oneres() {
    RewardModelConfig cfg;
    cfg.strategy = ScoringStrategy::parse("1res");
    return cfg;
}

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
    return n;
}

}  // namespace

TEST_CASE("bench instance parsing") {
    auto b = bench_instance_from_json(minimal_instance());
    CHECK(b.id == "traj-1/2");
    CHECK(b.subset == "forum");
    CHECK(b.chosen.thought == "open posts");
    CHECK(b.rejected.size() == 4);
    REQUIRE(b.reference_checklist);
    CHECK(b.reference_checklist->items[0].goal_desc == "Go to the posts page");

    auto back = bench_instance_from_json(to_json(b));
    CHECK(to_json(back) == to_json(b));

    auto j = minimal_instance();
    j["rejected"].erase(3);
    CHECK_THROWS_AS(bench_instance_from_json(j), ParseError);
    j = minimal_instance();
    j["rejected"][0] = "click(\"1\")";
    CHECK_THROWS_AS(bench_instance_from_json(j), ParseError);
    j = minimal_instance();
    j.erase("observation");
    CHECK_THROWS_AS(bench_instance_from_json(j), ParseError);
    j = minimal_instance();
    j["chosen"]["action"] = "click(";
    CHECK_THROWS_AS(bench_instance_from_json(j), ParseError);
}

TEST_CASE("bench JSONL reports the failing line") {
    auto line = minimal_instance().dump();
    CHECK(parse_bench_jsonl(line + "\n\n").size() == 1);
    try {
        parse_bench_jsonl(line + "\n" + line + "\n");
        FAIL("expected a duplicate id error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_bench_jsonl(line + "\n{oops\n"), ParseError);
}

TEST_CASE("rank_of_chosen") {
    CHECK(rank_of_chosen({0.9, 0.1, 0.2, 0.3, 0.4}, 0) == 1);
    CHECK(rank_of_chosen({0.1, 0.9, 0.2, 0.3, 0.4}, 0) == 5);
    CHECK(rank_of_chosen({0.5, 0.5, 0.5, 0.5, 0.5}, 0) == 5);
    CHECK(rank_of_chosen({0.5, 0.6, 0.5, 0.1, 0.0}, 0) == 3);
    CHECK(rank_of_chosen({0.5}, 0) == 1);
    CHECK_THROWS_AS(rank_of_chosen({0.5}, 1), std::out_of_range);

    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> r(1 + rng.below(6));
        for (auto& v : r) v = static_cast<double>(rng.below(4)) / 3.0;
        auto c = rng.below(r.size());
        CHECK(rank_of_chosen(r, c) == oracle_rank(r, c));
    }
}

TEST_CASE("compute_metrics on a hand-worked example") {
    // traj a: ranks 1, 1; traj b: ranks 1, 3; traj c: rank 2
    auto m = compute_metrics({{"a", 1}, {"b", 1}, {"a", 1}, {"b", 3}, {"c", 2}});
    CHECK(m.mrr == doctest::Approx((1 + 1 + 1 + 1.0 / 3 + 0.5) / 5));
    CHECK(m.step_accuracy == doctest::Approx(0.6));
    CHECK(m.trajectory_accuracy == doctest::Approx(1.0 / 3));
    CHECK(m.instances == 5);
    CHECK(m.trajectories == 3);
    CHECK_THROWS_AS(compute_metrics({}), EmptyResults);
    CHECK_THROWS_AS(compute_metrics({{"a", 0}}), std::invalid_argument);
}

TEST_CASE("build_report groups, sorts and counts") {
    std::vector<InstanceResult> results{ok("c", "t2", "forum", 2), ok("a", "t1", "shopping", 1),
                                        ok("b", "t1", "shopping", 1)};
    InstanceResult bad;
    bad.id = "d";
    bad.trajectory_id = "t3";
    bad.subset = "forum";
    bad.error = "judge down";
    results.push_back(bad);

    auto report = build_report(results, 6);
    REQUIRE(report.per_instance.size() == 3);
    CHECK(report.per_instance[0].id == "a");
    CHECK(report.per_instance[2].id == "c");
    CHECK(report.failed.size() == 1);
    CHECK(report.pending == 2);
    CHECK(report.partial());
    CHECK(report.overall.mrr == doctest::Approx((1 + 1 + 0.5) / 3));
    CHECK(report.subsets.at("forum").step_accuracy == 0.0);
    CHECK(report.subsets.at("shopping").trajectory_accuracy == 1.0);

    CHECK(report_to_csv(report) ==
          "subset,mrr,acc_step,acc_traj,instances\n"
          "forum,0.500000,0.000000,0.000000,1\n"
          "shopping,1.000000,1.000000,1.000000,2\n"
          "all,0.833333,0.666667,0.500000,3\n");

    auto j = Json::parse(report_to_json(report));
    CHECK(j["failed"] == 1);
    CHECK(j["pending"] == 2);
    CHECK(j["partial"] == true);
    CHECK(j["per_instance"].size() == 3);
    CHECK(j["failed_instances"][0]["error"] == "judge down");

    std::reverse(results.begin(), results.end());
    CHECK(report_to_json(build_report(results, 6)) == report_to_json(report));

    auto round = instance_result_from_json(to_json(results[0]));
    CHECK(round.error == results[0].error);
    auto good = instance_result_from_json(to_json(ok("x", "t", "s", 4)));
    CHECK(good.rank == 4);
    CHECK(good.rewards.size() == 5);
}

TEST_CASE("run_bench with planted oracles") {
    auto bench = testing::synthetic_bench(20, 3);
    BenchOptions opts;
    opts.max_concurrency = 4;

    RewardModel oracle(testing::bench_judge(bench.chosen_by_url), oneres());
    auto good = run_bench(bench.instances, oracle, opts);
    CHECK(good.overall.mrr == 1.0);
    CHECK(good.overall.step_accuracy == 1.0);
    CHECK(good.overall.trajectory_accuracy == 1.0);
    CHECK(good.failed.empty());

    RewardModel anti(testing::bench_judge(bench.chosen_by_url, true), oneres());
    auto bad = run_bench(bench.instances, anti, opts);
    CHECK(bad.overall.step_accuracy == 0.0);
    CHECK(bad.overall.mrr == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(bad.overall.trajectory_accuracy == 0.0);

    CHECK_THROWS_AS(run_bench({}, oracle, opts), EmptyResults);
}

TEST_CASE("run_bench records failures per instance") {
    auto bench = testing::synthetic_bench(8, 4);
    auto inner = testing::bench_judge(bench.chosen_by_url);
    auto broken_url = bench.instances[5].observation.url;
    auto judge = std::make_shared<FunctionBackend>(
        "flaky",
        [&](const CompletionRequest& r) {
            if (testing::prompt_url(r.prompt.flatten()) == broken_url)
                throw BackendError(BackendError::Kind::Server, 500, "boom");
            return inner->complete(r);
        },
        false);
    RewardModel model(judge, oneres());
    testing::TempDir dir("bench");
    BenchOptions opts;
    opts.audit_path = dir / "audit.jsonl";
    auto report = run_bench(bench.instances, model, opts);
    CHECK(report.per_instance.size() == 7);
    REQUIRE(report.failed.size() == 1);
    CHECK(report.failed[0].id == bench.instances[5].id);
    CHECK(report.overall.mrr == 1.0);
    CHECK(count_lines(opts.audit_path) == 8);
}

TEST_CASE("run_bench resumes from the audit ledger") {
    auto bench = testing::synthetic_bench(12, 5);
    std::atomic<int> calls{0};
    auto inner = testing::bench_judge(bench.chosen_by_url);
    auto judge = std::make_shared<FunctionBackend>(
        "counted",
        [&](const CompletionRequest& r) {
            ++calls;
            return inner->complete(r);
        },
        false);
    RewardModel model(judge, oneres());
    testing::TempDir dir("resume");

    BenchOptions full;
    full.audit_path = dir / "full.jsonl";
    auto expected = report_to_json(run_bench(bench.instances, model, full));

    BenchOptions opts;
    opts.audit_path = dir / "audit.jsonl";
    opts.max_instances = 5;
    calls = 0;
    auto first = run_bench(bench.instances, model, opts);
    CHECK(calls == 25);
    CHECK(first.per_instance.size() == 5);
    CHECK(first.pending == 7);
    CHECK(first.partial());
    CHECK(count_lines(opts.audit_path) == 5);

    std::ofstream(opts.audit_path, std::ios::app) << "{\"id\": \"inst-011\", \"status\": \"o";  // torn write

    opts.resume = true;
    opts.max_instances.reset();
    calls = 0;
    auto second = run_bench(bench.instances, model, opts);
    CHECK(calls == 35);
    CHECK_FALSE(second.partial());
    CHECK(report_to_json(second) == expected);

    // Without resume the ledger starts over.
    opts.resume = false;
    calls = 0;
    run_bench(bench.instances, model, opts);
    CHECK(calls == 60);
    CHECK(count_lines(opts.audit_path) == 12);
}
