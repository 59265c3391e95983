#pragma once

// Reward-model benchmark: each instance pairs one chosen action with four
// rejected ones; the reward model ranks all five. Reports MRR, step accuracy
// and trajectory accuracy, with a per-instance audit log that doubles as the
// resume ledger.

#include "shepherd/io.hpp"
#include "shepherd/scorer.hpp"

#include <filesystem>
#include <map>

namespace shepherd {

struct BenchCandidate {
    std::string thought;
    Action action;
};

struct BenchInstance {
    std::string id;
    TaskSpec task;
    Trajectory history;
    Observation observation;
    BenchCandidate chosen;
    std::vector<BenchCandidate> rejected;  // exactly kBenchRejected
    std::optional<Checklist> reference_checklist;
    std::string trajectory_id;
    int step_index = 0;
    std::string subset;
};

inline constexpr std::size_t kBenchRejected = 4;

/// Throws ParseError on schema violations, including a rejected count other
/// than four or a rejected action equal to the chosen one.
BenchInstance bench_instance_from_json(const Json& j);
Json to_json(const BenchInstance& b);

/// One instance per non-blank line. Throws ParseError with the line number.
std::vector<BenchInstance> parse_bench_jsonl(std::string_view text);
std::vector<BenchInstance> load_bench(const std::filesystem::path& path);

/// 1-based rank of rewards[chosen] under descending order; equal rewards
/// rank ahead of the chosen one. Throws std::out_of_range.
int rank_of_chosen(const std::vector<double>& rewards, std::size_t chosen);

struct RankedStep {
    std::string trajectory_id;
    int rank = 0;
};

struct Metrics {
    double mrr = 0.0;
    double step_accuracy = 0.0;
    double trajectory_accuracy = 0.0;
    std::size_t instances = 0;
    std::size_t trajectories = 0;
};

/// Throws EmptyResults on empty input.
Metrics compute_metrics(const std::vector<RankedStep>& results);

struct InstanceResult {
    std::string id;
    std::string trajectory_id;
    int step_index = 0;
    std::string subset;
    int rank = 0;
    std::vector<double> rewards;  // chosen first, then the rejected in input order
    std::optional<std::string> error;
};

Json to_json(const InstanceResult& r);
InstanceResult instance_result_from_json(const Json& j);

struct BenchReport {
    Metrics overall;
    std::map<std::string, Metrics> subsets;
    std::vector<InstanceResult> per_instance;  // successful, sorted by id
    std::vector<InstanceResult> failed;        // sorted by id
    std::size_t pending = 0;                   // instances not attempted yet
    bool partial() const { return !failed.empty() || pending > 0; }
};

/// Builds the report from per-instance results (any order).
BenchReport build_report(std::vector<InstanceResult> results, std::size_t total_instances);

std::string report_to_json(const BenchReport& r);
/// Rows: subset,mrr,acc_step,acc_traj,instances (subsets, then "all").
std::string report_to_csv(const BenchReport& r);

struct BenchOptions {
    std::filesystem::path audit_path;  // per-instance JSONL; empty disables
    bool resume = false;               // reuse successful entries in audit_path
    int max_concurrency = 8;
    std::optional<std::size_t> max_instances;  // stop after this many new instances
};

/// Scores every instance (chosen + rejected). Per-instance failures are
/// recorded in the report, not thrown. Throws EmptyResults for an empty
/// dataset.
BenchReport run_bench(const std::vector<BenchInstance>& dataset, RewardModel& model, const BenchOptions& opts);

}  // namespace shepherd
