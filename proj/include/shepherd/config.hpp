#pragma once

// Experiment manifest: one JSON file with ${VAR} interpolation; command-line
// flags override file values.

#include "shepherd/backend.hpp"
#include "shepherd/checklist.hpp"
#include "shepherd/cost.hpp"
#include "shepherd/io.hpp"
#include "shepherd/scorer.hpp"
#include "shepherd/search.hpp"

#include <filesystem>
#include <map>

namespace shepherd {

struct BackendSpec {
    enum class Type { Mock, Http };
    Type type = Type::Mock;
    // mock
    std::filesystem::path fixtures;  // empty: every prompt gets the default reply
    bool logprobs = true;
    // http
    std::string base_url;
    std::string model;
    std::string api_key_env = "SHEPHERD_API_KEY";
    int timeout_s = 120;
};

struct HarnessConfig {
    std::uint64_t seed = 0;
    int max_concurrency = 8;
    std::filesystem::path output_dir = "shepherd-out";
    bool resume = false;

    std::map<std::string, BackendSpec> backends;  // "policy", "reward", "judge"
    RewardModelConfig reward;
    SearchConfig search;
    GevalOptions geval;
    RetryPolicy retry;
    std::map<std::string, CostModel> cost_models = builtin_cost_models();
};

/// Replaces ${NAME} with the environment variable's value. Throws
/// ConfigError for unset variables; "$${" escapes a literal "${".
std::string interpolate_env(std::string_view text);

/// Parses a manifest. Relative paths resolve against `base_dir`. Throws
/// ConfigError on unknown keys or bad values, and when a referenced file
/// does not exist.
HarnessConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
HarnessConfig load_config(const std::filesystem::path& path);

/// Builds the backend for `role`, wrapped with retries and the shared
/// concurrency limit. Roles without an entry fall back to "reward", then to
/// an empty mock.
BackendPtr make_backend(const HarnessConfig& cfg, const std::string& role,
                        const std::shared_ptr<RequestSlots>& slots);

}  // namespace shepherd
