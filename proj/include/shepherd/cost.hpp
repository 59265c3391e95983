#pragma once

// Cost per 1,000 judged instances, for API-priced and self-hosted models.

#include "shepherd/backend.hpp"

#include <map>
#include <string>
#include <variant>

namespace shepherd {

struct ApiPricing {
    double input_usd_per_mtok = 0.0;
    double output_usd_per_mtok = 0.0;
};

struct GpuHosting {
    double usd_per_hour = 0.0;
    double tokens_per_minute = 0.0;  // input + output tokens processed per minute
};

using CostModel = std::variant<ApiPricing, GpuHosting>;

/// Throws ConfigError unless every rate is positive and finite.
void validate_cost_model(const CostModel& m);

/// USD for 1,000 instances that each use `usage` tokens.
double estimate_cost_per_1k(const TokenUsage& usage, const CostModel& model);

/// Throughput that makes a GpuHosting model cost `usd_per_1k` for `usage`.
double calibrate_tokens_per_minute(const TokenUsage& usage, double usd_per_hour, double usd_per_1k);

/// Built-in models: "gpt-4o" (5 / 15 USD per Mtok), "claude-3.7-sonnet"
/// (3 / 15), and "web-shepherd-3b" (one A100 at 1.19 USD/h with throughput
/// calibrated to 4.67 USD per 1k instances at 81,287 / 1,953 tokens).
const std::map<std::string, CostModel>& builtin_cost_models();

inline constexpr double kWebShepherd3bTokensPerMinute = 353517.4875;

}  // namespace shepherd
