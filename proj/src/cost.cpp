#include "shepherd/cost.hpp"

#include "shepherd/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace shepherd {

namespace {

void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(fmt::format("cost model: {} must be positive", what));
}

}  // namespace

void validate_cost_model(const CostModel& m) {
    if (const auto* api = std::get_if<ApiPricing>(&m)) {
        require_positive(api->input_usd_per_mtok, "input_usd_per_mtok");
        require_positive(api->output_usd_per_mtok, "output_usd_per_mtok");
    } else {
        const auto& gpu = std::get<GpuHosting>(m);
        require_positive(gpu.usd_per_hour, "usd_per_hour");
        require_positive(gpu.tokens_per_minute, "tokens_per_minute");
    }
}

double estimate_cost_per_1k(const TokenUsage& usage, const CostModel& model) {
    validate_cost_model(model);
    auto in = static_cast<double>(usage.input_tokens);
    auto out = static_cast<double>(usage.output_tokens);
    if (const auto* api = std::get_if<ApiPricing>(&model))
        return 1000.0 * (in * api->input_usd_per_mtok + out * api->output_usd_per_mtok) / 1e6;
    const auto& gpu = std::get<GpuHosting>(model);
    return 1000.0 * ((in + out) / gpu.tokens_per_minute) * (gpu.usd_per_hour / 60.0);
}

double calibrate_tokens_per_minute(const TokenUsage& usage, double usd_per_hour, double usd_per_1k) {
    require_positive(usd_per_hour, "usd_per_hour");
    require_positive(usd_per_1k, "usd_per_1k");
    auto tokens = static_cast<double>(usage.input_tokens + usage.output_tokens);
    return 1000.0 * tokens * (usd_per_hour / 60.0) / usd_per_1k;
}

const std::map<std::string, CostModel>& builtin_cost_models() {
    static const std::map<std::string, CostModel> models{
        {"gpt-4o", ApiPricing{5.0, 15.0}},
        {"claude-3.7-sonnet", ApiPricing{3.0, 15.0}},
        {"web-shepherd-3b", GpuHosting{1.19, kWebShepherd3bTokensPerMinute}},
    };
    return models;
}

}  // namespace shepherd
