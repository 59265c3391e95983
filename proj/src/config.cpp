#include "shepherd/config.hpp"

#include "shepherd/error.hpp"
#include "shepherd/http_backend.hpp"
#include "shepherd/mock.hpp"
#include "shepherd/rng.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <initializer_list>

namespace shepherd {

namespace fs = std::filesystem;

std::string interpolate_env(std::string_view text) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text.compare(i, 3, "$${") == 0) {
            out += "${";
            i += 2;
            continue;
        }
        if (text.compare(i, 2, "${") == 0) {
            auto close = text.find('}', i + 2);
            if (close == std::string_view::npos) throw ConfigError("config: unterminated ${...}");
            std::string name(text.substr(i + 2, close - i - 2));
            const char* value = std::getenv(name.c_str());
            if (!value) throw ConfigError(fmt::format("config: environment variable {} is not set", name));
            out += value;
            i = close;
            continue;
        }
        out += text[i];
    }
    return out;
}

namespace {

void check_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(fmt::format("config: {} must be an object", where));
    for (const auto& [key, v] : j.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError(fmt::format("config: unknown key \"{}\" in {}", key, where));
    }
}

template <typename T>
void read(const Json& j, const char* key, T& target) {
    if (!j.contains(key)) return;
    try {
        target = j[key].get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(fmt::format("config: \"{}\" has the wrong type", key));
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    if (!fs::exists(path)) throw ConfigError(fmt::format("config: file not found: {}", path.string()));
    return path;
}

BackendSpec parse_backend(const Json& j, const fs::path& base, const std::string& role) {
    check_keys(j, "backends." + role,
               {"type", "fixtures", "logprobs", "base_url", "model", "api_key_env", "timeout_s"});
    BackendSpec b;
    std::string type = "mock";
    read(j, "type", type);
    if (type == "mock") b.type = BackendSpec::Type::Mock;
    else if (type == "http") b.type = BackendSpec::Type::Http;
    else throw ConfigError(fmt::format("config: backend type must be mock or http, got '{}'", type));
    if (j.contains("fixtures")) b.fixtures = resolve(base, j["fixtures"].get<std::string>());
    read(j, "logprobs", b.logprobs);
    read(j, "base_url", b.base_url);
    read(j, "model", b.model);
    read(j, "api_key_env", b.api_key_env);
    read(j, "timeout_s", b.timeout_s);
    if (b.type == BackendSpec::Type::Http && b.model.empty())
        throw ConfigError(fmt::format("config: http backend '{}' needs a model", role));
    return b;
}

CostModel parse_cost_model(const Json& j, const std::string& name) {
    check_keys(j, "cost_models." + name,
               {"type", "input_usd_per_mtok", "output_usd_per_mtok", "usd_per_hour", "tokens_per_minute"});
    std::string type;
    read(j, "type", type);
    CostModel m;
    if (type == "api") {
        ApiPricing p;
        read(j, "input_usd_per_mtok", p.input_usd_per_mtok);
        read(j, "output_usd_per_mtok", p.output_usd_per_mtok);
        m = p;
    } else if (type == "gpu") {
        GpuHosting g;
        read(j, "usd_per_hour", g.usd_per_hour);
        read(j, "tokens_per_minute", g.tokens_per_minute);
        m = g;
    } else {
        throw ConfigError(fmt::format("config: cost model '{}' needs type api or gpu", name));
    }
    validate_cost_model(m);
    return m;
}

}  // namespace

HarnessConfig parse_config(std::string_view text, const fs::path& base_dir) {
    Json j;
    try {
        j = Json::parse(interpolate_env(text));
    } catch (const Json::exception& e) {
        throw ConfigError(fmt::format("config: invalid JSON: {}", e.what()));
    }
    check_keys(j, "config",
               {"seed", "max_concurrency", "output_dir", "resume", "backends", "reward", "search", "geval", "retry",
                "cost_models"});

    HarnessConfig cfg;
    try {
        read(j, "seed", cfg.seed);
        read(j, "max_concurrency", cfg.max_concurrency);
        if (j.contains("output_dir")) {
            fs::path out = j["output_dir"].get<std::string>();
            cfg.output_dir = out.is_relative() ? base_dir / out : out;
        }
        read(j, "resume", cfg.resume);

        if (j.contains("backends")) {
            check_keys(j["backends"], "backends", {"policy", "reward", "judge"});
            for (const auto& [role, spec] : j["backends"].items()) cfg.backends[role] = parse_backend(spec, base_dir, role);
        }

        if (j.contains("reward")) {
            const auto& r = j["reward"];
            check_keys(r, "reward", {"mode", "style", "strategy", "verbalizer", "history_cap", "axtree_chars", "search_prompts"});
            if (r.contains("mode")) cfg.reward.mode = parse_reward_mode(r["mode"].get<std::string>());
            if (r.contains("style")) {
                auto style = r["style"].get<std::string>();
                if (style == "baseline") cfg.reward.style = ChecklistStyle::Baseline;
                else if (style == "shepherd") cfg.reward.style = ChecklistStyle::Shepherd;
                else throw ConfigError(fmt::format("config: reward.style must be baseline or shepherd, got '{}'", style));
            }
            if (r.contains("strategy")) cfg.reward.strategy = ScoringStrategy::parse(r["strategy"].get<std::string>());
            if (r.contains("verbalizer"))
                cfg.reward.verbalizer = VerbalizerTable::from_file(resolve(base_dir, r["verbalizer"].get<std::string>()).string());
            read(r, "history_cap", cfg.reward.history_cap);
            read(r, "axtree_chars", cfg.reward.axtree_chars);
            read(r, "search_prompts", cfg.reward.search_prompts);
        }

        if (j.contains("search")) {
            const auto& s = j["search"];
            check_keys(s, "search",
                       {"n_policy_samples", "policy_temperature", "policy_top_p", "top_n_candidates", "refine",
                        "max_refinements", "max_steps", "history_cap", "axtree_chars"});
            read(s, "n_policy_samples", cfg.search.n_policy_samples);
            read(s, "policy_temperature", cfg.search.policy_temperature);
            read(s, "policy_top_p", cfg.search.policy_top_p);
            read(s, "top_n_candidates", cfg.search.top_n_candidates);
            read(s, "refine", cfg.search.refine);
            read(s, "max_refinements", cfg.search.max_refinements);
            read(s, "max_steps", cfg.search.max_steps);
            read(s, "history_cap", cfg.search.history_cap);
            read(s, "axtree_chars", cfg.search.axtree_chars);
            cfg.search.validate();
        }

        if (j.contains("geval")) {
            const auto& g = j["geval"];
            check_keys(g, "geval", {"ratings", "attempts", "temperature"});
            read(g, "ratings", cfg.geval.ratings);
            read(g, "attempts", cfg.geval.attempts);
            read(g, "temperature", cfg.geval.temperature);
        }

        if (j.contains("retry")) {
            check_keys(j["retry"], "retry", {"delays_ms"});
            std::vector<long> delays;
            read(j["retry"], "delays_ms", delays);
            cfg.retry.delays.clear();
            for (auto d : delays) {
                if (d < 0) throw ConfigError("config: retry delays must be >= 0");
                cfg.retry.delays.emplace_back(d);
            }
        }

        if (j.contains("cost_models")) {
            if (!j["cost_models"].is_object()) throw ConfigError("config: cost_models must be an object");
            for (const auto& [name, m] : j["cost_models"].items()) cfg.cost_models[name] = parse_cost_model(m, name);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

HarnessConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError(fmt::format("config file not found: {}", path.string()));
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.parent_path().empty() ? fs::current_path() : path.parent_path());
}

BackendPtr make_backend(const HarnessConfig& cfg, const std::string& role, const std::shared_ptr<RequestSlots>& slots) {
    const BackendSpec* spec = nullptr;
    if (auto it = cfg.backends.find(role); it != cfg.backends.end()) spec = &it->second;
    else if (auto rw = cfg.backends.find("reward"); rw != cfg.backends.end()) spec = &rw->second;

    BackendPtr base;
    if (!spec || spec->type == BackendSpec::Type::Mock) {
        MockFixtures fixtures;
        if (spec && !spec->fixtures.empty()) fixtures = MockFixtures::from_file(spec->fixtures);
        base = std::make_shared<MockBackend>(std::move(fixtures), derive_seed(cfg.seed, "mock/" + role),
                                             spec ? spec->logprobs : true, "mock-" + role);
    } else {
        HttpBackendConfig http;
        if (!spec->base_url.empty()) http.base_url = spec->base_url;
        http.model = spec->model;
        http.api_key_env = spec->api_key_env;
        http.timeout = std::chrono::seconds(spec->timeout_s);
        http.logprobs = spec->logprobs;
        base = std::make_shared<HttpChatBackend>(std::move(http));
    }
    auto retrying = std::make_shared<RetryingBackend>(std::move(base), cfg.retry);
    return std::make_shared<ConcurrencyLimitedBackend>(std::move(retrying), slots);
}

}  // namespace shepherd
