#include "shepherd/mock.hpp"

#include "shepherd/error.hpp"
#include "shepherd/rng.hpp"

#include <fmt/format.h>

namespace shepherd {

namespace {

MockFixtures::Mode parse_mode(const Json& j) {
    auto s = j.get<std::string>();
    if (s == "sequence") return MockFixtures::Mode::Sequence;
    if (s == "sample") return MockFixtures::Mode::Sample;
    throw ParseError(fmt::format("mock fixtures: unknown mode '{}'", s));
}

std::string_view mode_name(MockFixtures::Mode m) { return m == MockFixtures::Mode::Sample ? "sample" : "sequence"; }

MockFixtures::Entry parse_entry(const Json& j) {
    MockFixtures::Entry e;
    const Json* variants = &j;
    if (j.is_object()) {
        if (!j.contains("variants")) throw ParseError("mock fixture entry needs \"variants\"");
        variants = &j["variants"];
        if (j.contains("mode")) e.mode = parse_mode(j["mode"]);
    }
    if (!variants->is_array() || variants->empty()) throw ParseError("mock fixture variants must be a non-empty array");
    for (const auto& v : *variants) e.variants.push_back(completion_from_json(v));
    return e;
}

Json entry_to_json(const MockFixtures::Entry& e) {
    Json variants = Json::array();
    for (const auto& v : e.variants) variants.push_back(shepherd::to_json(v));
    Json j{{"variants", variants}};
    if (e.mode) j["mode"] = mode_name(*e.mode);
    return j;
}

std::int64_t estimate_tokens(std::size_t bytes) { return static_cast<std::int64_t>((bytes + 3) / 4); }

}  // namespace

MockFixtures MockFixtures::from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("mock fixtures must be a JSON object");
    MockFixtures f;
    if (j.contains("mode")) f.mode = parse_mode(j["mode"]);
    if (j.contains("strict")) f.strict = j["strict"].get<bool>();
    if (j.contains("default") && !j["default"].is_null()) f.default_response = completion_from_json(j["default"]);
    if (j.contains("fixtures"))
        for (const auto& [key, entry] : j["fixtures"].items()) f.by_fingerprint[key] = parse_entry(entry);
    if (j.contains("rules")) {
        for (const auto& r : j["rules"]) {
            Rule rule;
            if (!r.contains("contains")) throw ParseError("mock rule needs \"contains\"");
            if (r["contains"].is_string()) rule.contains.push_back(r["contains"].get<std::string>());
            else
                for (const auto& s : r["contains"]) rule.contains.push_back(s.get<std::string>());
            rule.entry = parse_entry(r);
            f.rules.push_back(std::move(rule));
        }
    }
    return f;
}

MockFixtures MockFixtures::from_file(const std::filesystem::path& path) {
    try {
        return from_json(parse_json(read_text_file(path), path.string()));
    } catch (const Json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

Json MockFixtures::to_json() const {
    Json j{{"mode", mode_name(mode)}, {"strict", strict}};
    if (default_response) j["default"] = shepherd::to_json(*default_response);
    Json fx = Json::object();
    for (const auto& [k, e] : by_fingerprint) fx[k] = entry_to_json(e);
    j["fixtures"] = fx;
    Json rules_json = Json::array();
    for (const auto& r : rules) {
        auto e = entry_to_json(r.entry);
        e["contains"] = r.contains;
        rules_json.push_back(e);
    }
    j["rules"] = rules_json;
    return j;
}

MockBackend::MockBackend(MockFixtures fixtures, std::uint64_t seed, bool logprobs, std::string name)
    : fixtures_(std::move(fixtures)), seed_(seed), logprobs_(logprobs), name_(std::move(name)) {}

const MockFixtures::Entry* MockBackend::match(const std::string& fingerprint, const std::string& normalized) const {
    if (auto it = fixtures_.by_fingerprint.find(fingerprint); it != fixtures_.by_fingerprint.end()) return &it->second;
    for (const auto& rule : fixtures_.rules) {
        bool all = true;
        for (const auto& s : rule.contains)
            if (normalized.find(s) == std::string::npos) {
                all = false;
                break;
            }
        if (all) return &rule.entry;
    }
    return nullptr;
}

std::vector<Completion> MockBackend::complete(const CompletionRequest& request) {
    if (request.n < 1) throw BackendError(BackendError::Kind::Client, 400, "n must be >= 1");
    auto normalized = normalize_prompt(request.prompt);
    auto fingerprint = sha256_hex(normalized);
    const auto* entry = match(fingerprint, normalized);

    std::vector<Completion> out;
    if (!entry) {
        if (fixtures_.strict) throw FixtureMiss(fmt::format("no mock fixture for prompt {}", fingerprint));
        out.assign(static_cast<std::size_t>(request.n), fixtures_.default_response.value_or(Completion{}));
    } else {
        auto mode = entry->mode.value_or(fixtures_.mode);
        const auto& v = entry->variants;
        if (mode == MockFixtures::Mode::Sequence) {
            for (int i = 0; i < request.n; ++i) out.push_back(v[static_cast<std::size_t>(i) % v.size()]);
        } else {
            Rng rng(derive_seed(seed_ ^ splitmix64(request.seed.value_or(0)), fingerprint));
            for (int i = 0; i < request.n; ++i) out.push_back(v[rng.below(v.size())]);
        }
    }

    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& c = out[i];
        if (!request.logprobs || !logprobs_) c.tokens.clear();
        if (c.usage == TokenUsage{}) {
            c.usage.input_tokens = i == 0 ? estimate_tokens(normalized.size()) : 0;
            c.usage.output_tokens = estimate_tokens(c.text.size());
        }
    }
    return out;
}

}  // namespace shepherd
