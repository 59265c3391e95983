#include "shepherd/reward.hpp"

#include "shepherd/error.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace shepherd {

namespace {

constexpr std::string_view kSpaceMark = "\xC4\xA0";    // Ġ
constexpr std::string_view kNewlineMark = "\xC4\x8A";  // Ċ

std::size_t label_index(JudgmentLabel l) { return static_cast<std::size_t>(l); }

// Length of the decoded text a token stands for.
std::size_t decoded_length(std::string_view token) {
    if (token.starts_with(kSpaceMark) || token.starts_with(kNewlineMark)) return token.size() - 1;
    return token.size();
}

}  // namespace

std::string normalize_token(std::string_view token) {
    if (token.empty()) return {};
    if (token.front() == ' ') return std::string(kSpaceMark) + std::string(token.substr(1));
    if (token.front() == '\n') return std::string(kNewlineMark) + std::string(token.substr(1));
    return std::string(token);
}

VerbalizerTable::VerbalizerTable(std::vector<std::string> yes, std::vector<std::string> in_progress,
                                 std::vector<std::string> no) {
    aliases_[label_index(JudgmentLabel::Yes)] = std::move(yes);
    aliases_[label_index(JudgmentLabel::InProgress)] = std::move(in_progress);
    aliases_[label_index(JudgmentLabel::No)] = std::move(no);
    std::set<std::string> seen;
    for (const auto& list : aliases_) {
        if (list.empty()) throw ConfigError("verbalizer: every label needs at least one alias");
        std::set<std::string> own(list.begin(), list.end());
        for (const auto& a : own)
            if (!seen.insert(a).second) throw ConfigError(fmt::format("verbalizer: alias '{}' listed for two labels", a));
    }
}

const VerbalizerTable& VerbalizerTable::defaults() {
    static const VerbalizerTable table(
        {"ĠYes", "Yes", "ĊYes", "Ġyes", "yes", "Ċyes", "ĠYES", "YES", "ĊYES", "ĠDone", "Done", "ĊDone", "ĠCompleted",
         "Completed", "ĊCompleted", "ĠCorrect", "Correct", "ĊCorrect"},
        {"ĠIn", "In", "ĊIn", "ĠPending", "Pending", "ĊPending", "ĠPart", "Part", "ĊPart", "ĠPartial", "Partial",
         "ĊPartial", "ĠInProgress", "InProgress", "ĊInProgress"},
        {"ĠNo", "No", "ĊNo", "ĠNO", "NO", "ĊNO", "ĠNot", "Not", "ĊNot", "ĠNone", "None", "ĊNone", "ĠNope", "Nope",
         "ĊNope", "ĠUn", "Un", "ĊUn", "ĠWrong", "Wrong", "ĊWrong"});
    return table;
}

VerbalizerTable VerbalizerTable::from_json(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("verbalizer: invalid JSON: {}", e.what()));
    }
    auto list = [&](const char* key) {
        if (!j.is_object() || !j.contains(key) || !j[key].is_array())
            throw ConfigError(fmt::format("verbalizer: missing array \"{}\"", key));
        std::vector<std::string> out;
        for (const auto& v : j[key]) {
            if (!v.is_string()) throw ConfigError(fmt::format("verbalizer: non-string alias under \"{}\"", key));
            out.push_back(v.get<std::string>());
        }
        return out;
    };
    return VerbalizerTable(list("Yes"), list("In Progress"), list("No"));
}

VerbalizerTable VerbalizerTable::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("verbalizer: cannot open {}", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

const std::vector<std::string>& VerbalizerTable::aliases(JudgmentLabel label) const {
    return aliases_[label_index(label)];
}

std::optional<JudgmentLabel> VerbalizerTable::lookup(std::string_view token) const {
    auto normalized = normalize_token(token);
    for (auto label : {JudgmentLabel::Yes, JudgmentLabel::InProgress, JudgmentLabel::No})
        for (const auto& a : aliases_[label_index(label)])
            if (a == token || a == normalized) return label;
    return std::nullopt;
}

std::string VerbalizerTable::serialize() const {
    std::string out;
    for (auto label : {JudgmentLabel::Yes, JudgmentLabel::No, JudgmentLabel::InProgress}) {
        std::vector<std::string> quoted;
        for (const auto& a : aliases_[label_index(label)]) quoted.push_back(fmt::format("\"{}\"", a));
        out += fmt::format("{}: [{}]\n", label_name(label), join(quoted, ", "));
    }
    return out;
}

LabelDistribution LabelDistribution::one_hot(JudgmentLabel label) {
    LabelDistribution d;
    switch (label) {
        case JudgmentLabel::Yes: d.p_yes = 1.0; break;
        case JudgmentLabel::InProgress: d.p_inprogress = 1.0; break;
        case JudgmentLabel::No: d.p_no = 1.0; break;
    }
    return d;
}

LabelDistribution extract_label_distribution(const TokenAlternatives& token_logprobs, const VerbalizerTable& table) {
    std::array<double, 3> mass{0.0, 0.0, 0.0};
    bool hit = false;
    for (const auto& [token, logprob] : token_logprobs) {
        auto label = table.lookup(token);
        if (!label) continue;
        hit = true;
        mass[label_index(*label)] += std::exp(logprob);
    }
    double total = mass[0] + mass[1] + mass[2];
    if (!hit || !(total > 0.0) || !std::isfinite(total)) throw NoLabelMass("no verbalizer alias among the given tokens");
    LabelDistribution d;
    d.p_yes = mass[label_index(JudgmentLabel::Yes)] / total;
    d.p_inprogress = mass[label_index(JudgmentLabel::InProgress)] / total;
    d.p_no = mass[label_index(JudgmentLabel::No)] / total;
    return d;
}

double item_reward(const LabelDistribution& d) { return d.p_yes + 0.5 * d.p_inprogress; }

ScoringStrategy ScoringStrategy::without_logprobs() const {
    ScoringStrategy s = *this;
    if (kind == Kind::OneProb) s.kind = Kind::OneRes;
    if (kind == Kind::FiveProb) s.kind = Kind::FiveAvg;
    return s;
}

std::string ScoringStrategy::name() const {
    switch (kind) {
        case Kind::OneRes: return "1res";
        case Kind::OneProb: return "1prob";
        case Kind::FiveAvg: return fmt::format("{}avg", samples);
        case Kind::FiveProb: return fmt::format("{}prob", samples);
    }
    return "?";
}

ScoringStrategy ScoringStrategy::parse(std::string_view s) {
    auto lower = to_lower(trim(s));
    std::string_view v = lower;
    std::size_t i = 0;
    while (i < v.size() && v[i] >= '0' && v[i] <= '9') ++i;
    int k = 0;
    if (i == 0 || std::from_chars(v.data(), v.data() + i, k).ec != std::errc{} || k < 1)
        throw ConfigError(fmt::format("unknown scoring strategy '{}'", s));
    auto suffix = v.substr(i);
    ScoringStrategy out;
    if (k == 1 && (suffix == "res" || suffix == "avg")) out.kind = Kind::OneRes;
    else if (k == 1 && suffix == "prob") out.kind = Kind::OneProb;
    else if (suffix == "avg") out.kind = Kind::FiveAvg;
    else if (suffix == "prob") out.kind = Kind::FiveProb;
    else throw ConfigError(fmt::format("unknown scoring strategy '{}'", s));
    if (k > 1) out.samples = k;
    return out;
}

double sample_reward(const RewardSample& s, ScoreMode mode) {
    const auto& labels = s.evaluation.labels;
    if (labels.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (mode == ScoreMode::Prob) sum += item_reward(s.distributions.at(i));
        else sum += item_reward(LabelDistribution::one_hot(labels[i]));
    }
    return sum / static_cast<double>(labels.size());
}

RewardScore aggregate_reward(const std::vector<RewardSample>& samples, const ScoringStrategy& strategy) {
    auto k = static_cast<std::size_t>(strategy.sample_count());
    if (samples.size() != k)
        throw ArityError(fmt::format("{} expects {} sample(s), got {}", strategy.name(), k, samples.size()));
    auto items = samples.front().evaluation.labels.size();
    RewardScore out;
    out.strategy = strategy;
    out.samples_used = static_cast<int>(k);
    out.per_item.assign(items, 0.0);
    auto mode = strategy.mode();
    for (const auto& s : samples) {
        if (s.evaluation.labels.size() != items || s.distributions.size() != items)
            throw ArityError("reward samples disagree on the number of checklist items");
        out.value += sample_reward(s, mode);
        for (std::size_t i = 0; i < items; ++i) {
            auto d = mode == ScoreMode::Prob ? s.distributions[i] : LabelDistribution::one_hot(s.evaluation.labels[i]);
            out.per_item[i] += item_reward(d);
        }
    }
    out.value /= static_cast<double>(k);
    for (auto& v : out.per_item) v /= static_cast<double>(k);
    return out;
}

std::optional<int> parse_likert_score(std::string_view response) {
    auto lines = split_lines(response);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto pos = find_ci(lines[i], "score");
        if (pos == std::string_view::npos) continue;
        auto rest = lines[i].substr(pos + 5);
        while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ')) rest.remove_prefix(1);
        if (rest.empty() || rest.front() != ':') continue;
        rest = trim(rest.substr(1));
        for (std::size_t j = i + 1; rest.empty() && j < lines.size(); ++j) rest = trim(lines[j]);
        while (!rest.empty() && (rest.front() == '*' || rest.front() == '[')) rest.remove_prefix(1);
        if (!rest.empty() && rest.front() >= '1' && rest.front() <= '5' &&
            (rest.size() == 1 || !(rest[1] >= '0' && rest[1] <= '9') ))
            return rest.front() - '0';
    }
    return std::nullopt;
}

double likert_reward(const std::vector<std::string>& responses) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : responses) {
        if (auto s = parse_likert_score(r)) {
            sum += *s;
            ++n;
        }
    }
    if (n == 0) throw NoScore("no parseable SCORE line in any response");
    return (sum / n - 1.0) / 4.0;
}

double three_class_reward(const std::vector<std::string>& responses) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : responses) {
        auto t = normalize_label_text(r);
        std::optional<double> v;
        if (t.find("not helpful") != std::string::npos) v = 0.0;
        else if (t.find("neutral") != std::string::npos) v = 0.5;
        else if (t.find("helpful") != std::string::npos) v = 1.0;
        if (v) {
            sum += *v;
            ++n;
        }
    }
    if (n == 0) throw NoScore("no helpful / neutral / not helpful label in any response");
    return sum / n;
}

RewardSample build_reward_sample(const Completion& completion, int expected_items, const VerbalizerTable& table) {
    auto parsed = parse_evaluation_with_spans(completion.text, expected_items);
    RewardSample out;
    out.raw_response = completion.text;
    out.evaluation = parsed.evaluation;

    std::vector<std::size_t> starts;
    std::size_t offset = 0;
    for (const auto& t : completion.tokens) {
        starts.push_back(offset);
        offset += decoded_length(t.token);
    }

    for (std::size_t item = 0; item < parsed.spans.size(); ++item) {
        auto hard = out.evaluation.labels[item];
        const auto& span = parsed.spans[item];
        std::optional<LabelDistribution> dist;
        if (span && !completion.tokens.empty()) {
            // Prefer the token that is itself a label word; fall back to the
            // first token whose alternatives mention one.
            std::optional<std::size_t> anchor, weak_anchor;
            for (std::size_t i = 0; i < completion.tokens.size() && starts[i] < span->section_end; ++i) {
                const auto& tok = completion.tokens[i];
                if (starts[i] + decoded_length(tok.token) <= span->after_header) continue;
                if (table.lookup(tok.token)) {
                    anchor = i;
                    break;
                }
                if (!weak_anchor)
                    for (const auto& alt : tok.top)
                        if (table.lookup(alt.first)) {
                            weak_anchor = i;
                            break;
                        }
            }
            if (!anchor) anchor = weak_anchor;
            if (anchor) {
                const auto& tok = completion.tokens[*anchor];
                TokenAlternatives alts;
                std::set<std::string> seen;
                for (const auto& alt : tok.top)
                    if (seen.insert(alt.first).second) alts.push_back(alt);
                if (seen.insert(tok.token).second) alts.emplace_back(tok.token, tok.logprob);
                try {
                    dist = extract_label_distribution(alts, table);
                } catch (const NoLabelMass&) {
                }
            }
        }
        if (!dist) {
            if (!completion.tokens.empty())
                spdlog::warn("checklist item {}: no label token found, using hard label '{}'", item + 1,
                             label_name(hard));
            dist = LabelDistribution::one_hot(hard);
        }
        out.distributions.push_back(*dist);
    }
    return out;
}

}  // namespace shepherd
