#include "shepherd/checklist.hpp"

#include "shepherd/error.hpp"
#include "shepherd/prompts.hpp"
#include "shepherd/rng.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <array>
#include <charconv>
#include <future>

namespace shepherd {

namespace {

std::string_view strip_decoration(std::string_view s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '#' || s.front() == '*' || s.front() == '-' || s.front() == ' '))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == '*' || s.back() == ' ')) s.remove_suffix(1);
    return s;
}

struct Header {
    int number = 0;
    std::size_t after_colon = 0;  // offset within the raw line
};

// Recognizes "Checklist 3:" (optionally wrapped in markdown emphasis).
std::optional<Header> parse_header(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '#' || line[i] == '*' || line[i] == '-'))
        ++i;
    if (!starts_with_ci(line.substr(i), "checklist")) return std::nullopt;
    i += 9;
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t digits = i;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i == digits) return std::nullopt;
    int number = 0;
    std::from_chars(line.data() + digits, line.data() + i, number);
    while (i < line.size() && (line[i] == ' ' || line[i] == '*')) ++i;
    if (i >= line.size() || line[i] != ':') return std::nullopt;
    ++i;
    return Header{number, i};
}

std::optional<std::string_view> goal_body(std::string_view line) {
    auto s = strip_decoration(line);
    if (!starts_with_ci(s, "goal")) return std::nullopt;
    s.remove_prefix(4);
    while (!s.empty() && (s.front() == '*' || s.front() == ' ')) s.remove_prefix(1);
    if (s.empty() || s.front() != ':') return std::nullopt;
    s.remove_prefix(1);
    return strip_decoration(s);
}

std::optional<JudgmentLabel> parse_label(std::string_view s) {
    auto n = normalize_label_text(s);
    while (!n.empty() && (n.front() == ':' || n.front() == '-' || n.front() == ' ')) n.erase(0, 1);
    auto starts = [&](std::string_view p) { return n.rfind(p, 0) == 0; };
    if (starts("in progress") || starts("inprogress") || starts("in-progress") || starts("partial") ||
        starts("pending"))
        return JudgmentLabel::InProgress;
    if (starts("yes") || starts("done") || starts("completed") || starts("correct")) return JudgmentLabel::Yes;
    if (starts("no") || starts("wrong")) return JudgmentLabel::No;
    return std::nullopt;
}

struct LineRef {
    std::string_view text;
    std::size_t offset;
};

std::vector<LineRef> lines_with_offsets(std::string_view text) {
    std::vector<LineRef> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto end = nl == std::string_view::npos ? text.size() : nl;
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back({line, start});
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

}  // namespace

std::string_view label_name(JudgmentLabel l) noexcept {
    switch (l) {
        case JudgmentLabel::Yes: return "Yes";
        case JudgmentLabel::InProgress: return "In Progress";
        case JudgmentLabel::No: return "No";
    }
    return "No";
}

std::string build_checklist_prompt(const TaskSpec& task, ChecklistStyle style) {
    if (trim(task.intent).empty()) throw TemplateError("checklist prompt: intent is empty");
    if (trim(task.start_url).empty()) throw TemplateError("checklist prompt: start_url is empty");
    auto key = style == ChecklistStyle::Baseline ? prompt_key::kBaselineChecklist : prompt_key::kShepherdChecklist;
    return render_template(prompt_template(key), {{"intent", task.intent}, {"start_url", task.start_url}});
}

std::string render_checklist(const Checklist& c) {
    std::vector<std::string> blocks;
    for (std::size_t i = 0; i < c.items.size(); ++i)
        blocks.push_back(fmt::format("Checklist {}: {}\n- Goal: {}", i + 1, c.items[i].title, c.items[i].goal_desc));
    return join(blocks, "\n\n");
}

Checklist parse_checklist(std::string_view text) {
    Checklist out;
    out.source = ChecklistSource::Generated;

    std::vector<Subgoal> items;
    bool in_goal = false;
    for (auto line : split_lines(text)) {
        if (auto header = parse_header(line)) {
            Subgoal item;
            item.title = std::string(strip_decoration(line.substr(header->after_colon)));
            items.push_back(std::move(item));
            in_goal = false;
            continue;
        }
        if (items.empty()) continue;  // analysis paragraph
        auto& item = items.back();
        if (auto goal = goal_body(line)) {
            item.goal_desc = std::string(*goal);
            in_goal = true;
            continue;
        }
        auto content = strip_decoration(line);
        if (content.empty()) {
            if (in_goal && !item.goal_desc.empty()) in_goal = false;
            continue;
        }
        if (content.front() == '[' && content.back() == ']' && content.find(' ') == std::string_view::npos)
            continue;  // section markers such as [CHECKLISTS]
        if (in_goal) {
            if (!item.goal_desc.empty()) item.goal_desc += ' ';
            item.goal_desc += content;
        } else if (item.title.empty()) {
            item.title = std::string(content);
        }
    }

    if (items.empty()) throw ParseError("no 'Checklist N:' items found");
    if (items.size() > 5) spdlog::warn("checklist has {} items (templates ask for at most five)", items.size());
    if (items.size() > kMaxChecklistItems) {
        spdlog::warn("checklist truncated from {} to {} items", items.size(), kMaxChecklistItems);
        items.resize(kMaxChecklistItems);
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        items[i].index = static_cast<int>(i + 1);
        if (items[i].title.empty())
            items[i].title = items[i].goal_desc.empty() ? fmt::format("Checklist {}", i + 1) : items[i].goal_desc;
    }
    out.items = std::move(items);
    return out;
}

ParsedEvaluation parse_evaluation_with_spans(std::string_view text, int expected_items) {
    if (expected_items < 1) throw ParseError("parse_evaluation: expected_items must be >= 1");
    auto marker = find_ci(text, "checklist evaluation");
    if (marker == std::string_view::npos) throw ParseError("no 'CHECKLIST EVALUATION' section found");

    ParsedEvaluation out;
    auto reason = strip_decoration(text.substr(0, marker));
    if (starts_with_ci(reason, "reason")) {
        reason.remove_prefix(6);
        reason = strip_decoration(reason);
        if (!reason.empty() && reason.front() == ':') reason = trim(reason.substr(1));
    }
    out.evaluation.reason = std::string(reason);
    out.evaluation.labels.assign(static_cast<std::size_t>(expected_items), JudgmentLabel::No);
    out.spans.assign(static_cast<std::size_t>(expected_items), std::nullopt);

    auto lines = lines_with_offsets(text);
    std::vector<bool> seen(static_cast<std::size_t>(expected_items), false);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].offset < marker) continue;
        auto header = parse_header(lines[i].text);
        if (!header || header->number < 1 || header->number > expected_items) continue;
        auto slot = static_cast<std::size_t>(header->number - 1);
        if (seen[slot]) continue;

        std::size_t section_end = text.size();
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            if (parse_header(lines[j].text)) {
                section_end = lines[j].offset;
                break;
            }
        }

        auto label = parse_label(lines[i].text.substr(header->after_colon));
        for (std::size_t j = i + 1; !label && j < lines.size() && lines[j].offset < section_end; ++j) {
            if (trim(lines[j].text).empty()) continue;
            label = parse_label(lines[j].text);
            break;
        }
        seen[slot] = true;
        if (label) out.evaluation.labels[slot] = *label;
        out.spans[slot] = LabelSpan{header->number, lines[i].offset + header->after_colon, section_end};
    }
    return out;
}

ChecklistEvaluation parse_evaluation(std::string_view text, int expected_items) {
    return parse_evaluation_with_spans(text, expected_items).evaluation;
}

std::optional<double> parse_judge_score(std::string_view text) {
    auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = strip_decoration(lines[i]);
        if (!starts_with_ci(line, "score")) continue;
        auto rest = line.substr(5);
        while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ')) rest.remove_prefix(1);
        if (rest.empty() || rest.front() != ':') continue;
        rest = strip_decoration(rest.substr(1));
        for (std::size_t j = i + 1; rest.empty() && j < lines.size(); ++j) rest = strip_decoration(lines[j]);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
        if (ec == std::errc{} && ptr != rest.data() && v >= 1.0 && v <= 5.0) return v;
    }
    return std::nullopt;
}

QualityScores geval_checklist_quality(const Checklist& generated, const Checklist& reference, const TaskSpec& task,
                                      ModelBackend& judge, const GevalOptions& opts) {
    if (generated.items.empty() || reference.items.empty()) throw JudgeError("geval: both checklists must be non-empty");
    if (opts.ratings < 1 || opts.attempts < 1) throw JudgeError("geval: ratings and attempts must be >= 1");

    TemplateValues values{{"intent", task.intent},
                          {"start_url", task.start_url},
                          {"reference_checklist", render_checklist(reference)},
                          {"generated_checklist", render_checklist(generated)}};

    constexpr std::array<std::string_view, 3> keys{prompt_key::kGevalValidity, prompt_key::kGevalGranularity,
                                                   prompt_key::kGevalCoverage};

    auto rate = [&](std::size_t criterion) {
        CompletionRequest req;
        req.prompt = Prompt::from_text(render_template(prompt_template(keys[criterion]), values));
        req.temperature = opts.temperature;
        req.n = opts.ratings;
        req.seed = derive_seed(opts.seed, fmt::format("geval/{}", criterion));
        auto first = judge.complete(req);

        double sum = 0.0;
        for (int r = 0; r < opts.ratings; ++r) {
            auto score = parse_judge_score(first[static_cast<std::size_t>(r)].text);
            for (int attempt = 1; !score && attempt < opts.attempts; ++attempt) {
                CompletionRequest retry = req;
                retry.n = 1;
                retry.seed = derive_seed(opts.seed, fmt::format("geval/{}/{}/{}", criterion, r, attempt));
                score = parse_judge_score(judge.complete(retry).front().text);
            }
            if (!score)
                throw JudgeError(fmt::format("{}: no 'Score:' line after {} attempts", keys[criterion], opts.attempts));
            sum += *score;
        }
        return sum / opts.ratings;
    };

    std::array<std::future<double>, 3> futures;
    for (std::size_t c = 0; c < keys.size(); ++c) futures[c] = std::async(std::launch::async, rate, c);
    QualityScores out;
    out.validity = futures[0].get();
    out.granularity = futures[1].get();
    out.coverage = futures[2].get();
    return out;
}

}  // namespace shepherd
