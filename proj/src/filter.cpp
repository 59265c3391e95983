#include "shepherd/filter.hpp"

#include "shepherd/rng.hpp"
#include "shepherd/text.hpp"

#include <set>
#include <stdexcept>

namespace shepherd {

std::string_view verdict_name(FilterVerdict v) noexcept {
    switch (v) {
        case FilterVerdict::Negative: return "negative";
        case FilterVerdict::Equivalent: return "equivalent";
        case FilterVerdict::Uncertain: return "uncertain";
    }
    return "?";
}

namespace {

bool is_element_op(ActionKind k) {
    return k == ActionKind::Click || k == ActionKind::DClick || k == ActionKind::Fill || k == ActionKind::Hover;
}

std::string fill_text(const Action& a) {
    for (const auto& arg : a.args)
        if (const auto* t = std::get_if<Text>(&arg)) return t->value;
    return {};
}

std::string squash(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : to_lower(trim(s))) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (ws) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    return out;
}

}  // namespace

FilterVerdict classify_rejected(const ThoughtAction& chosen, const ThoughtAction& candidate, const MessageJudge& judge) {
    const auto& a = chosen.action;
    const auto& b = candidate.action;
    if (action_key(a) == action_key(b)) return FilterVerdict::Equivalent;

    switch (a.kind) {
        case ActionKind::SendMsgToUser:
            if (b.kind != a.kind) return FilterVerdict::Negative;
            return judge ? judge(chosen, candidate) : FilterVerdict::Uncertain;

        case ActionKind::Scroll:
        case ActionKind::Goto:
            return FilterVerdict::Negative;

        case ActionKind::DragAndDrop:
            if (b.kind == ActionKind::DragAndDrop || b.kind == ActionKind::Scroll || b.kind == ActionKind::Hover)
                return FilterVerdict::Uncertain;
            return FilterVerdict::Negative;

        case ActionKind::Click:
        case ActionKind::DClick: {
            if (!is_element_op(b.kind) || b.target() != a.target()) return FilterVerdict::Negative;
            if (b.kind == ActionKind::Click || b.kind == ActionKind::Fill) return FilterVerdict::Equivalent;
            return FilterVerdict::Uncertain;
        }

        case ActionKind::Fill: {
            if (b.target() != a.target()) return FilterVerdict::Negative;
            if (b.kind == ActionKind::Click) return FilterVerdict::Equivalent;
            if (b.kind == ActionKind::Fill)
                return squash(fill_text(a)) == squash(fill_text(b)) ? FilterVerdict::Equivalent : FilterVerdict::Negative;
            return FilterVerdict::Negative;
        }

        default:
            return FilterVerdict::Negative;
    }
}

std::vector<Action> sample_rejected(const ThoughtAction& chosen, const std::vector<ThoughtAction>& candidates,
                                    std::size_t max_keep, std::uint64_t seed, const MessageJudge& judge) {
    if (max_keep == 0) throw std::invalid_argument("sample_rejected: max_keep must be >= 1");
    std::vector<Action> negatives;
    std::set<std::string> seen;
    for (const auto& c : candidates) {
        if (classify_rejected(chosen, c, judge) != FilterVerdict::Negative) continue;
        if (seen.insert(action_key(c.action)).second) negatives.push_back(c.action);
    }
    if (negatives.size() <= max_keep) return negatives;
    Rng rng(seed);
    std::vector<Action> out;
    for (auto i : rng.sample_indices(negatives.size(), max_keep)) out.push_back(negatives[i]);
    return out;
}

}  // namespace shepherd
