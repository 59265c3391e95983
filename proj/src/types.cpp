#include "shepherd/types.hpp"

#include "shepherd/text.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace shepherd {

std::string_view difficulty_name(Difficulty d) noexcept {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Hard: return "hard";
        case Difficulty::Unknown: return "unknown";
    }
    return "unknown";
}

Difficulty parse_difficulty(std::string_view s) noexcept {
    auto lower = to_lower(trim(s));
    if (lower == "easy") return Difficulty::Easy;
    if (lower == "medium") return Difficulty::Medium;
    if (lower == "hard") return Difficulty::Hard;
    return Difficulty::Unknown;
}

std::string render_trajectory(const Trajectory& t, std::size_t upto, std::size_t cap) {
    if (upto > t.steps.size())
        throw std::out_of_range(fmt::format("render_trajectory: upto {} exceeds {} steps", upto, t.steps.size()));
    if (upto == 0) return std::string(kNoPriorActions);

    std::size_t first = (cap > 0 && upto > cap) ? upto - cap : 0;
    std::vector<std::string> blocks;
    if (first > 0) blocks.push_back(fmt::format("({} earlier steps omitted)", first));
    for (std::size_t i = first; i < upto; ++i) {
        const auto& step = t.steps[i];
        blocks.push_back(fmt::format("Step {}:\nTHOUGHT: {}\nACTION: {}", i + 1, step.thought,
                                     serialize_action(step.action)));
    }
    return join(blocks, "\n\n");
}

Observation truncate_axtree(const Observation& o, std::size_t max_chars) {
    if (max_chars == 0) throw std::invalid_argument("truncate_axtree: max_chars must be positive");

    std::string_view body = o.axtree;
    const std::string tail = "\n" + std::string(kTruncatedSentinel);
    if (body == kTruncatedSentinel) body = {};
    else if (body.size() >= tail.size() && body.substr(body.size() - tail.size()) == tail)
        body.remove_suffix(tail.size());

    if (body.size() <= max_chars) return o;

    Observation out = o;
    auto nl = body.rfind('\n', max_chars);
    std::string_view kept = nl == std::string_view::npos ? std::string_view{} : body.substr(0, nl);
    out.axtree = kept.empty() ? std::string(kTruncatedSentinel) : std::string(kept) + tail;
    return out;
}

}  // namespace shepherd
