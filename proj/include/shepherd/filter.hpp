#pragma once

// Rule-based screening of candidate rejected actions: keep only candidates
// that are clearly wrong relative to the chosen (expert) action.

#include "shepherd/action.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace shepherd {

enum class FilterVerdict { Negative, Equivalent, Uncertain };

std::string_view verdict_name(FilterVerdict v) noexcept;

struct ThoughtAction {
    std::string thought;
    Action action;
};

/// Optional second opinion for send_msg_to_user pairs (e.g. an LLM judge).
using MessageJudge = std::function<FilterVerdict(const ThoughtAction& chosen, const ThoughtAction& candidate)>;

/// Rules, by the chosen action's operation:
///  - identical action key: Equivalent
///  - send_msg_to_user / scroll / goto: another operation is Negative; a
///    different message is Uncertain (or the judge's verdict); a different
///    scroll direction or URL is Negative
///  - drag_and_drop: anything but drag_and_drop / scroll / hover is Negative,
///    those three are Uncertain
///  - click / dclick: another element or a non-element operation is Negative;
///    click or fill on the same element is Equivalent; other operations on
///    the same element are Uncertain
///  - fill: click on the same element is Equivalent; fill on the same element
///    is Equivalent when the text matches (case and spacing aside), Negative
///    otherwise; anything else is Negative
///  - any other operation: Negative unless identical
FilterVerdict classify_rejected(const ThoughtAction& chosen, const ThoughtAction& candidate,
                                const MessageJudge& judge = {});

/// Negative candidates, deduplicated by action key, then a seeded uniform
/// subset of at most max_keep in their original order. Throws
/// std::invalid_argument when max_keep is 0.
std::vector<Action> sample_rejected(const ThoughtAction& chosen, const std::vector<ThoughtAction>& candidates,
                                    std::size_t max_keep, std::uint64_t seed, const MessageJudge& judge = {});

}  // namespace shepherd
