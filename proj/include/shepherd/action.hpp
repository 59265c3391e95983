#pragma once

// Browser-level action language: click('12'), fill('423', "Sony Camera"),
// scroll('down'), goto('http://...'), send_msg_to_user("..."), ...

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shepherd {

enum class ActionKind {
    Click,
    DClick,
    Fill,
    Scroll,
    Goto,
    Hover,
    DragAndDrop,
    SendMsgToUser,
    Noop,
    Other,
};

struct ElementId {
    std::string bid;
    friend bool operator==(const ElementId&, const ElementId&) = default;
};
struct Text {
    std::string value;
    friend bool operator==(const Text&, const Text&) = default;
};
struct Direction {
    std::string value;
    friend bool operator==(const Direction&, const Direction&) = default;
};
struct Url {
    std::string value;
    friend bool operator==(const Url&, const Url&) = default;
};
struct Number {
    double value = 0.0;
    friend bool operator==(const Number&, const Number&) = default;
};

using ActionArg = std::variant<ElementId, Text, Direction, Url, Number>;

struct Action {
    ActionKind kind = ActionKind::Noop;
    /// Operation name as written; only meaningful for ActionKind::Other.
    std::string other_name;
    std::vector<ActionArg> args;
    /// Source text the action was parsed from. Not part of equality.
    std::string raw;

    /// Canonical operation name ("click", "drag_and_drop", or the Other name).
    std::string name() const;

    /// First element-id argument, if any.
    std::optional<std::string> target() const;

    friend bool operator==(const Action& a, const Action& b) {
        return a.kind == b.kind && a.other_name == b.other_name && a.args == b.args;
    }
};

/// True for a non-empty [A-Za-z0-9]+ token.
bool is_valid_bid(std::string_view s) noexcept;

std::string_view kind_name(ActionKind kind) noexcept;

/// Parses the first action call in `text`. Anything after the closing
/// parenthesis must be separated by whitespace or ';' and is ignored.
/// Unknown operation names yield ActionKind::Other.
/// Throws SyntaxError on malformed input.
Action parse_action(std::string_view text);

/// Non-throwing variant of parse_action.
std::optional<Action> try_parse_action(std::string_view text) noexcept;

/// Canonical form: lowercase kind, single-quoted ids/directions/urls,
/// double-quoted free text.
std::string serialize_action(const Action& action);

/// Normalization key used for frequency counting and trace lookups.
std::string action_key(const Action& action);

/// Pulls the first parseable action out of a free-form model response.
/// Looks inside <action>...</action>, then "ACTION:" lines, then scans for the
/// first call expression anywhere in the text.
std::optional<Action> extract_action(std::string_view response);

/// Pulls the rationale out of a model response (<think> tags or a THOUGHT: line).
std::string extract_thought(std::string_view response);

}  // namespace shepherd
