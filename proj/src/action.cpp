#include "shepherd/action.hpp"

#include "shepherd/error.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

namespace shepherd {

namespace {

struct RawArg {
    bool quoted = false;
    std::string text;
    std::optional<double> number;  // set for bare numeric literals
};

struct RawCall {
    std::string name;
    std::vector<RawArg> args;
    std::size_t end = 0;  // offset one past ')'
};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

class CallLexer {
public:
    explicit CallLexer(std::string_view src) : src_(src) {}

    RawCall parse() {
        RawCall call;
        skip_ws();
        if (pos_ >= src_.size()) throw SyntaxError("empty action");
        if (!is_ident_start(src_[pos_]))
            throw SyntaxError(fmt::format("expected operation name at offset {}", pos_));
        std::size_t start = pos_;
        while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        call.name = std::string(src_.substr(start, pos_ - start));
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != '(')
            throw SyntaxError(fmt::format("expected '(' after '{}'", call.name));
        ++pos_;
        skip_ws();
        if (peek() == ')') {
            ++pos_;
            call.end = pos_;
            return call;
        }
        for (;;) {
            skip_ws();
            call.args.push_back(parse_arg());
            skip_ws();
            if (pos_ >= src_.size()) throw SyntaxError("unbalanced parentheses: missing ')'");
            char c = src_[pos_++];
            if (c == ')') break;
            if (c != ',') throw SyntaxError(fmt::format("unexpected '{}' in argument list", c));
        }
        call.end = pos_;
        return call;
    }

private:
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
    }

    RawArg parse_arg() {
        if (pos_ >= src_.size()) throw SyntaxError("unbalanced parentheses: missing ')'");
        char c = src_[pos_];
        if (c == '\'' || c == '"') return parse_quoted(c);
        std::size_t start = pos_;
        while (pos_ < src_.size()) {
            char d = src_[pos_];
            if (d == ',' || d == ')' || is_space(d)) break;
            if (d == '(' || d == '\'' || d == '"')
                throw SyntaxError(fmt::format("unexpected '{}' in bare argument", d));
            ++pos_;
        }
        if (pos_ == start) throw SyntaxError(fmt::format("empty argument at offset {}", start));
        RawArg arg;
        arg.text = std::string(src_.substr(start, pos_ - start));
        arg.number = parse_number(arg.text);
        return arg;
    }

    RawArg parse_quoted(char quote) {
        ++pos_;
        RawArg arg;
        arg.quoted = true;
        while (pos_ < src_.size()) {
            char c = src_[pos_++];
            if (c == quote) return arg;
            if (c == '\\' && pos_ < src_.size()) {
                char e = src_[pos_++];
                switch (e) {
                    case 'n': arg.text += '\n'; break;
                    case 't': arg.text += '\t'; break;
                    case 'r': arg.text += '\r'; break;
                    case '\\': arg.text += '\\'; break;
                    case '\'': arg.text += '\''; break;
                    case '"': arg.text += '"'; break;
                    default:
                        arg.text += '\\';
                        arg.text += e;
                }
                continue;
            }
            arg.text += c;
        }
        throw SyntaxError("unterminated string literal");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

std::optional<ActionKind> known_kind(std::string_view name) {
    std::string lower = to_lower(name);
    if (lower == "click") return ActionKind::Click;
    if (lower == "dclick" || lower == "dblclick") return ActionKind::DClick;
    if (lower == "fill") return ActionKind::Fill;
    if (lower == "scroll") return ActionKind::Scroll;
    if (lower == "goto") return ActionKind::Goto;
    if (lower == "hover") return ActionKind::Hover;
    if (lower == "drag_and_drop") return ActionKind::DragAndDrop;
    if (lower == "send_msg_to_user") return ActionKind::SendMsgToUser;
    if (lower == "noop") return ActionKind::Noop;
    return std::nullopt;
}

void expect_arity(const RawCall& call, std::size_t lo, std::size_t hi) {
    std::size_t n = call.args.size();
    if (n < lo || n > hi) {
        if (lo == hi)
            throw SyntaxError(fmt::format("{} expects {} argument(s), got {}", call.name, lo, n));
        throw SyntaxError(fmt::format("{} expects {}..{} arguments, got {}", call.name, lo, hi, n));
    }
}

ElementId element(const RawCall& call, const RawArg& arg) {
    if (!is_valid_bid(arg.text))
        throw SyntaxError(fmt::format("{}: '{}' is not a valid element id", call.name, arg.text));
    return ElementId{arg.text};
}

Action type_call(const RawCall& call) {
    Action a;
    auto kind = known_kind(call.name);
    if (!kind) {
        a.kind = ActionKind::Other;
        a.other_name = call.name;
        for (const auto& arg : call.args) {
            if (!arg.quoted && arg.number) a.args.emplace_back(Number{*arg.number});
            else a.args.emplace_back(Text{arg.text});
        }
        return a;
    }
    a.kind = *kind;
    switch (a.kind) {
        case ActionKind::Click:
        case ActionKind::DClick:
        case ActionKind::Hover:
            expect_arity(call, 1, 1);
            a.args.emplace_back(element(call, call.args[0]));
            break;
        case ActionKind::Fill:
            expect_arity(call, 2, 2);
            a.args.emplace_back(element(call, call.args[0]));
            a.args.emplace_back(Text{call.args[1].text});
            break;
        case ActionKind::Scroll:
            expect_arity(call, 1, 2);
            for (const auto& arg : call.args) {
                if (!arg.quoted && arg.number) a.args.emplace_back(Number{*arg.number});
                else a.args.emplace_back(Direction{arg.text});
            }
            break;
        case ActionKind::Goto:
            expect_arity(call, 1, 1);
            a.args.emplace_back(Url{call.args[0].text});
            break;
        case ActionKind::SendMsgToUser:
            expect_arity(call, 1, 1);
            a.args.emplace_back(Text{call.args[0].text});
            break;
        case ActionKind::Noop:
            expect_arity(call, 0, 1);
            if (!call.args.empty()) {
                const auto& arg = call.args[0];
                if (arg.quoted || !arg.number)
                    throw SyntaxError("noop expects a numeric wait time");
                a.args.emplace_back(Number{*arg.number});
            }
            break;
        case ActionKind::DragAndDrop:
            // Arity beyond two is accepted without interpreting the extras.
            expect_arity(call, 2, SIZE_MAX);
            for (const auto& arg : call.args) {
                if (!arg.quoted && arg.number) a.args.emplace_back(Number{*arg.number});
                else if (is_valid_bid(arg.text)) a.args.emplace_back(ElementId{arg.text});
                else a.args.emplace_back(Text{arg.text});
            }
            break;
        case ActionKind::Other:
            break;
    }
    return a;
}

std::string quote(std::string_view s, char q) {
    std::string out;
    out.reserve(s.size() + 2);
    out += q;
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c == q) out += '\\';
                out += c;
        }
    }
    out += q;
    return out;
}

std::string serialize_arg(const ActionArg& arg) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ElementId>) return quote(v.bid, '\'');
            else if constexpr (std::is_same_v<T, Text>) return quote(v.value, '"');
            else if constexpr (std::is_same_v<T, Direction>) return quote(v.value, '\'');
            else if constexpr (std::is_same_v<T, Url>) return quote(v.value, '\'');
            else return fmt::format("{}", v.value);
        },
        arg);
}

// Parses a call starting at `text` without checking what follows it.
std::optional<std::pair<Action, std::size_t>> parse_prefix(std::string_view text) noexcept {
    try {
        CallLexer lexer(text);
        RawCall call = lexer.parse();
        Action a = type_call(call);
        return std::make_pair(std::move(a), call.end);
    } catch (...) {
        return std::nullopt;
    }
}

std::optional<Action> parse_lenient(std::string_view text) {
    auto trimmed = trim(text);
    auto parsed = parse_prefix(trimmed);
    if (!parsed) return std::nullopt;
    parsed->first.raw = std::string(trimmed.substr(0, parsed->second));
    return std::move(parsed->first);
}

}  // namespace

bool is_valid_bid(std::string_view s) noexcept {
    if (s.empty()) return false;
    for (char c : s) {
        bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (!alnum) return false;
    }
    return true;
}

std::string_view kind_name(ActionKind kind) noexcept {
    switch (kind) {
        case ActionKind::Click: return "click";
        case ActionKind::DClick: return "dclick";
        case ActionKind::Fill: return "fill";
        case ActionKind::Scroll: return "scroll";
        case ActionKind::Goto: return "goto";
        case ActionKind::Hover: return "hover";
        case ActionKind::DragAndDrop: return "drag_and_drop";
        case ActionKind::SendMsgToUser: return "send_msg_to_user";
        case ActionKind::Noop: return "noop";
        case ActionKind::Other: return "other";
    }
    return "other";
}

std::string Action::name() const {
    if (kind == ActionKind::Other) return other_name;
    return std::string(kind_name(kind));
}

std::optional<std::string> Action::target() const {
    for (const auto& arg : args)
        if (const auto* id = std::get_if<ElementId>(&arg)) return id->bid;
    return std::nullopt;
}

Action parse_action(std::string_view text) {
    CallLexer lexer(text);
    RawCall call = lexer.parse();
    for (std::size_t i = call.end; i < text.size(); ++i) {
        char c = text[i];
        if (c == ';' || is_space(c)) break;
        throw SyntaxError(fmt::format("unexpected trailing '{}' after action", c));
    }
    Action a = type_call(call);
    a.raw = std::string(text);
    return a;
}

std::optional<Action> try_parse_action(std::string_view text) noexcept {
    try {
        return parse_action(text);
    } catch (...) {
        return std::nullopt;
    }
}

std::string serialize_action(const Action& action) {
    std::string out = action.name();
    out += '(';
    for (std::size_t i = 0; i < action.args.size(); ++i) {
        if (i) out += ", ";
        out += serialize_arg(action.args[i]);
    }
    out += ')';
    return out;
}

std::string action_key(const Action& action) { return serialize_action(action); }

std::optional<Action> extract_action(std::string_view response) {
    // 1. <action> ... </action>
    if (auto open = response.find("<action>"); open != std::string_view::npos) {
        auto body = response.substr(open + 8);
        if (auto close = body.find("</action>"); close != std::string_view::npos) body = body.substr(0, close);
        if (auto a = parse_lenient(body)) return a;
    }

    // 2. ACTION: lines (value on the same or the following line)
    auto lines = split_lines(response);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = trim(lines[i]);
        if (line.size() < 7 || to_lower(line.substr(0, 7)) != "action:") continue;
        auto rest = trim(line.substr(7));
        if (rest.empty() && i + 1 < lines.size()) rest = trim(lines[i + 1]);
        if (auto a = parse_lenient(rest)) return a;
    }

    // 3. first call of a known operation anywhere in the text
    for (std::size_t i = 0; i < response.size(); ++i) {
        if (!is_ident_start(response[i]) || (i > 0 && is_ident_char(response[i - 1]))) continue;
        std::size_t j = i;
        while (j < response.size() && is_ident_char(response[j])) ++j;
        if (!known_kind(response.substr(i, j - i))) {
            i = j - 1;
            continue;
        }
        if (auto parsed = parse_prefix(response.substr(i))) {
            parsed->first.raw = std::string(response.substr(i, parsed->second));
            return std::move(parsed->first);
        }
        i = j - 1;
    }
    return std::nullopt;
}

std::string extract_thought(std::string_view response) {
    if (auto open = response.find("<think>"); open != std::string_view::npos) {
        auto body = response.substr(open + 7);
        if (auto close = body.find("</think>"); close != std::string_view::npos) body = body.substr(0, close);
        return std::string(trim(body));
    }
    std::string lower = to_lower(response);
    if (auto pos = lower.find("thought:"); pos != std::string::npos) {
        auto body = response.substr(pos + 8);
        auto lower_body = std::string_view(lower).substr(pos + 8);
        if (auto stop = lower_body.find("action:"); stop != std::string_view::npos) body = body.substr(0, stop);
        return std::string(trim(body));
    }
    if (auto open = response.find("<action>"); open != std::string_view::npos)
        return std::string(trim(response.substr(0, open)));
    return {};
}

}  // namespace shepherd
