#include "shepherd/prompts.hpp"

#include "shepherd/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <utility>

namespace shepherd {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbeddedPrompts[];
extern const std::size_t kEmbeddedPromptCount;
}  // namespace detail

namespace {

bool placeholder_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool placeholder_char(char c) { return placeholder_start(c) || (c >= '0' && c <= '9'); }

// Length of "{name}" at tmpl[i], or 0 if not a placeholder.
std::size_t placeholder_at(std::string_view tmpl, std::size_t i) {
    if (tmpl[i] != '{' || i + 1 >= tmpl.size() || !placeholder_start(tmpl[i + 1])) return 0;
    std::size_t j = i + 1;
    while (j < tmpl.size() && placeholder_char(tmpl[j])) ++j;
    if (j >= tmpl.size() || tmpl[j] != '}') return 0;
    return j - i + 1;
}

}  // namespace

std::string_view prompt_template(std::string_view key) {
    for (std::size_t i = 0; i < detail::kEmbeddedPromptCount; ++i)
        if (detail::kEmbeddedPrompts[i].first == key) return detail::kEmbeddedPrompts[i].second;
    throw TemplateError(fmt::format("unknown prompt template '{}'", key));
}

std::vector<std::string_view> prompt_keys() {
    std::vector<std::string_view> keys;
    for (std::size_t i = 0; i < detail::kEmbeddedPromptCount; ++i) keys.push_back(detail::kEmbeddedPrompts[i].first);
    return keys;
}

std::vector<std::string> template_placeholders(std::string_view tmpl) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (auto len = placeholder_at(tmpl, i)) {
            std::string name(tmpl.substr(i + 1, len - 2));
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
            i += len - 1;
        }
    }
    return names;
}

std::string render_template(std::string_view tmpl, const TemplateValues& values) {
    std::string out;
    out.reserve(tmpl.size() * 2);
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (auto len = placeholder_at(tmpl, i)) {
            auto name = tmpl.substr(i + 1, len - 2);
            auto it = values.find(name);
            if (it == values.end()) throw TemplateError(fmt::format("placeholder {{{}}} left unfilled", name));
            out += it->second;
            i += len - 1;
            continue;
        }
        out += tmpl[i];
    }
    return out;
}

std::string strip_image_section(std::string_view prompt) {
    auto header = prompt.find("### SOM Image Screenshot");
    if (header == std::string_view::npos) return std::string(prompt);
    auto marker = prompt.find(kImagePlaceholder, header);
    if (marker == std::string_view::npos) return std::string(prompt);
    auto line_start = prompt.rfind('\n', header);
    line_start = line_start == std::string_view::npos ? 0 : line_start + 1;
    auto line_end = prompt.find('\n', marker);
    line_end = line_end == std::string_view::npos ? prompt.size() : line_end + 1;

    std::string out(prompt.substr(0, line_start));
    auto rest = prompt.substr(line_end);
    // Avoid leaving two blank lines where the block used to be.
    if (out.size() >= 2 && out.compare(out.size() - 2, 2, "\n\n") == 0 && !rest.empty() && rest.front() == '\n')
        rest.remove_prefix(1);
    out += rest;
    return out;
}

}  // namespace shepherd
