#pragma once

// Versioned prompt templates (embedded from assets/prompts at build time)
// and `{name}` placeholder substitution.

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace shepherd {

inline constexpr std::string_view kPromptVersion = "v1";
inline constexpr std::string_view kImagePlaceholder = "<IMAGE_PLACEHOLDER>";

namespace prompt_key {
inline constexpr std::string_view kBaselineChecklist = "baseline_checklist";
inline constexpr std::string_view kShepherdChecklist = "shepherd_checklist";
inline constexpr std::string_view kChecklistReward = "checklist_reward";
inline constexpr std::string_view kShepherdReward = "shepherd_reward";
inline constexpr std::string_view kLikertReward = "likert_reward";
inline constexpr std::string_view kChecklistRewardSearch = "checklist_reward_search";
inline constexpr std::string_view kLikertRewardSearch = "likert_reward_search";
inline constexpr std::string_view kRefinement = "refinement";
inline constexpr std::string_view kGevalValidity = "geval_validity";
inline constexpr std::string_view kGevalGranularity = "geval_granularity";
inline constexpr std::string_view kGevalCoverage = "geval_coverage";
inline constexpr std::string_view kPolicy = "policy";
inline constexpr std::string_view kActionSpace = "action_space";
}  // namespace prompt_key

using TemplateValues = std::map<std::string, std::string, std::less<>>;

/// Embedded template text for `key`. Throws TemplateError for unknown keys.
std::string_view prompt_template(std::string_view key);

std::vector<std::string_view> prompt_keys();

/// Placeholder names appearing in `tmpl`, in order of first appearance.
std::vector<std::string> template_placeholders(std::string_view tmpl);

/// Single-pass substitution of `{name}` placeholders. Substituted values are
/// never rescanned. Throws TemplateError if a placeholder has no value.
std::string render_template(std::string_view tmpl, const TemplateValues& values);

/// Removes the "### SOM Image Screenshot" block (header through the image
/// placeholder line) for text-only prompts.
std::string strip_image_section(std::string_view prompt);

}  // namespace shepherd
