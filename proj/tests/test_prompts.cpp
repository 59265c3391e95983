#include "doctest.h"
#include "support.hpp"

#include "shepherd/error.hpp"
#include "shepherd/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

using namespace shepherd;

namespace {

std::string asset(const std::string& name) {
    std::ifstream in(std::string(SHEPHERD_ASSETS) + "/prompts/" + name + ".txt", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<std::string> placeholders(std::string_view key) {
    auto v = template_placeholders(prompt_template(key));
    return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("every asset is embedded verbatim minus the final newline") {
    auto keys = prompt_keys();
    CHECK(keys.size() == 13);
    for (auto key : keys) {
        auto text = asset(std::string(key));
        if (!text.empty() && text.back() == '\n') text.pop_back();
        CHECK(prompt_template(key) == text);
    }
    CHECK_THROWS_AS(prompt_template("nope"), TemplateError);
}

TEST_CASE("templates expose the expected placeholders") {
    using S = std::set<std::string>;
    CHECK(placeholders(prompt_key::kBaselineChecklist) == S{"intent", "start_url"});
    CHECK(placeholders(prompt_key::kShepherdChecklist) == S{"intent", "start_url"});
    S reward{"action_space", "action", "checklist", "current_url", "intent", "text_observation", "thought", "trajectory"};
    CHECK(placeholders(prompt_key::kChecklistReward) == reward);
    CHECK(placeholders(prompt_key::kChecklistRewardSearch) == reward);
    S likert = reward;
    likert.erase("checklist");
    CHECK(placeholders(prompt_key::kLikertReward) == likert);
    CHECK(placeholders(prompt_key::kLikertRewardSearch) == likert);
    S shepherd = reward;
    shepherd.erase("action_space");
    CHECK(placeholders(prompt_key::kShepherdReward) == shepherd);
    for (auto k : {prompt_key::kGevalValidity, prompt_key::kGevalGranularity, prompt_key::kGevalCoverage})
        CHECK(placeholders(k) == S{"generated_checklist", "intent", "reference_checklist", "start_url"});
    CHECK(placeholders(prompt_key::kActionSpace).empty());
}

TEST_CASE("render_template substitutes in one pass") {
    CHECK(render_template("a {x} b {y}", {{"x", "1"}, {"y", "{x}"}}) == "a 1 b {x}");
    CHECK(render_template("{x}{x}", {{"x", "ab"}}) == "abab");
    CHECK(render_template("json {\"k\": 1} and { x}", {}) == "json {\"k\": 1} and { x}");
    CHECK_THROWS_AS(render_template("{missing}", {}), TemplateError);
    CHECK(template_placeholders("{b} {a} {b}") == std::vector<std::string>{"b", "a"});
}

TEST_CASE("every template renders once all placeholders are filled") {
    for (auto key : prompt_keys()) {
        TemplateValues values;
        for (const auto& name : template_placeholders(prompt_template(key))) values[name] = "<" + name + ">";
        auto out = render_template(prompt_template(key), values);
        CHECK(template_placeholders(out).empty());
    }
}

TEST_CASE("strip_image_section removes the screenshot block") {
    std::string p = "intro\n\n### SOM Image Screenshot\nHere it is:\n<IMAGE_PLACEHOLDER>\n\n## Next\nbody";
    CHECK(strip_image_section(p) == "intro\n\n## Next\nbody");
    CHECK(strip_image_section("no image here") == "no image here");

    auto reward = std::string(prompt_template(prompt_key::kShepherdReward));
    auto stripped = strip_image_section(reward);
    CHECK(stripped.find("SOM Image") == std::string::npos);
    CHECK(stripped.find(kImagePlaceholder) == std::string::npos);
    CHECK(stripped.find("## Checklist") != std::string::npos);
}
