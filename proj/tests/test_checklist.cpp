#include "doctest.h"
#include "support.hpp"

#include "shepherd/checklist.hpp"
#include "shepherd/error.hpp"

#include <atomic>
#include <map>
#include <mutex>

using namespace shepherd;

TEST_CASE("parse_checklist reads generator output") {
    auto c = parse_checklist(
        "Let me think about the task first. The user wants a camera.\n\n"
        "[CHECKLISTS]\n"
        "**Checklist 1: Search for the camera**\n"
        "- Goal: Enter \"Sony camera\" in the search bar.\n\n"
        "Checklist 2:\n"
        "Open the product page\n"
        "- **Goal**: Click the first matching result\n"
        "  and wait for the page to load.\n\n"
        "### Checklist 3: Add to cart\n"
        "- Goal: Press the add-to-cart button.\n");
    REQUIRE(c.items.size() == 3);
    CHECK(c.source == ChecklistSource::Generated);
    CHECK(c.items[0] == Subgoal{1, "Search for the camera", "Enter \"Sony camera\" in the search bar."});
    CHECK(c.items[1] == Subgoal{2, "Open the product page", "Click the first matching result and wait for the page to load."});
    CHECK(c.items[2].title == "Add to cart");
}

TEST_CASE("parse_checklist edge cases") {
    CHECK_THROWS_AS(parse_checklist("no items here"), ParseError);
    CHECK_THROWS_AS(parse_checklist(""), ParseError);

    auto untitled = parse_checklist("Checklist 1:\n- Goal: do it");
    CHECK(untitled.items[0].title == "do it");
    auto bare = parse_checklist("Checklist 1:");
    CHECK(bare.items[0].title == "Checklist 1");

    std::string many;
    for (int i = 1; i <= 10; ++i) many += "Checklist " + std::to_string(i) + ": step " + std::to_string(i) + "\n- Goal: g\n\n";
    auto capped = parse_checklist(many);
    CHECK(capped.items.size() == kMaxChecklistItems);
    CHECK(capped.items.back().index == 8);
}

TEST_CASE("property: render then parse is the identity") {
    Rng rng(21);
    for (int i = 0; i < 500; ++i) {
        auto c = testing::random_checklist(rng);
        auto text = render_checklist(c);
        CAPTURE(text);
        auto back = parse_checklist(text);
        CHECK(back.items == c.items);
        CHECK(render_checklist(back) == text);
    }
}

TEST_CASE("parse_evaluation") {
    auto e = parse_evaluation(
        "REASON: The search was issued but results are not open yet.\n\n"
        "CHECKLIST EVALUATION:\n"
        "Checklist 1: Yes\n"
        "Checklist 2: **In Progress**\n"
        "Checklist 3:\nNo\n",
        4);
    CHECK(e.reason == "The search was issued but results are not open yet.");
    REQUIRE(e.labels.size() == 4);
    CHECK(e.labels[0] == JudgmentLabel::Yes);
    CHECK(e.labels[1] == JudgmentLabel::InProgress);
    CHECK(e.labels[2] == JudgmentLabel::No);
    CHECK(e.labels[3] == JudgmentLabel::No);  // missing item defaults to No

    auto lower = parse_evaluation("checklist evaluation:\nchecklist 1: in-progress\nChecklist 2: done", 2);
    CHECK(lower.labels == std::vector{JudgmentLabel::InProgress, JudgmentLabel::Yes});

    CHECK_THROWS_AS(parse_evaluation("Checklist 1: Yes", 1), ParseError);
    CHECK_THROWS_AS(parse_evaluation("CHECKLIST EVALUATION:\nChecklist 1: Yes", 0), ParseError);

    auto dup = parse_evaluation("CHECKLIST EVALUATION:\nChecklist 1: Yes\nChecklist 1: No\nChecklist 9: Yes", 1);
    CHECK(dup.labels == std::vector{JudgmentLabel::Yes});
}

TEST_CASE("label spans point past each header") {
    std::string text = "CHECKLIST EVALUATION:\nChecklist 1: Yes\nChecklist 2: No";
    auto p = parse_evaluation_with_spans(text, 3);
    REQUIRE(p.spans[0].has_value());
    CHECK(text.substr(p.spans[0]->after_header, 4) == " Yes");
    CHECK(text.substr(p.spans[0]->section_end, 11) == "Checklist 2");
    CHECK(p.spans[1]->section_end == text.size());
    CHECK_FALSE(p.spans[2].has_value());
}

TEST_CASE("parse_judge_score") {
    CHECK(parse_judge_score("Reasoning...\nScore: 4") == 4.0);
    CHECK(parse_judge_score("**Score:**\n 3") == 3.0);
    CHECK(parse_judge_score("score: 4.5 out of 5") == 4.5);
    CHECK_FALSE(parse_judge_score("Score: 7").has_value());
    CHECK_FALSE(parse_judge_score("no score").has_value());
}

TEST_CASE("checklist prompts") {
    TaskSpec t{"t", "Find a camera", "http://shop.test", Difficulty::Unknown, ""};
    auto p = build_checklist_prompt(t, ChecklistStyle::Shepherd);
    CHECK(p.find("Find a camera") != std::string::npos);
    CHECK(p.find("http://shop.test") != std::string::npos);
    CHECK(build_checklist_prompt(t, ChecklistStyle::Baseline) != p);
    t.intent = " ";
    CHECK_THROWS_AS(build_checklist_prompt(t, ChecklistStyle::Baseline), TemplateError);
}

namespace {

Checklist small_checklist() { return parse_checklist("Checklist 1: a\n- Goal: b\n\nChecklist 2: c\n- Goal: d"); }

std::string criterion_of(const CompletionRequest& r) {
    auto text = r.prompt.flatten();
    if (text.find("granularity") != std::string::npos || text.find("Granularity") != std::string::npos) return "g";
    if (text.find("coverage") != std::string::npos || text.find("Coverage") != std::string::npos) return "c";
    return "v";
}

}  // namespace

TEST_CASE("geval averages ratings per criterion") {
    std::map<std::string, std::vector<int>> planted{{"v", {5, 4, 3}}, {"g", {2, 2, 2}}, {"c", {1, 5, 3}}};
    auto backend = FunctionBackend("judge", [&](const CompletionRequest& r) {
        std::vector<Completion> out;
        for (int i = 0; i < r.n; ++i)
            out.push_back(testing::text_completion("Score: " + std::to_string(planted[criterion_of(r)][i])));
        return out;
    });
    TaskSpec t{"t", "i", "http://x", Difficulty::Unknown, ""};
    auto q = geval_checklist_quality(small_checklist(), small_checklist(), t, backend);
    CHECK(q.validity == doctest::Approx(4.0));
    CHECK(q.granularity == doctest::Approx(2.0));
    CHECK(q.coverage == doctest::Approx(3.0));
    CHECK(q.overall() == doctest::Approx(3.0));
}

TEST_CASE("geval retries unparseable ratings, then fails") {
    std::atomic<int> calls{0};
    auto flaky = FunctionBackend("judge", [&](const CompletionRequest& r) {
        ++calls;
        std::vector<Completion> out;
        for (int i = 0; i < r.n; ++i) out.push_back(testing::text_completion(r.n == 1 ? "Score: 5" : "garbled"));
        return out;
    });
    TaskSpec t{"t", "i", "http://x", Difficulty::Unknown, ""};
    auto q = geval_checklist_quality(small_checklist(), small_checklist(), t, flaky);
    CHECK(q.overall() == doctest::Approx(5.0));
    CHECK(calls == 3 + 9);  // one batch per criterion, one retry per rating

    auto broken = FunctionBackend("judge", [&](const CompletionRequest& r) {
        return std::vector<Completion>(static_cast<std::size_t>(r.n), testing::text_completion("no idea"));
    });
    CHECK_THROWS_AS(geval_checklist_quality(small_checklist(), small_checklist(), t, broken), JudgeError);
    CHECK_THROWS_AS(geval_checklist_quality(Checklist{}, small_checklist(), t, broken), JudgeError);
}
