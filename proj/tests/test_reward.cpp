#include "doctest.h"
#include "support.hpp"

#include "shepherd/error.hpp"
#include "shepherd/io.hpp"
#include "shepherd/reward.hpp"

#include <cmath>

using namespace shepherd;

namespace {

const std::string G = "\xC4\xA0";  // Ġ
const std::string C = "\xC4\x8A";  // Ċ

TokenLogprob tok(std::string t, double lp, std::vector<std::pair<std::string, double>> top = {}) {
    return TokenLogprob{std::move(t), lp, std::move(top)};
}

}  // namespace

TEST_CASE("normalize_token") {
    CHECK(normalize_token(" Yes") == G + "Yes");
    CHECK(normalize_token("\nNo") == C + "No");
    CHECK(normalize_token("Yes") == "Yes");
    CHECK(normalize_token(G + "Yes") == G + "Yes");
    CHECK(normalize_token("") == "");
}

TEST_CASE("verbalizer table") {
    const auto& t = VerbalizerTable::defaults();
    CHECK(t.lookup(" Yes") == JudgmentLabel::Yes);
    CHECK(t.lookup(G + "Done") == JudgmentLabel::Yes);
    CHECK(t.lookup("\nPending") == JudgmentLabel::InProgress);
    CHECK(t.lookup("Wrong") == JudgmentLabel::No);
    CHECK_FALSE(t.lookup("Maybe").has_value());
    CHECK_FALSE(t.lookup("yes ").has_value());

    CHECK_THROWS_AS(VerbalizerTable({"a"}, {}, {"b"}), ConfigError);
    CHECK_THROWS_AS(VerbalizerTable({"a"}, {"b"}, {"a"}), ConfigError);
    auto custom = VerbalizerTable::from_json(R"({"Yes": ["Y"], "In Progress": ["P"], "No": ["N"]})");
    CHECK(custom.lookup("P") == JudgmentLabel::InProgress);
    CHECK_THROWS_AS(VerbalizerTable::from_json(R"({"Yes": ["Y"], "No": ["N"]})"), ConfigError);
    CHECK_THROWS_AS(VerbalizerTable::from_json("not json"), ConfigError);
    CHECK_THROWS_AS(VerbalizerTable::from_file("/nonexistent/verbalizer.json"), ConfigError);
}

TEST_CASE("extract_label_distribution renormalizes over the three labels") {
    const auto& t = VerbalizerTable::defaults();
    TokenAlternatives alts{{G + "Yes", std::log(0.5)}, {"yes", std::log(0.1)}, {G + "In", std::log(0.2)},
                           {G + "No", std::log(0.1)},  {"maybe", std::log(0.1)}};
    auto d = extract_label_distribution(alts, t);
    CHECK(d.p_yes == doctest::Approx(0.6 / 0.9));
    CHECK(d.p_inprogress == doctest::Approx(0.2 / 0.9));
    CHECK(d.p_no == doctest::Approx(0.1 / 0.9));
    CHECK(item_reward(d) == doctest::Approx((0.6 + 0.1) / 0.9));
    CHECK_THROWS_AS(extract_label_distribution({{"maybe", 0.0}}, t), NoLabelMass);
    CHECK_THROWS_AS(extract_label_distribution({}, t), NoLabelMass);
}

TEST_CASE("strategies") {
    CHECK(ScoringStrategy::parse("1res").kind == ScoringStrategy::Kind::OneRes);
    CHECK(ScoringStrategy::parse("1prob").kind == ScoringStrategy::Kind::OneProb);
    CHECK(ScoringStrategy::parse("5avg").kind == ScoringStrategy::Kind::FiveAvg);
    CHECK(ScoringStrategy::parse("5prob").kind == ScoringStrategy::Kind::FiveProb);
    auto k3 = ScoringStrategy::parse("3PROB");
    CHECK(k3.sample_count() == 3);
    CHECK(k3.name() == "3prob");
    CHECK(k3.temperature() == 1.0);
    CHECK(ScoringStrategy::parse("1prob").temperature() == 0.0);
    CHECK(ScoringStrategy::parse("1prob").sample_count() == 1);
    CHECK(ScoringStrategy::parse("5prob").without_logprobs().name() == "5avg");
    CHECK(ScoringStrategy::parse("1prob").without_logprobs().name() == "1res");
    CHECK(ScoringStrategy::parse("5avg").without_logprobs().name() == "5avg");
    for (auto bad : {"", "prob", "0prob", "5max", "-1avg"}) CHECK_THROWS_AS(ScoringStrategy::parse(bad), ConfigError);
    for (auto name : {"1res", "1prob", "5avg", "5prob", "7avg"}) CHECK(ScoringStrategy::parse(name).name() == name);
}

TEST_CASE("aggregate_reward by hand") {
    RewardSample s1;
    s1.evaluation.labels = {JudgmentLabel::Yes, JudgmentLabel::InProgress};
    s1.distributions = {LabelDistribution{0.8, 0.2, 0.0}, LabelDistribution{0.1, 0.6, 0.3}};
    RewardSample s2 = s1;
    s2.evaluation.labels = {JudgmentLabel::No, JudgmentLabel::Yes};

    auto prob = aggregate_reward({s1}, ScoringStrategy::parse("1prob"));
    CHECK(prob.value == doctest::Approx(((0.8 + 0.1) + (0.1 + 0.3)) / 2));
    CHECK(prob.per_item[0] == doctest::Approx(0.9));

    auto res = aggregate_reward({s1}, ScoringStrategy::parse("1res"));
    CHECK(res.value == doctest::Approx(0.75));

    auto avg = aggregate_reward({s1, s2}, ScoringStrategy::parse("2avg"));
    CHECK(avg.value == doctest::Approx((0.75 + 0.5) / 2));
    CHECK(avg.samples_used == 2);

    CHECK_THROWS_AS(aggregate_reward({s1}, ScoringStrategy::parse("2avg")), ArityError);
    RewardSample short_sample;
    short_sample.evaluation.labels = {JudgmentLabel::Yes};
    short_sample.distributions = {LabelDistribution::one_hot(JudgmentLabel::Yes)};
    CHECK_THROWS_AS(aggregate_reward({s1, short_sample}, ScoringStrategy::parse("2avg")), ArityError);
}

TEST_CASE("likert and three-class baselines") {
    CHECK(parse_likert_score("Reasoning\nSCORE: 4") == 4);
    CHECK(parse_likert_score("**Score**:\n[5]") == 5);
    CHECK_FALSE(parse_likert_score("SCORE: 10").has_value());
    CHECK_FALSE(parse_likert_score("score unknown").has_value());
    CHECK(likert_reward({"SCORE: 5", "SCORE: 3", "junk"}) == doctest::Approx(0.75));
    CHECK(likert_reward({"SCORE: 1"}) == 0.0);
    CHECK_THROWS_AS(likert_reward({"junk"}), NoScore);

    CHECK(three_class_reward({"The action is **Helpful**."}) == 1.0);
    CHECK(three_class_reward({"Neutral"}) == 0.5);
    CHECK(three_class_reward({"not helpful at all", "helpful"}) == 0.5);
    CHECK_THROWS_AS(three_class_reward({"??"}), NoScore);
}

TEST_CASE("build_reward_sample locates the label token of each item") {
    // Text: "CHECKLIST EVALUATION:\nChecklist 1: Yes\nChecklist 2: In Progress"
    Completion c;
    c.tokens = {tok("CHECK", -0.1),        tok("LIST", -0.1),  tok(" EVALUATION", -0.1), tok(":", -0.1),
                tok("\n", -0.1),           tok("Checklist", -0.1), tok(" 1", -0.1),     tok(":", -0.1),
                tok(G + "Yes", std::log(0.7), {{G + "Yes", std::log(0.7)}, {G + "No", std::log(0.2)}, {G + "In", std::log(0.1)}}),
                tok("\n", -0.1),           tok("Checklist", -0.1), tok(" 2", -0.1),     tok(":", -0.1),
                tok(" In", std::log(0.5), {{" In", std::log(0.5)}, {" Yes", std::log(0.5)}}),
                tok(" Progress", -0.1)};
    for (const auto& t : c.tokens) {
        std::string decoded = t.token;
        if (decoded.starts_with(G)) decoded = " " + decoded.substr(G.size());
        c.text += decoded;
    }
    REQUIRE(c.text == "CHECKLIST EVALUATION:\nChecklist 1: Yes\nChecklist 2: In Progress");

    auto s = build_reward_sample(c, 2, VerbalizerTable::defaults());
    REQUIRE(s.distributions.size() == 2);
    CHECK(s.distributions[0].p_yes == doctest::Approx(0.7));
    CHECK(s.distributions[0].p_no == doctest::Approx(0.2));
    CHECK(s.distributions[1].p_inprogress == doctest::Approx(0.5));
    CHECK(s.distributions[1].p_yes == doctest::Approx(0.5));
    CHECK(s.evaluation.labels[1] == JudgmentLabel::InProgress);

    // Without tokens the hard labels become one-hot distributions.
    c.tokens.clear();
    auto hard = build_reward_sample(c, 2, VerbalizerTable::defaults());
    CHECK(hard.distributions[0].p_yes == 1.0);
    CHECK(hard.distributions[1].p_inprogress == 1.0);
}

TEST_CASE("anchor falls back to a token whose alternatives hit the table") {
    // The emitted token is not an alias, but its alternatives are.
    Completion c;
    c.text = "CHECKLIST EVALUATION:\nChecklist 1: Affirmative";
    c.tokens = {tok("CHECKLIST EVALUATION:\nChecklist 1:", -0.1),
                tok(" Affirmative", std::log(0.4), {{" Yes", std::log(0.3)}, {" No", std::log(0.3)}})};
    auto s = build_reward_sample(c, 1, VerbalizerTable::defaults());
    CHECK(s.distributions[0].p_yes == doctest::Approx(0.5));
    CHECK(s.distributions[0].p_no == doctest::Approx(0.5));
    CHECK(s.evaluation.labels[0] == JudgmentLabel::No);
}

TEST_CASE("default alias table matches the golden listing") {
    auto golden = read_text_file(testing::data_dir() / "golden" / "verbalizer_default.txt");
    CHECK(VerbalizerTable::defaults().serialize() == golden);
}
