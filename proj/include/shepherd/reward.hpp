#pragma once

// Step rewards from judge responses: verbalizer label probabilities, the
// checklist score (yes + half of in-progress, averaged over items and
// samples), the four scoring strategies, and the Likert / three-class
// baselines.

#include "shepherd/backend.hpp"
#include "shepherd/checklist.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace shepherd {

/// Maps " Yes" -> "ĠYes" and "\nYes" -> "ĊYes" (byte-level BPE spelling) so
/// decoded tokens from any backend can be matched against the alias table.
std::string normalize_token(std::string_view token);

class VerbalizerTable {
public:
    /// Throws ConfigError if a list is empty or the lists overlap.
    VerbalizerTable(std::vector<std::string> yes, std::vector<std::string> in_progress, std::vector<std::string> no);

    static const VerbalizerTable& defaults();

    /// JSON object {"Yes": [...], "In Progress": [...], "No": [...]}.
    static VerbalizerTable from_json(std::string_view json_text);
    static VerbalizerTable from_file(const std::string& path);

    const std::vector<std::string>& aliases(JudgmentLabel label) const;

    /// Label whose alias list contains the token (raw or normalized).
    std::optional<JudgmentLabel> lookup(std::string_view token) const;

    /// One line per label: `Yes: ["ĠYes", ...]`, then No, then In Progress.
    std::string serialize() const;

private:
    std::array<std::vector<std::string>, 3> aliases_;  // indexed by JudgmentLabel
};

struct LabelDistribution {
    double p_yes = 0.0;
    double p_inprogress = 0.0;
    double p_no = 0.0;

    static LabelDistribution one_hot(JudgmentLabel label);
};

using TokenAlternatives = std::vector<std::pair<std::string, double>>;

/// Sums exp(logprob) of alias hits per label and renormalizes over the three
/// labels. Throws NoLabelMass when nothing matches.
LabelDistribution extract_label_distribution(const TokenAlternatives& token_logprobs, const VerbalizerTable& table);

double item_reward(const LabelDistribution& d);

struct RewardSample {
    ChecklistEvaluation evaluation;
    std::vector<LabelDistribution> distributions;  // one per checklist item
    std::string raw_response;
};

enum class ScoreMode { Prob, Token };

struct ScoringStrategy {
    enum class Kind { OneRes, OneProb, FiveAvg, FiveProb };

    Kind kind = Kind::FiveProb;
    int samples = 5;  // K for the Five* variants

    int sample_count() const { return single() ? 1 : samples; }
    double temperature() const { return single() ? 0.0 : 1.0; }
    ScoreMode mode() const { return kind == Kind::OneProb || kind == Kind::FiveProb ? ScoreMode::Prob : ScoreMode::Token; }

    /// The Token-mode twin used when the backend has no log-probabilities.
    ScoringStrategy without_logprobs() const;

    std::string name() const;
    /// Accepts 1res, 1prob, 5avg, 5prob (any K, e.g. "3prob"). Throws ConfigError.
    static ScoringStrategy parse(std::string_view s);

    friend bool operator==(const ScoringStrategy&, const ScoringStrategy&) = default;

private:
    bool single() const { return kind == Kind::OneRes || kind == Kind::OneProb; }
};

struct RewardScore {
    double value = 0.0;
    std::vector<double> per_item;
    ScoringStrategy strategy;
    int samples_used = 0;
};

double sample_reward(const RewardSample& s, ScoreMode mode);

/// Mean of sample_reward over the K samples; per_item holds item-wise means.
/// Throws ArityError when samples.size() != strategy.sample_count() or the
/// samples disagree on the number of items.
RewardScore aggregate_reward(const std::vector<RewardSample>& samples, const ScoringStrategy& strategy);

/// Integer 1..5 from a "SCORE:" line (value on the same or next line).
std::optional<int> parse_likert_score(std::string_view response);

/// (mean - 1) / 4 over parseable responses. Throws NoScore if none parse.
double likert_reward(const std::vector<std::string>& responses);

/// helpful -> 1, neutral -> 0.5, not helpful -> 0, averaged. Throws NoScore.
double three_class_reward(const std::vector<std::string>& responses);

/// Parses a judge completion into a RewardSample. Each item's distribution
/// is read at the first token after its "Checklist N:" header whose
/// alternatives hit the verbalizer; without such a token (or without
/// log-probabilities) the hard label is used as a one-hot distribution.
RewardSample build_reward_sample(const Completion& completion, int expected_items, const VerbalizerTable& table);

}  // namespace shepherd
