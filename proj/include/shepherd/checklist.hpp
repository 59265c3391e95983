#pragma once

// Checklists: ordered subgoals that serve as the scoring rubric, the prompts
// that generate them, and parsers for checklist and judgment text.

#include "shepherd/backend.hpp"
#include "shepherd/types.hpp"

#include <string>
#include <vector>

namespace shepherd {

inline constexpr std::size_t kMaxChecklistItems = 8;

struct Subgoal {
    int index = 0;  // 1-based
    std::string title;
    std::string goal_desc;

    friend bool operator==(const Subgoal&, const Subgoal&) = default;
};

enum class ChecklistSource { Reference, Generated };

struct Checklist {
    std::vector<Subgoal> items;
    ChecklistSource source = ChecklistSource::Reference;
};

enum class JudgmentLabel { Yes, InProgress, No };

std::string_view label_name(JudgmentLabel l) noexcept;

struct ChecklistEvaluation {
    std::string reason;
    std::vector<JudgmentLabel> labels;
};

enum class ChecklistStyle { Baseline, Shepherd };

/// Instantiates the checklist-generation template for the task.
/// Throws TemplateError when intent or start_url is empty.
std::string build_checklist_prompt(const TaskSpec& task, ChecklistStyle style);

/// Canonical text form:
///   Checklist 1: <title>
///   - Goal: <description>
/// with a blank line between items.
std::string render_checklist(const Checklist& c);

/// Extracts every "Checklist N:" block with its "- Goal:" body, in order.
/// Titles may sit on the header line or the next non-empty line. Leading
/// analysis text is ignored. Items beyond kMaxChecklistItems are dropped with
/// a warning. Throws ParseError when no item is found.
Checklist parse_checklist(std::string_view text);

/// Position of one "Checklist N:" judgment in the evaluation text.
struct LabelSpan {
    int item = 0;                   // 1-based
    std::size_t after_header = 0;   // offset just past "Checklist N:"
    std::size_t section_end = 0;    // offset where the next item (or text) ends
};

struct ParsedEvaluation {
    ChecklistEvaluation evaluation;
    std::vector<std::optional<LabelSpan>> spans;  // one per expected item
};

/// Reads "CHECKLIST EVALUATION:" judgments. Labels match case-insensitively;
/// missing items default to No. Throws ParseError if the section is absent.
ChecklistEvaluation parse_evaluation(std::string_view text, int expected_items);

/// parse_evaluation plus the offsets of each judgment, used to locate the
/// label token in the log-probability stream.
ParsedEvaluation parse_evaluation_with_spans(std::string_view text, int expected_items);

struct QualityScores {
    double validity = 0.0;
    double granularity = 0.0;
    double coverage = 0.0;

    double overall() const { return (validity + granularity + coverage) / 3.0; }
};

struct GevalOptions {
    int ratings = 3;         // judge calls per criterion, averaged
    int attempts = 3;        // tries per rating before JudgeError
    double temperature = 1.0;
    std::uint64_t seed = 0;
};

/// Parses a 1..5 score from "Score: 4" or "Score:\n4". Returns nullopt when
/// no score line is present.
std::optional<double> parse_judge_score(std::string_view text);

/// Rates a generated checklist against a reference on three criteria.
/// Throws JudgeError if a rating cannot be parsed after all attempts.
QualityScores geval_checklist_quality(const Checklist& generated, const Checklist& reference, const TaskSpec& task,
                                      ModelBackend& judge, const GevalOptions& opts = {});

}  // namespace shepherd
