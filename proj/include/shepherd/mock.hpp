#pragma once

// Deterministic scripted backend. Fixture file layout:
//
//   {
//     "mode": "sequence" | "sample",      // default sequence
//     "strict": false,                    // unmatched prompt -> FixtureMiss
//     "default": <completion>,            // reply for unmatched prompts
//     "fixtures": { "<sha256 of normalized prompt>": <entry>, ... },
//     "rules": [ { "contains": "text" | ["a", "b"], ...<entry> }, ... ]
//   }
//
// where <entry> is {"variants": [<completion>, ...], "mode"?: ...} and a
// <completion> is a string or {"text", "tokens", "usage"}. Rules are tried in
// order after the fingerprint table; all substrings must occur.

#include "shepherd/backend.hpp"
#include "shepherd/io.hpp"

#include <map>

namespace shepherd {

struct MockFixtures {
    enum class Mode { Sequence, Sample };

    struct Entry {
        std::vector<Completion> variants;
        std::optional<Mode> mode;
    };

    struct Rule {
        std::vector<std::string> contains;
        Entry entry;
    };

    Mode mode = Mode::Sequence;
    bool strict = false;
    std::optional<Completion> default_response;
    std::map<std::string, Entry> by_fingerprint;
    std::vector<Rule> rules;

    static MockFixtures from_json(const Json& j);
    static MockFixtures from_file(const std::filesystem::path& path);
    Json to_json() const;
};

class MockBackend final : public ModelBackend {
public:
    MockBackend(MockFixtures fixtures, std::uint64_t seed, bool logprobs = true, std::string name = "mock");

    /// sequence: variant i % V for the i-th completion. sample: variants drawn
    /// with an RNG seeded from (backend seed, request seed, prompt hash).
    /// Usage not given by the fixture is estimated at 4 bytes per token; the
    /// prompt is billed once per request, on the first completion.
    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return logprobs_; }
    std::string name() const override { return name_; }

private:
    const MockFixtures::Entry* match(const std::string& fingerprint, const std::string& normalized) const;

    MockFixtures fixtures_;
    std::uint64_t seed_;
    bool logprobs_;
    std::string name_;
};

}  // namespace shepherd
