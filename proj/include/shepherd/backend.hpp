#pragma once

// Model access: chat-completion requests with sampling controls and token
// log-probabilities, plus decorators for retries, concurrency bounds and
// usage metering.

#include "shepherd/error.hpp"
#include "shepherd/types.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

namespace shepherd {

/// One piece of a user message: text, or an image attachment.
struct PromptPart {
    std::string text;
    std::optional<Screenshot> image;
};

struct Prompt {
    std::string system;
    std::vector<PromptPart> parts;

    static Prompt from_text(std::string text);

    /// Builds a prompt from rendered template text. With a screenshot the text
    /// is split around <IMAGE_PLACEHOLDER>; without one the screenshot section
    /// is removed.
    static Prompt with_optional_image(const std::string& rendered, const std::optional<Screenshot>& shot);

    /// Concatenated text parts, images shown as "<image:media/type>".
    std::string flatten() const;
};

/// Whitespace-normalized prompt text: CRLF -> LF, trailing spaces stripped
/// per line, outer whitespace trimmed.
std::string normalize_prompt(const Prompt& prompt);

/// Hex SHA-256 of normalize_prompt(prompt); the key of mock fixtures.
std::string prompt_fingerprint(const Prompt& prompt);

std::string sha256_hex(std::string_view data);

struct TokenUsage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        input_tokens += o.input_tokens;
        output_tokens += o.output_tokens;
        return *this;
    }
    friend bool operator==(const TokenUsage&, const TokenUsage&) = default;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<std::pair<std::string, double>> top;
};

struct Completion {
    std::string text;
    std::vector<TokenLogprob> tokens;  // empty unless log-probabilities were requested
    TokenUsage usage;
};

struct CompletionRequest {
    Prompt prompt;
    double temperature = 1.0;
    double top_p = 1.0;
    int n = 1;
    bool logprobs = false;
    int top_logprobs = 20;
    int max_tokens = 2048;
    std::optional<std::uint64_t> seed;
};

class BackendError : public Error {
public:
    enum class Kind { Transport, RateLimited, Server, Client, BadResponse };

    BackendError(Kind kind, int status, const std::string& what) : Error(what), kind_(kind), status_(status) {}

    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }
    bool retryable() const noexcept {
        return kind_ == Kind::Transport || kind_ == Kind::RateLimited || kind_ == Kind::Server;
    }

    /// Maps an HTTP status to the matching error kind.
    static BackendError from_status(int status, const std::string& body);

private:
    Kind kind_;
    int status_;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// Returns exactly request.n completions or throws.
    virtual std::vector<Completion> complete(const CompletionRequest& request) = 0;

    virtual bool supports_logprobs() const { return true; }
    virtual std::string name() const = 0;
};

using BackendPtr = std::shared_ptr<ModelBackend>;

/// Checks the n-completions contract; throws BackendError(BadResponse).
void check_completion_count(const CompletionRequest& request, const std::vector<Completion>& out,
                            std::string_view backend);

/// Backend driven by a callback; used for planted oracles in tests.
class FunctionBackend final : public ModelBackend {
public:
    using Fn = std::function<std::vector<Completion>(const CompletionRequest&)>;

    FunctionBackend(std::string name, Fn fn, bool logprobs = true)
        : name_(std::move(name)), fn_(std::move(fn)), logprobs_(logprobs) {}

    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return logprobs_; }
    std::string name() const override { return name_; }

private:
    std::string name_;
    Fn fn_;
    bool logprobs_;
};

struct RetryPolicy {
    /// Delay before each retry; the number of retries is delays.size().
    std::vector<std::chrono::milliseconds> delays{std::chrono::seconds(1), std::chrono::seconds(4),
                                                  std::chrono::seconds(16)};
};

/// Retries transport errors, 429 and 5xx with the policy's backoff.
class RetryingBackend final : public ModelBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    RetryingBackend(BackendPtr inner, RetryPolicy policy, Sleeper sleeper = {});

    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return inner_->supports_logprobs(); }
    std::string name() const override { return inner_->name(); }

private:
    BackendPtr inner_;
    RetryPolicy policy_;
    Sleeper sleep_;
};

using RequestSlots = std::counting_semaphore<1024>;

/// Shared pool of in-flight request slots (clamped to [1, 1024]).
std::shared_ptr<RequestSlots> make_request_slots(int max_concurrency);

/// Bounds the number of in-flight requests; backends built with the same
/// slot pool share one global limit.
class ConcurrencyLimitedBackend final : public ModelBackend {
public:
    ConcurrencyLimitedBackend(BackendPtr inner, int max_concurrency);
    ConcurrencyLimitedBackend(BackendPtr inner, std::shared_ptr<RequestSlots> slots);

    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return inner_->supports_logprobs(); }
    std::string name() const override { return inner_->name(); }

private:
    BackendPtr inner_;
    std::shared_ptr<RequestSlots> slots_;
};

/// Thread-safe token usage accumulator.
class UsageMeter {
public:
    void add(const TokenUsage& u);
    TokenUsage total() const;
    std::int64_t completions() const;

private:
    mutable std::mutex mu_;
    TokenUsage total_;
    std::int64_t completions_ = 0;
};

/// Records usage of every successfully returned completion exactly once.
class MeteredBackend final : public ModelBackend {
public:
    MeteredBackend(BackendPtr inner, std::shared_ptr<UsageMeter> meter)
        : inner_(std::move(inner)), meter_(std::move(meter)) {}

    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return inner_->supports_logprobs(); }
    std::string name() const override { return inner_->name(); }

private:
    BackendPtr inner_;
    std::shared_ptr<UsageMeter> meter_;
};

}  // namespace shepherd
