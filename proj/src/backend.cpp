#include "shepherd/backend.hpp"

#include "shepherd/prompts.hpp"
#include "shepherd/text.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

namespace shepherd {

Prompt Prompt::from_text(std::string text) {
    Prompt p;
    p.parts.push_back(PromptPart{std::move(text), std::nullopt});
    return p;
}

Prompt Prompt::with_optional_image(const std::string& rendered, const std::optional<Screenshot>& shot) {
    if (!shot) return from_text(strip_image_section(rendered));
    Prompt p;
    auto pos = rendered.find(kImagePlaceholder);
    if (pos == std::string::npos) {
        p.parts.push_back(PromptPart{rendered, std::nullopt});
        p.parts.push_back(PromptPart{{}, shot});
        return p;
    }
    p.parts.push_back(PromptPart{rendered.substr(0, pos), std::nullopt});
    p.parts.push_back(PromptPart{{}, shot});
    p.parts.push_back(PromptPart{rendered.substr(pos + kImagePlaceholder.size()), std::nullopt});
    return p;
}

std::string Prompt::flatten() const {
    std::string out;
    if (!system.empty()) {
        out += system;
        out += "\n\n";
    }
    for (const auto& part : parts) {
        if (part.image) out += fmt::format("<image:{}>", part.image->media_type);
        else out += part.text;
    }
    return out;
}

std::string normalize_prompt(const Prompt& prompt) {
    std::string flat = prompt.flatten();
    std::vector<std::string> lines;
    for (auto line : split_lines(flat)) {
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
        lines.emplace_back(line);
    }
    return std::string(trim(join(lines, "\n")));
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string prompt_fingerprint(const Prompt& prompt) { return sha256_hex(normalize_prompt(prompt)); }

BackendError BackendError::from_status(int status, const std::string& body) {
    auto snippet = body.substr(0, 300);
    if (status == 429) return BackendError(Kind::RateLimited, status, fmt::format("rate limited (429): {}", snippet));
    if (status >= 500) return BackendError(Kind::Server, status, fmt::format("server error {}: {}", status, snippet));
    return BackendError(Kind::Client, status, fmt::format("request rejected {}: {}", status, snippet));
}

void check_completion_count(const CompletionRequest& request, const std::vector<Completion>& out,
                            std::string_view backend) {
    if (out.size() != static_cast<std::size_t>(request.n))
        throw BackendError(BackendError::Kind::BadResponse, 0,
                           fmt::format("{} returned {} completions, expected {}", backend, out.size(), request.n));
}

std::vector<Completion> FunctionBackend::complete(const CompletionRequest& request) {
    auto out = fn_(request);
    check_completion_count(request, out, name_);
    if (!request.logprobs)
        for (auto& c : out) c.tokens.clear();
    return out;
}

RetryingBackend::RetryingBackend(BackendPtr inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(std::move(policy)), sleep_(std::move(sleeper)) {
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::vector<Completion> RetryingBackend::complete(const CompletionRequest& request) {
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            return inner_->complete(request);
        } catch (const BackendError& e) {
            if (!e.retryable() || attempt >= policy_.delays.size()) throw;
            auto delay = policy_.delays[attempt];
            spdlog::warn("{}: {} (retry {}/{} in {} ms)", inner_->name(), e.what(), attempt + 1,
                         policy_.delays.size(), delay.count());
            sleep_(delay);
        }
    }
}

std::shared_ptr<RequestSlots> make_request_slots(int max_concurrency) {
    return std::make_shared<RequestSlots>(std::clamp(max_concurrency, 1, 1024));
}

ConcurrencyLimitedBackend::ConcurrencyLimitedBackend(BackendPtr inner, int max_concurrency)
    : inner_(std::move(inner)), slots_(make_request_slots(max_concurrency)) {}

ConcurrencyLimitedBackend::ConcurrencyLimitedBackend(BackendPtr inner, std::shared_ptr<RequestSlots> slots)
    : inner_(std::move(inner)), slots_(std::move(slots)) {}

std::vector<Completion> ConcurrencyLimitedBackend::complete(const CompletionRequest& request) {
    slots_->acquire();
    struct Release {
        RequestSlots& s;
        ~Release() { s.release(); }
    } release{*slots_};
    return inner_->complete(request);
}

void UsageMeter::add(const TokenUsage& u) {
    std::lock_guard lock(mu_);
    total_ += u;
    ++completions_;
}

TokenUsage UsageMeter::total() const {
    std::lock_guard lock(mu_);
    return total_;
}

std::int64_t UsageMeter::completions() const {
    std::lock_guard lock(mu_);
    return completions_;
}

std::vector<Completion> MeteredBackend::complete(const CompletionRequest& request) {
    auto out = inner_->complete(request);
    for (const auto& c : out) meter_->add(c.usage);
    return out;
}

}  // namespace shepherd
