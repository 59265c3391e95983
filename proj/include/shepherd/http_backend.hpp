#pragma once

// Chat-completions client (OpenAI wire format) over HTTP(S).

#include "shepherd/backend.hpp"
#include "shepherd/io.hpp"

#include <chrono>

namespace shepherd {

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com/v1";  // POSTs to <base_url>/chat/completions
    std::string model;
    std::string api_key_env = "SHEPHERD_API_KEY";
    std::chrono::seconds timeout{120};
    bool logprobs = true;
};

/// Request body for a completion request. Images are inlined as base64
/// data URLs read from the screenshot path.
Json build_chat_request(const CompletionRequest& request, const std::string& model);

/// Converts a response body into exactly `n` completions. Prompt tokens are
/// billed on the first completion and output tokens split evenly, so summing
/// usage over the list gives the request's usage. Throws
/// BackendError(BadResponse) on malformed bodies or a wrong choice count.
std::vector<Completion> parse_chat_response(const Json& body, int n);

std::string base64_encode(std::string_view bytes);

class HttpChatBackend final : public ModelBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig cfg);

    std::vector<Completion> complete(const CompletionRequest& request) override;
    bool supports_logprobs() const override { return cfg_.logprobs; }
    std::string name() const override { return cfg_.model; }

private:
    HttpBackendConfig cfg_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // path prefix of base_url
};

}  // namespace shepherd
