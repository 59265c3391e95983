#include "httplib.h"

#include "shepherd/http_backend.hpp"

#include "shepherd/error.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <cstdlib>

namespace shepherd {

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                            reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

Json build_chat_request(const CompletionRequest& request, const std::string& model) {
    Json messages = Json::array();
    if (!request.prompt.system.empty()) messages.push_back(Json{{"role", "system"}, {"content", request.prompt.system}});

    bool has_image = false;
    for (const auto& part : request.prompt.parts) has_image = has_image || part.image.has_value();
    if (!has_image) {
        std::string text;
        for (const auto& part : request.prompt.parts) text += part.text;
        messages.push_back(Json{{"role", "user"}, {"content", text}});
    } else {
        Json content = Json::array();
        for (const auto& part : request.prompt.parts) {
            if (part.image) {
                auto bytes = read_text_file(part.image->path);
                auto url = fmt::format("data:{};base64,{}", part.image->media_type, base64_encode(bytes));
                content.push_back(Json{{"type", "image_url"}, {"image_url", Json{{"url", url}}}});
            } else if (!part.text.empty()) {
                content.push_back(Json{{"type", "text"}, {"text", part.text}});
            }
        }
        messages.push_back(Json{{"role", "user"}, {"content", content}});
    }

    Json body{{"model", model},
              {"messages", messages},
              {"temperature", request.temperature},
              {"top_p", request.top_p},
              {"n", request.n},
              {"max_tokens", request.max_tokens}};
    if (request.logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = request.top_logprobs;
    }
    if (request.seed) body["seed"] = *request.seed;
    return body;
}

std::vector<Completion> parse_chat_response(const Json& body, int n) {
    auto bad = [](const std::string& what) { return BackendError(BackendError::Kind::BadResponse, 0, what); };
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array())
        throw bad("response has no \"choices\" array");
    const auto& choices = body["choices"];
    if (choices.size() != static_cast<std::size_t>(n))
        throw bad(fmt::format("response has {} choices, expected {}", choices.size(), n));

    std::vector<Completion> out(static_cast<std::size_t>(n));
    std::vector<bool> filled(out.size(), false);
    for (std::size_t pos = 0; pos < choices.size(); ++pos) {
        const auto& choice = choices[pos];
        auto index = choice.value("index", static_cast<int>(pos));
        if (index < 0 || index >= n) throw bad(fmt::format("choice index {} out of range", index));
        if (filled[static_cast<std::size_t>(index)]) throw bad(fmt::format("duplicate choice index {}", index));
        filled[static_cast<std::size_t>(index)] = true;
        auto& c = out[static_cast<std::size_t>(index)];
        const auto& msg = choice.contains("message") ? choice["message"] : Json::object();
        if (msg.contains("content") && msg["content"].is_string()) c.text = msg["content"].get<std::string>();
        if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
            choice["logprobs"]["content"].is_array()) {
            for (const auto& t : choice["logprobs"]["content"]) {
                TokenLogprob tl;
                tl.token = t.value("token", "");
                tl.logprob = t.value("logprob", 0.0);
                if (t.contains("top_logprobs") && t["top_logprobs"].is_array())
                    for (const auto& alt : t["top_logprobs"])
                        tl.top.emplace_back(alt.value("token", ""), alt.value("logprob", 0.0));
                c.tokens.push_back(std::move(tl));
            }
        }
    }

    if (body.contains("usage") && body["usage"].is_object()) {
        auto in = body["usage"].value("prompt_tokens", std::int64_t{0});
        auto outp = body["usage"].value("completion_tokens", std::int64_t{0});
        out[0].usage.input_tokens = in;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i].usage.output_tokens = outp / n + (static_cast<std::int64_t>(i) < outp % n ? 1 : 0);
    }
    return out;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.model.empty()) throw ConfigError("http backend: model name is required");
    auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError(fmt::format("http backend: bad base_url '{}'", cfg_.base_url));
    auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    origin_ = cfg_.base_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "" : cfg_.base_url.substr(path_start);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
}

std::vector<Completion> HttpChatBackend::complete(const CompletionRequest& request) {
    auto body = build_chat_request(request, cfg_.model).dump();

    httplib::Client client(origin_);
    client.set_connection_timeout(cfg_.timeout);
    client.set_read_timeout(cfg_.timeout);
    client.set_write_timeout(cfg_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", fmt::format("Bearer {}", key));

    auto res = client.Post(path_ + "/chat/completions", headers, body, "application/json");
    if (!res)
        throw BackendError(BackendError::Kind::Transport, 0,
                           fmt::format("{}: {}", origin_, httplib::to_string(res.error())));
    if (res->status != 200) throw BackendError::from_status(res->status, res->body);

    Json parsed;
    try {
        parsed = Json::parse(res->body);
    } catch (const Json::exception& e) {
        throw BackendError(BackendError::Kind::BadResponse, res->status, fmt::format("invalid JSON body: {}", e.what()));
    }
    auto out = parse_chat_response(parsed, request.n);
    if (!request.logprobs)
        for (auto& c : out) c.tokens.clear();
    return out;
}

}  // namespace shepherd
