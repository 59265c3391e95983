#include "doctest.h"
#include "support.hpp"

#include "shepherd/error.hpp"
#include "shepherd/http_backend.hpp"
#include "shepherd/io.hpp"

#include "httplib.h"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

using namespace shepherd;

namespace {

/// Local chat-completions endpoint on an ephemeral port.
class FakeServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
    explicit FakeServer(Handler h) {
        server_.Post("/v1/chat/completions", [this, h](const httplib::Request& req, httplib::Response& res) {
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(Json::parse(req.body));
                auth_.push_back(req.get_header_value("Authorization"));
            }
            h(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    Json body(std::size_t i) {
        std::lock_guard lock(mu_);
        return bodies_.at(i);
    }
    std::string auth(std::size_t i) {
        std::lock_guard lock(mu_);
        return auth_.at(i);
    }
    std::size_t calls() {
        std::lock_guard lock(mu_);
        return bodies_.size();
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::mutex mu_;
    std::vector<Json> bodies_;
    std::vector<std::string> auth_;
};

Json ok_body(int n) {
    Json choices = Json::array();
    for (int i = 0; i < n; ++i) {
        Json content = Json::array({Json{{"token", " Yes"},
                                         {"logprob", -0.1},
                                         {"top_logprobs", Json::array({Json{{"token", " Yes"}, {"logprob", -0.1}},
                                                                       Json{{"token", " No"}, {"logprob", -2.5}}})}}});
        choices.push_back(Json{{"index", n - 1 - i},
                               {"message", Json{{"role", "assistant"}, {"content", "reply " + std::to_string(n - 1 - i)}}},
                               {"logprobs", Json{{"content", content}}}});
    }
    return Json{{"choices", choices}, {"usage", Json{{"prompt_tokens", 100}, {"completion_tokens", 7}}}};
}

HttpBackendConfig config_for(const FakeServer& s) {
    HttpBackendConfig cfg;
    cfg.base_url = s.base_url();
    cfg.model = "judge-model";
    cfg.api_key_env = "SHEPHERD_TEST_HTTP_KEY";
    cfg.timeout = std::chrono::seconds(5);
    return cfg;
}

}  // namespace

TEST_CASE("base64") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
}

TEST_CASE("request body carries sampling controls and inlined images") {
    testing::TempDir dir("http");
    write_text_file(dir / "shot.png", "PNGDATA");
    CompletionRequest r;
    r.prompt = Prompt::with_optional_image("see <IMAGE_PLACEHOLDER> now", Screenshot{(dir / "shot.png").string(), "image/png"});
    r.temperature = 0.0;
    r.top_p = 0.95;
    r.n = 3;
    r.logprobs = true;
    r.seed = 42;
    auto body = build_chat_request(r, "m");
    CHECK(body["model"] == "m");
    CHECK(body["temperature"] == 0.0);
    CHECK(body["top_p"] == 0.95);
    CHECK(body["n"] == 3);
    CHECK(body["logprobs"] == true);
    CHECK(body["top_logprobs"] == 20);
    CHECK(body["seed"] == 42);
    const auto& content = body["messages"][0]["content"];
    REQUIRE(content.size() == 3);
    CHECK(content[0]["text"] == "see ");
    CHECK(content[1]["image_url"]["url"] == "data:image/png;base64," + base64_encode("PNGDATA"));

    r.logprobs = false;
    r.prompt = Prompt::from_text("plain");
    auto plain = build_chat_request(r, "m");
    CHECK_FALSE(plain.contains("logprobs"));
    CHECK(plain["messages"][0]["content"] == "plain");
}

TEST_CASE("response parsing orders choices and splits usage") {
    auto out = parse_chat_response(ok_body(3), 3);
    CHECK(out[0].text == "reply 0");
    CHECK(out[2].text == "reply 2");
    CHECK(out[0].usage == TokenUsage{100, 3});
    CHECK(out[1].usage == TokenUsage{0, 2});
    CHECK(out[2].usage == TokenUsage{0, 2});
    REQUIRE(out[0].tokens.size() == 1);
    CHECK(out[0].tokens[0].top.size() == 2);
    CHECK_THROWS_AS(parse_chat_response(ok_body(2), 3), BackendError);
    CHECK_THROWS_AS(parse_chat_response(Json{{"error", "x"}}, 1), BackendError);
    auto dup = ok_body(2);
    dup["choices"][1]["index"] = 1;
    dup["choices"][0]["index"] = 1;
    CHECK_THROWS_AS(parse_chat_response(dup, 2), BackendError);
}

TEST_CASE("client talks to a local endpoint") {
    ::setenv("SHEPHERD_TEST_HTTP_KEY", "sk-test", 1);
    FakeServer server([](const httplib::Request& req, httplib::Response& res) {
        auto n = Json::parse(req.body)["n"].get<int>();
        res.set_content(ok_body(n).dump(), "application/json");
    });
    HttpChatBackend backend(config_for(server));
    CompletionRequest r;
    r.prompt = Prompt::from_text("hello");
    r.n = 2;
    r.logprobs = true;
    auto out = backend.complete(r);
    REQUIRE(out.size() == 2);
    CHECK(out[1].text == "reply 1");
    CHECK(out[0].tokens.size() == 1);
    CHECK(server.auth(0) == "Bearer sk-test");
    CHECK(server.body(0)["model"] == "judge-model");

    r.logprobs = false;
    CHECK(backend.complete(r)[0].tokens.empty());
}

TEST_CASE("client maps failures and retries rate limits") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
        int k = ++hits;
        if (k == 1) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
        } else if (k == 2) {
            res.status = 503;
        } else {
            res.set_content(ok_body(1).dump(), "application/json");
        }
    });
    auto http = std::make_shared<HttpChatBackend>(config_for(server));
    std::vector<std::chrono::milliseconds> slept;
    RetryingBackend retry(http, RetryPolicy{}, [&](std::chrono::milliseconds d) { slept.push_back(d); });
    CompletionRequest r;
    r.prompt = Prompt::from_text("x");
    CHECK(retry.complete(r).front().text == "reply 0");
    CHECK(hits == 3);
    CHECK(slept.size() == 2);

    FakeServer rejecting([](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("{\"error\": \"bad\"}", "application/json");
    });
    HttpChatBackend bad(config_for(rejecting));
    try {
        bad.complete(r);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::Client);
        CHECK(e.status() == 400);
    }

    FakeServer garbage([](const httplib::Request&, httplib::Response& res) { res.set_content("not json", "text/plain"); });
    HttpChatBackend g(config_for(garbage));
    try {
        g.complete(r);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::BadResponse);
    }
}

TEST_CASE("unreachable endpoint is a transport error") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    cfg.model = "m";
    cfg.timeout = std::chrono::seconds(2);
    HttpChatBackend backend(cfg);
    CompletionRequest r;
    r.prompt = Prompt::from_text("x");
    try {
        backend.complete(r);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::Transport);
        CHECK(e.retryable());
    }
    CHECK_THROWS_AS(HttpChatBackend(HttpBackendConfig{"no-scheme", "m"}), ConfigError);
    CHECK_THROWS_AS(HttpChatBackend(HttpBackendConfig{"http://x", ""}), ConfigError);
}
