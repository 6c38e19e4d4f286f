#include <doctest.h>

#include <httplib.h>

#include <cstdlib>
#include <optional>
#include <thread>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/llm.hpp"
#include "helpers.hpp"

using namespace dafny_pilot;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kKeyEnv = "DAFNY_PILOT_TEST_KEY";
const char* kSecret = "sk-test-do-not-leak-0123456789";

RenderedPrompt prompt_of(std::string user, int round = 1) {
    RenderedPrompt p;
    p.messages = {Message{Role::System, "sys"}, Message{Role::User, std::move(user)}};
    p.round = round;
    return p;
}

std::string ok_body(const std::string& text, const std::string& finish = "stop") {
    return json{{"id", "chatcmpl-1"},
                {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", finish}}}},
                {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}}
        .dump();
}

/// Replays a scripted list of replies and records what it was sent.
class ScriptedTransport : public HttpTransport {
public:
    explicit ScriptedTransport(std::vector<HttpReply> replies) : replies_(std::move(replies)) {}
    HttpReply post_json(const std::string& url, const std::string& body,
                        const std::vector<std::pair<std::string, std::string>>& headers, double) override {
        urls.push_back(url);
        bodies.push_back(body);
        header_sets.push_back(headers);
        if (next_ >= replies_.size()) return HttpReply{0, "", true, "script exhausted"};
        return replies_[next_++];
    }
    std::vector<std::string> urls;
    std::vector<std::string> bodies;
    std::vector<std::vector<std::pair<std::string, std::string>>> header_sets;

private:
    std::vector<HttpReply> replies_;
    size_t next_ = 0;
};

ProviderConfig live_config() {
    ProviderConfig c;
    c.api_key_env = kKeyEnv;
    c.backoff_base = std::chrono::milliseconds(1);
    c.endpoint_url = "http://127.0.0.1:9/v1/chat/completions";
    return c;
}

struct KeyGuard {
    KeyGuard() { ::setenv(kKeyEnv, kSecret, 1); }
    ~KeyGuard() { ::unsetenv(kKeyEnv); }
};

std::string all_files_under(const fs::path& dir) {
    std::string out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out += test::read(e.path());
    }
    return out;
}

}  // namespace

TEST_CASE("cassette key is stable and sensitive to its inputs") {
    const std::vector<Message> m = {Message{Role::User, "hi"}};
    const std::string k = cassette_key("gpt-4-1106-preview", 0.0, m);
    CHECK(k.size() == 64);
    CHECK(k == cassette_key("gpt-4-1106-preview", 0.0, m));
    CHECK(k != cassette_key("gpt-4-1106-preview", 0.5, m));
    CHECK(k != cassette_key("other", 0.0, m));
    CHECK(k != cassette_key("gpt-4-1106-preview", 0.0, {Message{Role::System, "hi"}}));
}

TEST_CASE("request body") {
    ProviderConfig c;
    c.max_output_tokens = 123;
    const json b = request_body(c, {Message{Role::System, "s"}, Message{Role::User, "u"}});
    CHECK(b.at("model") == c.model_id);
    CHECK(b.at("n") == 1);
    CHECK(b.at("max_tokens") == 123);
    CHECK(b.at("messages").size() == 2);
    CHECK(b.at("messages")[0].at("role") == "system");
}

TEST_CASE("provider config validation") {
    ProviderConfig c;
    c.mode = ProviderMode::Replay;
    CHECK_THROWS_AS(c.validate(), Error);  // no cassette dir
    ProviderConfig t;
    t.mode = ProviderMode::Replay;
    t.cassette_dir = ".";
    CHECK_NOTHROW(t.validate());
    t.temperature = -1;
    CHECK_THROWS_AS(t.validate(), Error);
    t.temperature = 0.2;
    t.max_attempts = 0;
    CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("replay serves responses in order and then misses") {
    TempDir dir;
    ProviderConfig c;
    c.mode = ProviderMode::Replay;
    c.cassette_dir = dir.path();
    const RenderedPrompt p = prompt_of("question");
    append_to_cassette(dir.path(), c, p.messages, CompletionResponse{"first", FinishReason::Stop, {}, {}});
    append_to_cassette(dir.path(), c, p.messages, CompletionResponse{"second", FinishReason::Length, {}, {}});

    LlmClient client(c);
    const CompletionResponse a = client.complete(p);
    const CompletionResponse b = client.complete(p);
    CHECK(a.text == "first");
    CHECK(b.text == "second");
    CHECK(b.finish_reason == FinishReason::Length);
    const std::string key = cassette_key(c.model_id, c.temperature, p.messages);
    CHECK(a.provenance.source_id == key + "#0");
    CHECK(b.provenance.source_id == key + "#1");
    CHECK_THROWS_AS(client.complete(p), Error);
    CHECK(client.network_requests() == 0);
}

TEST_CASE("property: replay determinism") {
    TempDir dir;
    ProviderConfig c;
    c.mode = ProviderMode::Replay;
    c.cassette_dir = dir.path();
    test::Rng rng(5);
    std::vector<RenderedPrompt> prompts;
    for (int i = 0; i < 20; ++i) {
        prompts.push_back(prompt_of("q" + std::to_string(rng.below(1000)) + "-" + std::to_string(i)));
        append_to_cassette(dir.path(), c, prompts.back().messages,
                           CompletionResponse{"answer " + std::to_string(i), FinishReason::Stop, {}, {}});
    }
    std::vector<std::string> first;
    std::vector<std::string> second;
    for (int run = 0; run < 2; ++run) {
        LlmClient client(c);
        for (const RenderedPrompt& p : prompts) (run == 0 ? first : second).push_back(client.complete(p).text);
    }
    CHECK(first == second);
    CHECK(first[7] == "answer 7");
}

TEST_CASE("replay miss captures the request snapshot") {
    TempDir dir;
    TempDir cap;
    ProviderConfig c;
    c.mode = ProviderMode::Replay;
    c.cassette_dir = dir.path();
    c.capture_dir = cap.path();
    LlmClient client(c);
    const RenderedPrompt p = prompt_of("unknown");
    try {
        client.complete(p);
        FAIL("expected ReplayMiss");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ReplayMiss);
    }
    const std::string key = cassette_key(c.model_id, c.temperature, p.messages);
    const json snap = json::parse(test::read(cap.path() / (key + ".request.json")));
    CHECK(sha256_hex(snap.dump()) == key);
}

TEST_CASE("cassette files hold the key variable name only") {
    TempDir dir;
    KeyGuard guard;
    ProviderConfig c = live_config();
    c.mode = ProviderMode::Record;
    c.cassette_dir = dir.path();
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{200, ok_body("lemma X() {}")}});
    LlmClient client(c, transport);
    const RenderedPrompt p = prompt_of("record me");
    CHECK(client.complete(p).text == "lemma X() {}");

    const std::string stored = all_files_under(dir.path());
    CHECK(stored.find(kSecret) == std::string::npos);
    CHECK(stored.find(kKeyEnv) != std::string::npos);

    const Cassette cas = Cassette::load(cassette_path(dir.path(), cassette_key(c.model_id, c.temperature, p.messages)));
    CHECK(cas.recompute_key() == cas.key);
    REQUIRE(cas.responses.size() == 1);
    CHECK(cas.responses[0].text == "lemma X() {}");

    // The recorded cassette replays without a network.
    ProviderConfig r = c;
    r.mode = ProviderMode::Replay;
    LlmClient replay(r);
    CHECK(replay.complete(p).text == "lemma X() {}");
}

TEST_CASE("live mode sends a bearer token and parses the reply") {
    KeyGuard guard;
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{200, ok_body("hello")}});
    LlmClient client(live_config(), transport);
    const CompletionResponse r = client.complete(prompt_of("x", 2));
    CHECK(r.text == "hello");
    CHECK(r.finish_reason == FinishReason::Stop);
    REQUIRE(r.usage);
    CHECK(r.usage->prompt_tokens == 11);
    CHECK(r.usage->output_tokens == 7);
    CHECK(r.provenance.round == 2);
    REQUIRE(transport->header_sets.size() == 1);
    CHECK(transport->header_sets[0][0].second == std::string("Bearer ") + kSecret);
    CHECK(json::parse(transport->bodies[0]).at("messages")[1].at("content") == "x");
}

TEST_CASE("live mode without a key") {
    ::unsetenv(kKeyEnv);
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{});
    try {
        LlmClient client(live_config(), transport);
        FAIL("expected AuthMissing");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AuthMissing);
    }

    // The key disappearing after construction is caught before any request.
    std::optional<LlmClient> client;
    {
        KeyGuard guard;
        client.emplace(live_config(), transport);
    }
    try {
        client->complete(prompt_of("x"));
        FAIL("expected AuthMissing");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::AuthMissing);
    }
    CHECK(transport->bodies.empty());
}

TEST_CASE("transient failures are retried up to the limit") {
    KeyGuard guard;
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpReply>{{429, "slow down"}, {503, "busy"}, {200, ok_body("third time")}});
    LlmClient client(live_config(), transport);
    CHECK(client.complete(prompt_of("x")).text == "third time");
    CHECK(client.network_requests() == 3);

    auto failing = std::make_shared<ScriptedTransport>(
        std::vector<HttpReply>{{500, "a"}, {500, "b"}, {500, "c"}, {200, ok_body("never")}});
    LlmClient c2(live_config(), failing);
    try {
        c2.complete(prompt_of("x"));
        FAIL("expected ProviderError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ProviderError);
        CHECK(std::string(e.what()).find(kSecret) == std::string::npos);
    }
    CHECK(failing->bodies.size() == 3);

    auto down = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{});
    LlmClient c3(live_config(), down);
    try {
        c3.complete(prompt_of("x"));
        FAIL("expected NetworkError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NetworkError);
    }
}

TEST_CASE("client errors are not retried") {
    KeyGuard guard;
    auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpReply>{{401, "bad key"}, {200, ok_body("x")}});
    LlmClient client(live_config(), transport);
    CHECK_THROWS_AS(client.complete(prompt_of("x")), Error);
    CHECK(transport->bodies.size() == 1);
}

TEST_CASE("empty content and truncation") {
    KeyGuard guard;
    auto transport = std::make_shared<ScriptedTransport>(
        std::vector<HttpReply>{{200, ok_body("")}, {200, ok_body("partial", "length")}});
    LlmClient client(live_config(), transport);
    CHECK(client.complete(prompt_of("x")).finish_reason == FinishReason::Other);
    CHECK(client.complete(prompt_of("x")).finish_reason == FinishReason::Length);
}

TEST_CASE("http transport against a local server") {
    KeyGuard guard;
    httplib::Server server;
    std::string seen_auth;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.set_content(ok_body("from server"), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ProviderConfig c = live_config();
    c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    LlmClient client(c);
    const CompletionResponse r = client.complete(prompt_of("over the wire"));
    server.stop();
    th.join();

    CHECK(r.text == "from server");
    CHECK(seen_auth == std::string("Bearer ") + kSecret);
    CHECK(json::parse(seen_body).at("messages")[1].at("content") == "over the wire");
}

TEST_CASE("code extraction") {
    SUBCASE("fenced blocks in order") {
        const auto b = extract_code_blocks("text\n```dafny\nlemma A() {}\n```\nmore\n~~~\nlemma B() {}\n~~~\n");
        REQUIRE(b.size() == 2);
        CHECK(b[0] == "lemma A() {}");
        CHECK(b[1] == "lemma B() {}");
    }
    SUBCASE("longer fence contains a shorter one") {
        const auto b = extract_code_blocks("````\n```\ninner\n```\n````\n");
        REQUIRE(b.size() == 1);
        CHECK(b[0] == "```\ninner\n```");
    }
    SUBCASE("unfenced dafny") {
        const auto b = extract_code_blocks(
            "Here is the lemma:\nlemma L(x: int)\n  ensures x + 0 == x\n{\n}\nThat should do it.\n");
        REQUIRE(b.size() == 1);
        CHECK(b[0].find("lemma L(x: int)") == 0);
        CHECK(b[0].find("That should") == std::string::npos);
    }
    SUBCASE("prose only") {
        CHECK(extract_code_blocks("Add an invariant that says the prefix is filled.").empty());
    }
}
