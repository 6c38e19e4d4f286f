#include "dafny_pilot/llm.hpp"

#include <httplib.h>

#include <array>
#include <cstdlib>
#include <thread>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(ProviderMode m) {
    switch (m) {
        case ProviderMode::Live: return "live";
        case ProviderMode::Record: return "record";
        case ProviderMode::Replay: return "replay";
    }
    return "live";
}

std::string_view to_string(FinishReason f) {
    switch (f) {
        case FinishReason::Stop: return "stop";
        case FinishReason::Length: return "length";
        case FinishReason::Other: return "other";
    }
    return "other";
}

FinishReason finish_reason_from_string(std::string_view s) {
    if (s == "stop") return FinishReason::Stop;
    if (s == "length") return FinishReason::Length;
    return FinishReason::Other;
}

void ProviderConfig::validate() const {
    if (mode == ProviderMode::Replay || mode == ProviderMode::Record) {
        if (cassette_dir.empty()) {
            throw Error(ErrorCode::InvalidArgument, std::string(to_string(mode)) + " mode needs a cassette directory");
        }
    }
    if (mode == ProviderMode::Live || mode == ProviderMode::Record) {
        const char* key = std::getenv(api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorCode::AuthMissing, "environment variable " + api_key_env + " is not set");
        }
    }
    if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidArgument, "temperature must be within [0, 2]");
    }
    if (max_output_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be >= 1");
}

json to_json(const CompletionResponse& r) {
    json j{{"text", r.text},
           {"finish_reason", to_string(r.finish_reason)},
           {"provenance", {{"source_id", r.provenance.source_id}, {"round", r.provenance.round}}}};
    if (r.usage) {
        j["usage"] = {{"prompt_tokens", r.usage->prompt_tokens}, {"output_tokens", r.usage->output_tokens}};
    }
    return j;
}

CompletionResponse completion_from_json(const json& j) {
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    r.finish_reason = finish_reason_from_string(j.value("finish_reason", "stop"));
    if (j.contains("usage")) {
        r.usage = Usage{j.at("usage").value("prompt_tokens", 0), j.at("usage").value("output_tokens", 0)};
    }
    if (j.contains("provenance")) {
        r.provenance.source_id = j.at("provenance").value("source_id", "");
        r.provenance.round = j.at("provenance").value("round", 1);
    }
    return r;
}

namespace {

json snapshot(std::string_view model_id, double temperature, const std::vector<Message>& messages) {
    return json{{"model", model_id}, {"temperature", temperature}, {"messages", messages_to_json(messages)}};
}

std::mutex& dir_mutex(const fs::path& dir) {
    static std::mutex registry_mu;
    static std::map<std::string, std::unique_ptr<std::mutex>> registry;
    std::lock_guard lock(registry_mu);
    auto& slot = registry[fs::absolute(dir).lexically_normal().string()];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

}  // namespace

std::string cassette_key(std::string_view model_id, double temperature, const std::vector<Message>& messages) {
    // nlohmann::json objects keep keys sorted, so dump() is canonical.
    return sha256_hex(snapshot(model_id, temperature, messages).dump());
}

json request_body(const ProviderConfig& cfg, const std::vector<Message>& messages) {
    return json{{"model", cfg.model_id},
                {"temperature", cfg.temperature},
                {"max_tokens", cfg.max_output_tokens},
                {"n", 1},
                {"messages", messages_to_json(messages)}};
}

fs::path cassette_path(const fs::path& dir, std::string_view key) { return dir / (std::string(key) + ".json"); }

Cassette Cassette::load(const fs::path& file) {
    const json j = json::parse(read_file(file));
    Cassette c;
    c.key = j.at("key").get<std::string>();
    c.request_snapshot = j.at("request_snapshot");
    for (const json& r : j.at("responses")) c.responses.push_back(completion_from_json(r));
    return c;
}

void Cassette::save(const fs::path& file, std::string_view api_key_env) const {
    json responses_json = json::array();
    for (const CompletionResponse& r : responses) responses_json.push_back(to_json(r));
    const json j{{"key", key},
                 {"api_key_env", api_key_env},
                 {"request_snapshot", request_snapshot},
                 {"responses", responses_json}};
    fs::create_directories(file.parent_path());
    write_file_atomic(file, j.dump(2) + "\n");
}

std::string Cassette::recompute_key() const { return sha256_hex(request_snapshot.dump()); }

void append_to_cassette(const fs::path& dir, const ProviderConfig& cfg, const std::vector<Message>& messages,
                        const CompletionResponse& response) {
    std::lock_guard lock(dir_mutex(dir));
    const std::string key = cassette_key(cfg.model_id, cfg.temperature, messages);
    const fs::path file = cassette_path(dir, key);
    Cassette c;
    if (fs::exists(file)) {
        c = Cassette::load(file);
    } else {
        c.key = key;
        c.request_snapshot = snapshot(cfg.model_id, cfg.temperature, messages);
    }
    c.responses.push_back(response);
    c.save(file, cfg.api_key_env);
}

// ---------------------------------------------------------------------------
// Transport

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpReply post_json(const std::string& url, const std::string& body,
                        const std::vector<std::pair<std::string, std::string>>& headers,
                        double timeout_s) override {
        HttpReply reply;
        const size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            reply.network_error = true;
            reply.error = "malformed endpoint URL";
            return reply;
        }
        const size_t path_start = url.find('/', scheme_end + 3);
        const std::string base = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
        httplib::Client client(base);
        const auto secs = static_cast<time_t>(timeout_s);
        client.set_connection_timeout(std::min<time_t>(secs, 30), 0);
        client.set_read_timeout(secs, 0);
        client.set_write_timeout(secs, 0);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) {
            reply.network_error = true;
            reply.error = httplib::to_string(res.error());
            return reply;
        }
        reply.status = res->status;
        reply.body = res->body;
        return reply;
    }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

// ---------------------------------------------------------------------------
// Client

LlmClient::LlmClient(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
    cfg_.validate();
    if (cfg_.mode != ProviderMode::Replay && !transport_) transport_ = make_http_transport();
}

size_t LlmClient::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

size_t LlmClient::network_requests() const {
    std::lock_guard lock(mu_);
    return network_requests_;
}

CompletionResponse LlmClient::complete(const RenderedPrompt& prompt) {
    if (prompt.messages.empty()) throw Error(ErrorCode::InvalidArgument, "prompt has no messages");
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    if (cfg_.mode == ProviderMode::Replay) return replay(prompt);
    CompletionResponse r = live(prompt);
    if (cfg_.mode == ProviderMode::Record) append_to_cassette(cfg_.cassette_dir, cfg_, prompt.messages, r);
    return r;
}

CompletionResponse LlmClient::replay(const RenderedPrompt& prompt) {
    const std::string key = cassette_key(cfg_.model_id, cfg_.temperature, prompt.messages);
    std::lock_guard lock(mu_);
    auto it = loaded_.find(key);
    if (it == loaded_.end()) {
        const fs::path file = cassette_path(cfg_.cassette_dir, key);
        if (!fs::exists(file)) {
            if (!cfg_.capture_dir.empty()) {
                fs::create_directories(cfg_.capture_dir);
                const json snap = snapshot(cfg_.model_id, cfg_.temperature, prompt.messages);
                write_file_atomic(cfg_.capture_dir / (key + ".request.json"), snap.dump(2) + "\n");
            }
            throw Error(ErrorCode::ReplayMiss, key);
        }
        it = loaded_.emplace(key, Cassette::load(file)).first;
    }
    size_t& cursor = cursor_[key];
    if (cursor >= it->second.responses.size()) {
        throw Error(ErrorCode::ReplayMiss, key + " (all " + std::to_string(it->second.responses.size()) +
                                               " recorded responses consumed)");
    }
    CompletionResponse r = it->second.responses[cursor];
    r.provenance.source_id = key + "#" + std::to_string(cursor);
    r.provenance.round = prompt.round;
    ++cursor;
    return r;
}

CompletionResponse LlmClient::live(const RenderedPrompt& prompt) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error(ErrorCode::AuthMissing, "environment variable " + cfg_.api_key_env + " is not set");
    }
    const std::string body = request_body(cfg_, prompt.messages).dump();
    const std::vector<std::pair<std::string, std::string>> headers{
        {"Authorization", std::string("Bearer ") + key}};

    HttpReply reply;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        {
            std::lock_guard lock(mu_);
            ++network_requests_;
        }
        reply = transport_->post_json(cfg_.endpoint_url, body, headers, cfg_.request_timeout_s);
        const bool transient = reply.network_error || reply.status == 429 || reply.status >= 500;
        if (!transient) break;
        if (attempt < cfg_.max_attempts) {
            std::this_thread::sleep_for(cfg_.backoff_base * (1LL << (attempt - 1)));
        }
    }
    if (reply.network_error) {
        throw Error(ErrorCode::NetworkError, reply.error + " after " + std::to_string(cfg_.max_attempts) + " attempts");
    }
    if (reply.status < 200 || reply.status >= 300) {
        throw Error(ErrorCode::ProviderError, "HTTP " + std::to_string(reply.status) + ": " + reply.body);
    }

    const json j = json::parse(reply.body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j.at("choices").empty()) {
        throw Error(ErrorCode::ProviderError, "HTTP " + std::to_string(reply.status) + ": unexpected body " + reply.body);
    }
    const json& choice = j.at("choices").at(0);
    CompletionResponse r;
    const json& content = choice.contains("message") ? choice.at("message").value("content", json()) : json();
    r.text = content.is_string() ? content.get<std::string>() : "";
    const json& fr = choice.contains("finish_reason") ? choice.at("finish_reason") : json();
    r.finish_reason = fr.is_string() ? finish_reason_from_string(fr.get<std::string>()) : FinishReason::Other;
    if (r.text.empty() && r.finish_reason == FinishReason::Stop) r.finish_reason = FinishReason::Other;
    if (j.contains("usage") && j.at("usage").is_object()) {
        r.usage = Usage{j.at("usage").value("prompt_tokens", 0), j.at("usage").value("completion_tokens", 0)};
    }
    r.provenance.source_id = j.value("id", "live");
    r.provenance.round = prompt.round;
    return r;
}

// ---------------------------------------------------------------------------
// Code extraction

namespace {

struct Fence {
    char ch;
    size_t len;
};

std::optional<Fence> fence_of(std::string_view line) {
    const std::string_view t = trim(line);
    if (t.size() < 3 || (t[0] != '`' && t[0] != '~')) return std::nullopt;
    size_t n = 0;
    while (n < t.size() && t[n] == t[0]) ++n;
    if (n < 3) return std::nullopt;
    return Fence{t[0], n};
}

bool closes(std::string_view line, const Fence& open) {
    const std::string_view t = trim(line);
    size_t n = 0;
    while (n < t.size() && t[n] == open.ch) ++n;
    return n >= open.len && n == t.size();
}

bool looks_like_dafny(std::string_view line) {
    static constexpr std::array<std::string_view, 30> kStarts = {
        "lemma",   "method", "function", "predicate", "ghost",   "requires", "ensures", "decreases",
        "invariant", "calc", "var",      "assert",    "if",      "while",    "case",    "reads",
        "modifies", "returns", "datatype", "type",    "forall",  "exists",   "match",   "return",
        "}",       "{",      "//",       "/*",        "==",      "const",
    };
    const std::string_view t = trim(line);
    if (t.empty()) return false;
    for (std::string_view s : kStarts) {
        if (t.substr(0, s.size()) == s && (t.size() == s.size() || !is_ident_char(t[s.size()]) || !is_ident_char(s.back()))) {
            return true;
        }
    }
    const char last = t.back();
    if (last == ';' || last == '{' || last == '}') return true;
    return line.front() == ' ' || line.front() == '\t';
}

bool mentions_key_word(std::string_view text) {
    for (std::string_view w : {"lemma", "method", "ensures", "requires", "calc"}) {
        if (contains_word(text, w)) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string_view> extract_code_blocks(std::string_view text) {
    std::vector<std::string_view> out;

    // Line boundaries.
    std::vector<std::pair<size_t, size_t>> lines;  // [start, end) without '\n'
    for (size_t start = 0; start < text.size();) {
        const size_t nl = text.find('\n', start);
        const size_t end = nl == std::string_view::npos ? text.size() : nl;
        lines.emplace_back(start, end);
        start = end + 1;
    }
    auto line_at = [&](size_t i) { return text.substr(lines[i].first, lines[i].second - lines[i].first); };

    bool any_fence = false;
    for (size_t i = 0; i < lines.size(); ++i) {
        const auto open = fence_of(line_at(i));
        if (!open) continue;
        any_fence = true;
        size_t j = i + 1;
        while (j < lines.size() && !closes(line_at(j), *open)) ++j;
        if (j > i + 1) {
            const size_t body_start = lines[i + 1].first;
            const size_t body_end = lines[j - 1].second;
            out.push_back(text.substr(body_start, body_end - body_start));
        }
        i = j;
    }
    if (any_fence) return out;

    // Unfenced: maximal runs of Dafny-looking lines; blank lines may sit
    // inside a run but not at its ends.
    size_t best_start = 0;
    size_t best_end = 0;
    size_t best_lines = 0;
    size_t i = 0;
    while (i < lines.size()) {
        if (!looks_like_dafny(line_at(i))) {
            ++i;
            continue;
        }
        size_t last = i;
        size_t j = i + 1;
        while (j < lines.size()) {
            if (looks_like_dafny(line_at(j))) {
                last = j;
                ++j;
            } else if (is_blank(line_at(j))) {
                ++j;
            } else {
                break;
            }
        }
        const std::string_view run = text.substr(lines[i].first, lines[last].second - lines[i].first);
        const size_t count = last - i + 1;
        if (mentions_key_word(run) && count > best_lines) {
            best_start = lines[i].first;
            best_end = lines[last].second;
            best_lines = count;
        }
        i = last + 1;
    }
    if (best_lines > 0) out.push_back(text.substr(best_start, best_end - best_start));
    return out;
}

}  // namespace dafny_pilot
