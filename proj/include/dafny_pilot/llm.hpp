#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/prompt.hpp"

namespace dafny_pilot {

enum class ProviderMode { Live, Record, Replay };

std::string_view to_string(ProviderMode m);

struct ProviderConfig {
    std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
    std::string model_id = "gpt-4-1106-preview";
    double temperature = 0.0;
    int max_output_tokens = 4096;
    std::string api_key_env = "OPENAI_API_KEY";
    ProviderMode mode = ProviderMode::Live;
    std::filesystem::path cassette_dir;
    /// Replay mode: the snapshot of an unmatched request is written here as
    /// <key>.request.json so a response can be recorded for it.
    std::filesystem::path capture_dir;
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000};
    double request_timeout_s = 300.0;

    void validate() const;
};

enum class FinishReason { Stop, Length, Other };

std::string_view to_string(FinishReason f);
FinishReason finish_reason_from_string(std::string_view s);

struct Usage {
    int prompt_tokens = 0;
    int output_tokens = 0;
};

struct Provenance {
    std::string source_id;  // "<cassette key>#<index>" or the provider's request id
    int round = 1;
};

struct CompletionResponse {
    std::string text;
    FinishReason finish_reason = FinishReason::Stop;
    std::optional<Usage> usage;
    Provenance provenance;
};

nlohmann::json to_json(const CompletionResponse& r);
CompletionResponse completion_from_json(const nlohmann::json& j);

/// Digest of the canonical JSON {model, temperature, messages}; independent
/// of how the messages were serialized before.
std::string cassette_key(std::string_view model_id, double temperature, const std::vector<Message>& messages);

/// Chat-completions request body.
nlohmann::json request_body(const ProviderConfig& cfg, const std::vector<Message>& messages);

struct Cassette {
    std::string key;
    nlohmann::json request_snapshot;  // {model, temperature, messages}
    std::vector<CompletionResponse> responses;

    static Cassette load(const std::filesystem::path& file);
    void save(const std::filesystem::path& file, std::string_view api_key_env) const;
    /// Recomputes the key from request_snapshot.
    std::string recompute_key() const;
};

std::filesystem::path cassette_path(const std::filesystem::path& dir, std::string_view key);

/// Appends one response to the cassette for (cfg, messages), creating it if
/// needed. Appends to one directory are serialized.
void append_to_cassette(const std::filesystem::path& dir, const ProviderConfig& cfg,
                        const std::vector<Message>& messages, const CompletionResponse& response);

struct HttpReply {
    int status = 0;
    std::string body;
    bool network_error = false;
    std::string error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpReply post_json(const std::string& url, const std::string& body,
                                const std::vector<std::pair<std::string, std::string>>& headers,
                                double timeout_s) = 0;
};

/// cpp-httplib backed transport (http and https).
std::shared_ptr<HttpTransport> make_http_transport();

class LlmClient {
public:
    /// The transport is only created/used in live and record modes.
    explicit LlmClient(ProviderConfig cfg, std::shared_ptr<HttpTransport> transport = nullptr);

    /// Throws AuthMissing, NetworkError, ReplayMiss, ProviderError.
    CompletionResponse complete(const RenderedPrompt& prompt);

    const ProviderConfig& config() const { return cfg_; }
    size_t calls() const;
    size_t network_requests() const;

private:
    CompletionResponse live(const RenderedPrompt& prompt);
    CompletionResponse replay(const RenderedPrompt& prompt);

    ProviderConfig cfg_;
    std::shared_ptr<HttpTransport> transport_;
    mutable std::mutex mu_;
    std::map<std::string, size_t> cursor_;
    std::map<std::string, Cassette> loaded_;
    size_t calls_ = 0;
    size_t network_requests_ = 0;
};

/// Bodies of fenced code blocks in order. Without fences, the longest run of
/// Dafny-looking lines that mentions lemma/method/ensures/requires/calc.
/// Every snippet is a contiguous substring of the input.
std::vector<std::string_view> extract_code_blocks(std::string_view response_text);

}  // namespace dafny_pilot
