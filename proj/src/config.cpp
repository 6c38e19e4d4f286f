#include "dafny_pilot/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

KeyValues parse_config_text(std::string_view text) {
    KeyValues kv;
    int lineno = 0;
    for (std::string_view raw : split_lines(text)) {
        ++lineno;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == '[') continue;
        const size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key(trim(line.substr(0, eq)));
        std::string_view value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"') {
            const size_t close = value.find('"', 1);
            if (close == std::string_view::npos) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": unterminated string");
            }
            value = value.substr(1, close - 1);
        } else if (const size_t hash = value.find(" #"); hash != std::string_view::npos) {
            value = trim(value.substr(0, hash));
        }
        if (key.empty()) throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": empty key");
        std::replace(key.begin(), key.end(), '-', '_');
        kv[key] = std::string(value);
    }
    return kv;
}

KeyValues load_config_file(const std::filesystem::path& path) { return parse_config_text(read_file(path)); }

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "dafny",        "dafny_args",     "timeout",         "verifier",     "expected_version",
        "json_diagnostics", "record_fixtures", "llm",        "model",        "endpoint",
        "api_key_env",  "temperature",    "max_output_tokens", "max_rounds", "candidates",
        "allow_axioms", "hint_commenting", "witness_rewrite", "budget",      "rewrite_threshold",
        "capture_misses",
    };
    return keys;
}

KeyValues config_from_environment() {
    KeyValues kv;
    for (const std::string& key : known_config_keys()) {
        std::string name = "DAFNY_PILOT_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') kv[key] = v;
    }
    return kv;
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
    const std::string l = to_lower(v);
    if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
    if (l == "false" || l == "0" || l == "no" || l == "off") return false;
    throw Error(ErrorCode::InvalidArgument, key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, key + ": expected a number, got '" + v + "'");
}

long parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const long n = std::stol(v, &used);
        if (used == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, key + ": expected an integer, got '" + v + "'");
}

/// "mode" or "mode:DIR".
std::pair<std::string, std::string> split_mode(const std::string& v) {
    const size_t colon = v.find(':');
    if (colon == std::string::npos) return {v, ""};
    return {v.substr(0, colon), v.substr(colon + 1)};
}

}  // namespace

void apply_settings(EngineSettings& s, const KeyValues& kv) {
    for (const auto& [key, v] : kv) {
        if (key == "dafny") {
            s.verifier.executable = v;
        } else if (key == "dafny_args") {
            s.verifier.extra_args.clear();
            std::istringstream in(v);
            for (std::string a; in >> a;) s.verifier.extra_args.push_back(a);
        } else if (key == "timeout") {
            s.verifier.timeout_s = parse_double(key, v);
            s.loop.verify_timeout_s = s.verifier.timeout_s;
        } else if (key == "verifier") {
            const auto [mode, dir] = split_mode(v);
            if (mode == "subprocess" && dir.empty()) {
                s.verifier.mode = VerifierMode::Subprocess;
            } else if (mode == "replay" && !dir.empty()) {
                s.verifier.mode = VerifierMode::Replay;
                s.verifier.fixture_dir = dir;
            } else {
                throw Error(ErrorCode::InvalidArgument, "verifier: expected 'subprocess' or 'replay:DIR', got '" + v + "'");
            }
        } else if (key == "expected_version") {
            if (v.empty()) {
                s.verifier.expected_version.reset();
            } else {
                s.verifier.expected_version = v;
            }
        } else if (key == "json_diagnostics") {
            s.verifier.json_diagnostics = parse_bool(key, v);
        } else if (key == "record_fixtures") {
            s.verifier.record_dir = v;
        } else if (key == "capture_misses") {
            s.verifier.capture_dir = v;
            s.provider.capture_dir = v;
        } else if (key == "llm") {
            const auto [mode, dir] = split_mode(v);
            if (mode == "live" && dir.empty()) {
                s.provider.mode = ProviderMode::Live;
            } else if (mode == "record" && !dir.empty()) {
                s.provider.mode = ProviderMode::Record;
                s.provider.cassette_dir = dir;
            } else if (mode == "replay" && !dir.empty()) {
                s.provider.mode = ProviderMode::Replay;
                s.provider.cassette_dir = dir;
            } else {
                throw Error(ErrorCode::InvalidArgument, "llm: expected 'live', 'record:DIR' or 'replay:DIR', got '" + v + "'");
            }
        } else if (key == "model") {
            s.provider.model_id = v;
        } else if (key == "endpoint") {
            s.provider.endpoint_url = v;
        } else if (key == "api_key_env") {
            s.provider.api_key_env = v;
        } else if (key == "temperature") {
            s.provider.temperature = parse_double(key, v);
        } else if (key == "max_output_tokens") {
            s.provider.max_output_tokens = static_cast<int>(parse_int(key, v));
        } else if (key == "max_rounds") {
            s.loop.max_rounds = static_cast<int>(parse_int(key, v));
        } else if (key == "candidates") {
            s.loop.candidates_per_round = static_cast<int>(parse_int(key, v));
        } else if (key == "allow_axioms") {
            s.loop.allow_axioms = parse_bool(key, v);
        } else if (key == "hint_commenting") {
            s.loop.enable_hint_commenting = parse_bool(key, v);
        } else if (key == "witness_rewrite") {
            s.loop.enable_witness_rewrite = parse_bool(key, v);
        } else if (key == "budget") {
            const long b = parse_int(key, v);
            if (b <= 0) throw Error(ErrorCode::InvalidArgument, "budget must be positive");
            s.loop.budget_tokens = static_cast<size_t>(b);
        } else if (key == "rewrite_threshold") {
            s.loop.rewrite_threshold = parse_double(key, v);
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown setting '" + key + "'");
        }
    }
}

EngineSettings resolve_settings(const std::filesystem::path& config_file, const KeyValues& flags) {
    EngineSettings s;
    apply_settings(s, config_from_environment());
    if (!config_file.empty() && std::filesystem::exists(config_file)) apply_settings(s, load_config_file(config_file));
    apply_settings(s, flags);
    s.loop.validate();
    return s;
}

}  // namespace dafny_pilot
