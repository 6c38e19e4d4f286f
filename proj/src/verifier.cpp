#include "dafny_pilot/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <regex>
#include <set>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/process.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

namespace detail {
extern const std::string_view kBuiltinClassificationRules;
}

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Classification

const ClassificationTable& ClassificationTable::builtin() {
    static const ClassificationTable table = parse(detail::kBuiltinClassificationRules);
    return table;
}

ClassificationTable ClassificationTable::parse(std::string_view tsv) {
    ClassificationTable table;
    int lineno = 0;
    for (std::string_view line : split_lines(tsv)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const size_t tab = t.find('\t');
        if (tab == std::string_view::npos) {
            throw Error(ErrorCode::ParseError,
                        "classification rule line " + std::to_string(lineno) + " has no tab");
        }
        const auto cat = category_from_string(trim(t.substr(0, tab)));
        if (!cat) {
            throw Error(ErrorCode::ParseError, "unknown category on rule line " + std::to_string(lineno));
        }
        table.rules_.push_back(Rule{*cat, to_lower(trim(t.substr(tab + 1)))});
    }
    return table;
}

ClassificationTable ClassificationTable::load(const fs::path& path) { return parse(read_file(path)); }

DiagnosticCategory ClassificationTable::classify(std::string_view message) const {
    const std::string lower = to_lower(message);
    const Rule* best = nullptr;
    for (const Rule& r : rules_) {
        if (r.needle.empty() || lower.find(r.needle) == std::string::npos) continue;
        if (best == nullptr || r.needle.size() > best->needle.size()) best = &r;
    }
    return best ? best->category : DiagnosticCategory::Other;
}

DiagnosticCategory classify_diagnostic(std::string_view message) {
    return ClassificationTable::builtin().classify(message);
}

// ---------------------------------------------------------------------------
// Results

std::string_view to_string(VerificationStatus s) {
    switch (s) {
        case VerificationStatus::Verified: return "Verified";
        case VerificationStatus::Failed: return "Failed";
        case VerificationStatus::Timeout: return "Timeout";
        case VerificationStatus::CrashedOrUnparsable: return "CrashedOrUnparsable";
    }
    return "CrashedOrUnparsable";
}

std::optional<VerificationStatus> status_from_string(std::string_view s) {
    for (auto st : {VerificationStatus::Verified, VerificationStatus::Failed, VerificationStatus::Timeout,
                    VerificationStatus::CrashedOrUnparsable}) {
        if (to_string(st) == s) return st;
    }
    return std::nullopt;
}

size_t VerificationResult::error_count() const {
    return static_cast<size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                             [](const Diagnostic& d) { return d.is_error(); }));
}

json to_json(const VerificationResult& r) {
    json diags = json::array();
    for (const Diagnostic& d : r.diagnostics) diags.push_back(to_json(d));
    return json{{"status", to_string(r.status)},
                {"diagnostics", diags},
                {"duration_s", r.duration_s},
                {"raw_output", r.raw_output},
                {"verifier_version", r.verifier_version}};
}

VerificationResult verification_result_from_json(const json& j) {
    VerificationResult r;
    const auto st = status_from_string(j.at("status").get<std::string>());
    if (!st) throw Error(ErrorCode::ParseError, "unknown status " + j.at("status").dump());
    r.status = *st;
    for (const auto& d : j.at("diagnostics")) r.diagnostics.push_back(diagnostic_from_json(d));
    r.duration_s = j.value("duration_s", 0.0);
    r.raw_output = j.value("raw_output", "");
    r.verifier_version = j.value("verifier_version", "");
    return r;
}

// ---------------------------------------------------------------------------
// Output parsing

namespace {

enum class Summary { None, Verification, NoAttempt, ParseErrors, ResolutionErrors };

Span point(int line, int col) {
    Span s;
    s.start_line = s.end_line = std::max(line, 1);
    s.start_col = s.end_col = std::max(col, 1);
    return s;
}

// --json-diagnostics emits LSP-style objects with 0-based positions.
std::optional<Diagnostic> parse_json_line(std::string_view line, const ClassificationTable& rules) {
    const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !j.contains("message") || !j.contains("location")) {
        return std::nullopt;
    }
    auto pos = [](const json& loc) {
        const json& start = loc.at("range").at("start");
        return point(start.value("line", 0) + 1, start.value("character", 0) + 1);
    };
    Diagnostic d;
    const json& sev = j.contains("severity") ? j.at("severity") : json(1);
    if (sev.is_number()) {
        const int v = sev.get<int>();
        if (v != 1 && v != 2) return std::nullopt;
        d.severity = v == 1 ? Severity::Error : Severity::Warning;
    } else {
        const std::string s = to_lower(sev.get<std::string>());
        if (s != "error" && s != "warning") return std::nullopt;
        d.severity = s == "error" ? Severity::Error : Severity::Warning;
    }
    try {
        d.span = pos(j.at("location"));
        d.message = j.at("message").get<std::string>();
        d.category = rules.classify(d.message);
        if (j.contains("relatedInformation")) {
            for (const json& r : j.at("relatedInformation")) {
                d.related.push_back(
                    RelatedInfo{pos(r.at("location")), r.at("message").get<std::string>(), RelatedKind::Location});
            }
        }
    } catch (const json::exception&) {
        return std::nullopt;
    }
    return d;
}

}  // namespace

ParsedOutput parse_diagnostics(std::string_view raw, const ClassificationTable& rules) {
    static const std::regex kDiag(R"(^(.+?)\((\d+),(\d+)\): (Error|Warning)(?: [A-Za-z]+[0-9]+)?: (.*)$)");
    static const std::regex kRelatedLoc(R"(^(.+?)\((\d+),(\d+)\): Related location(?:[^:]*)?: (.*)$)");
    static const std::regex kRelatedMsg(R"(^\s*Related message: (.*)$)");
    static const std::regex kFinished(
        R"(Dafny program verifier finished with (\d+) verified, (\d+) errors?(.*)$)");
    static const std::regex kTimeouts(R"((\d+) time outs?)");
    static const std::regex kNoAttempt(R"(Dafny program verifier did not attempt verification)");
    static const std::regex kParseErrors(R"(^(\d+) parse errors? detected in )");
    static const std::regex kResolutionErrors(R"(^(\d+) resolution/type errors? detected in )");

    ParsedOutput out;
    Summary summary = Summary::None;
    long reported_errors = 0;
    long timeouts = 0;
    try {
        for (std::string_view line_view : split_lines(raw)) {
            std::string line(trim_right(line_view));
            std::smatch m;
            if (!line.empty() && line.front() == '{') {
                if (auto d = parse_json_line(line, rules)) {
                    out.diagnostics.push_back(std::move(*d));
                    continue;
                }
            }
            if (std::regex_match(line, m, kRelatedLoc)) {
                if (!out.diagnostics.empty()) {
                    out.diagnostics.back().related.push_back(RelatedInfo{
                        point(std::stoi(m[2]), std::stoi(m[3])), m[4].str(), RelatedKind::Location});
                }
            } else if (std::regex_match(line, m, kDiag)) {
                Diagnostic d;
                d.severity = m[4] == "Error" ? Severity::Error : Severity::Warning;
                d.span = point(std::stoi(m[2]), std::stoi(m[3]));
                d.message = m[5].str();
                d.category = rules.classify(d.message);
                out.diagnostics.push_back(std::move(d));
            } else if (std::regex_match(line, m, kRelatedMsg)) {
                if (!out.diagnostics.empty()) {
                    Diagnostic& last = out.diagnostics.back();
                    last.related.push_back(RelatedInfo{last.span, m[1].str(), RelatedKind::Message});
                }
            } else if (std::regex_search(line, m, kFinished)) {
                summary = Summary::Verification;
                reported_errors = std::stol(m[2]);
                const std::string tail = m[3].str();
                std::smatch t;
                if (std::regex_search(tail, t, kTimeouts)) timeouts = std::stol(t[1]);
            } else if (std::regex_search(line, m, kNoAttempt)) {
                if (summary == Summary::None) summary = Summary::NoAttempt;
            } else if (std::regex_search(line, m, kParseErrors)) {
                summary = Summary::ParseErrors;
                reported_errors = std::stol(m[1]);
            } else if (std::regex_search(line, m, kResolutionErrors)) {
                summary = Summary::ResolutionErrors;
                reported_errors = std::stol(m[1]);
            }
            // Anything else (snippets, banners, blank lines) stays in raw_output only.
        }
    } catch (const std::exception&) {
        out.diagnostics.clear();
        out.status = VerificationStatus::CrashedOrUnparsable;
        return out;
    }

    const size_t errors = static_cast<size_t>(std::count_if(
        out.diagnostics.begin(), out.diagnostics.end(), [](const Diagnostic& d) { return d.is_error(); }));
    switch (summary) {
        case Summary::None:
            out.status = VerificationStatus::CrashedOrUnparsable;
            break;
        case Summary::ParseErrors:
        case Summary::ResolutionErrors:
            for (Diagnostic& d : out.diagnostics) {
                if (d.is_error()) d.category = DiagnosticCategory::SyntaxOrResolution;
            }
            out.status = errors > 0 ? VerificationStatus::Failed : VerificationStatus::CrashedOrUnparsable;
            break;
        case Summary::NoAttempt:
            out.status = errors > 0 ? VerificationStatus::Failed : VerificationStatus::Verified;
            break;
        case Summary::Verification:
            if (errors > 0 && timeouts > 0 &&
                std::all_of(out.diagnostics.begin(), out.diagnostics.end(), [](const Diagnostic& d) {
                    return !d.is_error() || d.message.find("timed out") != std::string::npos;
                })) {
                out.status = VerificationStatus::Timeout;
            } else if (errors > 0) {
                out.status = VerificationStatus::Failed;
            } else if (reported_errors > 0) {
                out.status = VerificationStatus::CrashedOrUnparsable;
            } else if (timeouts > 0) {
                out.status = VerificationStatus::Timeout;
            } else {
                out.status = VerificationStatus::Verified;
            }
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixtures

void VerifierConfig::validate() const {
    if (!(timeout_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "timeout_s must be > 0");
    if (mode == VerifierMode::Replay) {
        if (fixture_dir.empty() || !fs::is_directory(fixture_dir)) {
            throw Error(ErrorCode::MissingFile,
                        "replay fixture directory does not exist: " + fixture_dir.string());
        }
    }
}

fs::path fixture_path(const fs::path& dir, std::string_view hash, bool resolve_only) {
    return dir / (std::string(hash) + (resolve_only ? ".resolve.json" : ".json"));
}

void write_fixture(const fs::path& dir, std::string_view content_hash, const VerificationResult& result,
                   bool resolve_only) {
    fs::create_directories(dir);
    json j = to_json(result);
    j["content_hash"] = content_hash;
    write_file_atomic(fixture_path(dir, content_hash, resolve_only), j.dump(2) + "\n");
}

VerificationResult result_from_output(const SourceText& text, std::string_view raw, std::string version,
                                      double duration_s, const ClassificationTable& rules) {
    ParsedOutput parsed = parse_diagnostics(raw, rules);
    VerificationResult r;
    r.status = parsed.status;
    for (const Diagnostic& d : parsed.diagnostics) r.diagnostics.push_back(bind_to(d, text));
    r.duration_s = duration_s;
    r.raw_output = std::string(raw);
    r.verifier_version = std::move(version);
    return r;
}

// ---------------------------------------------------------------------------
// Verifier

Verifier::Verifier(VerifierConfig cfg, std::shared_ptr<const ClassificationTable> rules)
    : cfg_(std::move(cfg)), rules_(std::move(rules)) {
    cfg_.validate();
    if (!rules_) {
        rules_ = std::shared_ptr<const ClassificationTable>(&ClassificationTable::builtin(),
                                                             [](const ClassificationTable*) {});
    }
}

VerificationResult Verifier::verify(const SourceText& text) {
    ++verify_calls_;
    return run(text, false);
}

VerificationResult Verifier::resolve(const SourceText& text) {
    ++resolve_calls_;
    return run(text, true);
}

VerificationResult Verifier::run(const SourceText& text, bool resolve_only) {
    return cfg_.mode == VerifierMode::Replay ? replay(text, resolve_only) : subprocess(text, resolve_only);
}

VerificationResult Verifier::replay(const SourceText& text, bool resolve_only) {
    const std::string& hash = text.content_hash();
    auto load = [&](const fs::path& p) {
        const json j = json::parse(read_file(p));
        if (j.value("content_hash", hash) != hash) {
            throw Error(ErrorCode::ParseError, "fixture " + p.string() + " names a different content_hash");
        }
        return verification_result_from_json(j);
    };
    if (resolve_only) {
        const fs::path rp = fixture_path(cfg_.fixture_dir, hash, true);
        if (fs::exists(rp)) return load(rp);
    }
    const fs::path p = fixture_path(cfg_.fixture_dir, hash, false);
    if (!fs::exists(p)) {
        if (!cfg_.capture_dir.empty()) {
            fs::create_directories(cfg_.capture_dir);
            write_file_atomic(cfg_.capture_dir / (hash + ".dfy"), text.content());
        }
        throw Error(ErrorCode::ReplayMiss, hash);
    }
    VerificationResult full = load(p);
    if (!resolve_only) return full;

    // A full run stops at parse/resolution errors, so its SyntaxOrResolution
    // subset is what a resolve-only run reports.
    VerificationResult r;
    r.verifier_version = full.verifier_version;
    r.duration_s = 0.0;
    for (const Diagnostic& d : full.diagnostics) {
        if (d.is_error() && d.category == DiagnosticCategory::SyntaxOrResolution) r.diagnostics.push_back(d);
    }
    r.status = r.diagnostics.empty() ? VerificationStatus::Verified : VerificationStatus::Failed;
    r.raw_output = r.diagnostics.empty() ? "Dafny program verifier did not attempt verification\n"
                                         : full.raw_output;
    return r;
}

VerificationResult Verifier::subprocess(const SourceText& text, bool resolve_only) {
    if (find_executable(cfg_.executable.string()).empty()) {
        throw Error(ErrorCode::VerifierNotFound, cfg_.executable.string());
    }
    const std::string version_text = version();
    TempDir dir("dafny-pilot-verify");
    std::string name = fs::path(text.path()).filename().string();
    if (name.empty() || fs::path(name).extension() != ".dfy") name = "source.dfy";
    const fs::path file = dir.path() / name;
    write_file_atomic(file, text.content());

    std::vector<std::string> argv{cfg_.executable.string(), resolve_only ? "resolve" : "verify"};
    if (cfg_.json_diagnostics) argv.push_back("--json-diagnostics");
    argv.insert(argv.end(), cfg_.extra_args.begin(), cfg_.extra_args.end());
    argv.push_back(file.filename().string());

    const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg_.timeout_s * 1000.0));
    const ProcessResult pr = run_process(argv, timeout, dir.path());
    VerificationResult r;
    if (pr.timed_out) {
        r.status = VerificationStatus::Timeout;
        r.raw_output = pr.output;
        r.duration_s = pr.duration_s;
        r.verifier_version = version_text;
    } else {
        r = result_from_output(text, pr.output, version_text, pr.duration_s, *rules_);
    }
    if (!cfg_.record_dir.empty()) write_fixture(cfg_.record_dir, text.content_hash(), r, resolve_only);
    return r;
}

std::string Verifier::version() {
    std::lock_guard lock(version_mu_);
    if (version_) return *version_;
    std::string v = "unknown";
    if (cfg_.mode == VerifierMode::Subprocess) {
        if (find_executable(cfg_.executable.string()).empty()) {
            throw Error(ErrorCode::VerifierNotFound, cfg_.executable.string());
        }
        const ProcessResult pr =
            run_process({cfg_.executable.string(), "--version"}, std::chrono::seconds(30));
        for (std::string_view line : split_lines(pr.output)) {
            if (!is_blank(line)) {
                v = std::string(trim(line));
                break;
            }
        }
    } else {
        std::set<fs::path> files;
        for (const auto& e : fs::directory_iterator(cfg_.fixture_dir)) {
            if (e.path().extension() == ".json") files.insert(e.path());
        }
        for (const fs::path& p : files) {
            const json j = json::parse(read_file(p), nullptr, false);
            if (!j.is_discarded() && j.contains("verifier_version")) {
                v = j.at("verifier_version").get<std::string>();
                break;
            }
        }
    }
    version_ = v;
    return v;
}

bool Verifier::version_matches_expected() {
    if (!cfg_.expected_version) return true;
    const std::string v = version();
    return v.rfind(*cfg_.expected_version, 0) == 0;
}

}  // namespace dafny_pilot
