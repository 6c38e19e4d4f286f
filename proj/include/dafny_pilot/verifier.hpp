#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/diagnostic.hpp"
#include "dafny_pilot/source.hpp"

namespace dafny_pilot {

// ---------------------------------------------------------------------------
// Message classification

/// Ordered (category, substring) rules. The longest substring that occurs in
/// a message (case-insensitively) decides; earlier rules win ties.
class ClassificationTable {
public:
    struct Rule {
        DiagnosticCategory category;
        std::string needle;  // lowercase
    };

    /// The rules shipped in data/classification_rules.tsv, compiled in.
    static const ClassificationTable& builtin();
    /// Lines of "<Category>\t<substring>"; '#' starts a comment line.
    static ClassificationTable parse(std::string_view tsv);
    static ClassificationTable load(const std::filesystem::path& path);

    DiagnosticCategory classify(std::string_view message) const;
    const std::vector<Rule>& rules() const { return rules_; }

private:
    std::vector<Rule> rules_;
};

DiagnosticCategory classify_diagnostic(std::string_view message);

// ---------------------------------------------------------------------------
// Results

enum class VerificationStatus { Verified, Failed, Timeout, CrashedOrUnparsable };

std::string_view to_string(VerificationStatus s);
std::optional<VerificationStatus> status_from_string(std::string_view s);

struct VerificationResult {
    VerificationStatus status = VerificationStatus::CrashedOrUnparsable;
    std::vector<Diagnostic> diagnostics;
    double duration_s = 0.0;
    std::string raw_output;
    std::string verifier_version;

    bool verified() const { return status == VerificationStatus::Verified; }
    size_t error_count() const;
    std::vector<Diagnostic> errors() const { return errors_by_position(diagnostics); }
};

struct ParsedOutput {
    VerificationStatus status = VerificationStatus::CrashedOrUnparsable;
    std::vector<Diagnostic> diagnostics;
};

/// Total: never throws on any input. Positions are 1-based; byte offsets are
/// left at zero until bound to a text.
ParsedOutput parse_diagnostics(std::string_view raw,
                               const ClassificationTable& rules = ClassificationTable::builtin());

nlohmann::json to_json(const VerificationResult& r);
VerificationResult verification_result_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Verifier

enum class VerifierMode { Subprocess, Replay };

struct VerifierConfig {
    std::filesystem::path executable = "dafny";
    std::vector<std::string> extra_args;
    double timeout_s = 60.0;
    VerifierMode mode = VerifierMode::Subprocess;
    std::filesystem::path fixture_dir;  // replay source
    std::optional<std::string> expected_version = std::string("4.3.0");
    /// Ask Dafny for --json-diagnostics instead of plain text.
    bool json_diagnostics = false;
    /// Subprocess mode: write a replay fixture for every run here.
    std::filesystem::path record_dir;
    /// Replay mode: on a miss, drop the unmatched text here as <hash>.dfy.
    std::filesystem::path capture_dir;

    /// Throws InvalidArgument / MissingFile on violated invariants.
    void validate() const;
};

/// Fixture file paths for a text hash.
std::filesystem::path fixture_path(const std::filesystem::path& dir, std::string_view hash,
                                   bool resolve_only);

/// Writes {content_hash, raw_output, status, diagnostics, verifier_version,
/// duration_s} as pretty JSON.
void write_fixture(const std::filesystem::path& dir, std::string_view content_hash,
                   const VerificationResult& result, bool resolve_only);

/// Parses raw verifier output for `text` into a result with bound spans.
VerificationResult result_from_output(const SourceText& text, std::string_view raw,
                                      std::string version, double duration_s,
                                      const ClassificationTable& rules = ClassificationTable::builtin());

class Verifier {
public:
    struct Stats {
        size_t verify_calls = 0;
        size_t resolve_calls = 0;
    };

    explicit Verifier(VerifierConfig cfg,
                      std::shared_ptr<const ClassificationTable> rules = nullptr);

    /// Full verification. Throws VerifierNotFound / ReplayMiss.
    VerificationResult verify(const SourceText& text);
    /// Parse and resolve only, no proof obligations.
    VerificationResult resolve(const SourceText& text);

    /// Version banner of the configured tool, or of the fixtures in replay
    /// mode ("unknown" when no fixture names one).
    std::string version();
    bool version_matches_expected();

    const VerifierConfig& config() const { return cfg_; }
    Stats stats() const { return Stats{verify_calls_.load(), resolve_calls_.load()}; }

private:
    VerificationResult run(const SourceText& text, bool resolve_only);
    VerificationResult replay(const SourceText& text, bool resolve_only);
    VerificationResult subprocess(const SourceText& text, bool resolve_only);

    VerifierConfig cfg_;
    std::shared_ptr<const ClassificationTable> rules_;
    std::atomic<size_t> verify_calls_{0};
    std::atomic<size_t> resolve_calls_{0};
    std::mutex version_mu_;
    std::optional<std::string> version_;
};

}  // namespace dafny_pilot
