#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/config.hpp"
#include "dafny_pilot/prompt.hpp"
#include "dafny_pilot/repair_loop.hpp"

namespace dafny_pilot {

struct CorpusCase {
    std::string id;
    std::filesystem::path source;
    TaskKind task = TaskKind::LemmaInference;
    std::optional<std::pair<int, int>> target;  // (line, col)
    std::filesystem::path cassette_dir;
    std::filesystem::path fixture_dir;
    OutcomeKind expected = OutcomeKind::Success;
    std::vector<std::string> tags;
    /// Per-case overrides of the loop configuration.
    std::optional<bool> allow_axioms;
    std::optional<int> max_rounds;
};

/// Manifest: {"cases": [{id, source, task, target?, cassettes?, fixtures?,
/// expected, tags?, options?: {allow_axioms, max_rounds}}]}. Relative paths
/// are resolved against the manifest's directory; cassettes and fixtures
/// default to cases/<id>/cassettes and cases/<id>/fixtures.
/// Throws ParseError, DuplicateId, MissingFile.
std::vector<CorpusCase> load_manifest(const std::filesystem::path& path);

struct CaseReport {
    std::string id;
    OutcomeKind expected = OutcomeKind::Success;
    OutcomeKind outcome = OutcomeKind::Failure;
    std::string reason;
    int rounds_used = 0;
    size_t axioms_inserted = 0;
    size_t llm_calls = 0;
    size_t verifier_calls = 0;
    double duration_s = 0.0;
};

struct BenchReport {
    std::vector<CaseReport> cases;
    std::string verifier_version;
    std::string model_id;
    std::string engine_version;

    size_t successes() const;
    size_t matching_expected() const;
    /// nullopt when there are no cases.
    std::optional<double> success_rate() const;
    std::optional<double> expected_success_rate() const;
    std::optional<double> mean_rounds() const;
};

struct BenchOptions {
    EngineSettings settings;
    /// Replay verifier and model from each case's fixture/cassette dirs.
    bool replay = true;
    /// 0 selects min(hardware threads, 4).
    unsigned parallelism = 0;
};

/// Runs every case; a case that throws becomes Failure with the error text
/// as its reason. Report order follows `cases`.
BenchReport run_bench(const std::vector<CorpusCase>& cases, const BenchOptions& opts);

nlohmann::json to_json(const BenchReport& r);
std::string to_markdown(const BenchReport& r);
/// Writes report.json and report.md into `dir`.
void write_report(const BenchReport& r, const std::filesystem::path& dir);

}  // namespace dafny_pilot
