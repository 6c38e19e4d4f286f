#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/llm.hpp"
#include "dafny_pilot/prompt.hpp"
#include "dafny_pilot/run_log.hpp"
#include "dafny_pilot/source.hpp"
#include "dafny_pilot/suggestion.hpp"
#include "dafny_pilot/verifier.hpp"

namespace dafny_pilot {

struct LoopConfig {
    int max_rounds = 3;
    int candidates_per_round = 1;
    bool allow_axioms = false;
    bool enable_hint_commenting = true;
    bool enable_witness_rewrite = true;
    double verify_timeout_s = 60.0;
    size_t budget_tokens = 128000;
    double rewrite_threshold = 0.8;

    void validate() const;
    /// Heuristics that may trigger a full verification each.
    int enabled_heuristics() const;
};

struct Attempt {
    int round = 1;
    Candidate candidate;
    std::vector<std::string> heuristics_applied;
    VerificationResult result;
    size_t residual_errors = 0;
    size_t axioms_inserted = 0;
    size_t patch_size_bytes = 0;
    std::vector<std::string> axiomatized;  // lemma names
    SourceText text;                       // text the result belongs to
};

/// Index of the lexicographic minimum of (residual_errors, axioms_inserted,
/// patch_size_bytes, round); the earliest attempt wins ties. Throws
/// InvalidArgument on an empty list.
size_t score_attempts(const std::vector<Attempt>& attempts);

enum class OutcomeKind { Success, Partial, Failure };

std::string_view to_string(OutcomeKind k);

struct LoopStats {
    size_t llm_calls = 0;
    size_t verifier_calls = 0;  // full verifications, including the initial one
    size_t precheck_calls = 0;
    size_t soundness_checks = 0;
    int rounds_used = 0;
};

struct Outcome {
    OutcomeKind kind = OutcomeKind::Failure;
    SourceText original;
    /// Success: the verified text. Partial: the best attempt's text.
    /// Failure: the original text.
    SourceText final_text;
    Patch patch;  // original -> final_text
    std::vector<Attempt> attempts;
    std::optional<size_t> best;  // index into attempts
    std::string reason;
    size_t initial_errors = 0;
    LoopStats stats;

    size_t axioms_inserted() const;
};

nlohmann::json to_json(const Attempt& a);
nlohmann::json to_json(const Outcome& o);

/// Inputs of the text-only tasks.
struct TextTaskInput {
    std::optional<SourceText> source;
    std::optional<Diagnostic> diagnostic;
    std::optional<std::string> nl_spec;
};

class Engine {
public:
    Engine(Verifier& verifier, LlmClient& llm, TemplateSet templates, LoopConfig cfg, RunLog* log = nullptr);

    /// LemmaInference, ProofInference or Repair. Throws BudgetExhausted when
    /// the prompt cannot fit; ReplayMiss and VerifierNotFound propagate.
    Outcome run_task(TaskKind task, const SourceText& text, const std::optional<Diagnostic>& target = std::nullopt);

    /// Explain returns the model's text; Nl2Spec returns the first code
    /// snippet after it passes the syntax precheck (NoCodeFound /
    /// PrecheckFailed otherwise).
    std::string run_text_task(TaskKind task, const TextTaskInput& input);

    /// Applies the candidate to `original`, prechecks, verifies, and runs the
    /// enabled heuristics while the text still fails.
    Attempt evaluate_candidate(const SourceText& original, Candidate candidate, int round);

    /// Verifies `text` again and returns whether it is Verified.
    bool soundness_check(const SourceText& text);

    const LoopConfig& config() const { return cfg_; }
    const LoopStats& stats() const { return stats_; }
    void reset_stats() { stats_ = {}; }

private:
    VerificationResult verify(const SourceText& text, int round, std::string_view why);
    Precheck precheck(const SourceText& text, int round);
    void log(int round, std::string_view action, std::string_view hash,
             nlohmann::json data = nlohmann::json::object());

    Verifier& verifier_;
    LlmClient& llm_;
    TemplateSet templates_;
    LoopConfig cfg_;
    RunLog* log_;
    LoopStats stats_;
};

/// Feedback text for the next round from a failed attempt.
Feedback feedback_from_attempt(const Attempt& a, std::string note = {});

}  // namespace dafny_pilot
