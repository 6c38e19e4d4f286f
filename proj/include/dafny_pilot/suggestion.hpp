#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dafny_pilot/diagnostic.hpp"
#include "dafny_pilot/llm.hpp"
#include "dafny_pilot/source.hpp"
#include "dafny_pilot/verifier.hpp"

namespace dafny_pilot {

enum class CandidateKind { FullFileRewrite, NewLemmaDeclaration, LemmaCallInsertion, ProofBody, GenericPatch };

std::string_view to_string(CandidateKind k);

enum class PrecheckState { Unchecked, Passed, Failed };

std::string_view to_string(PrecheckState s);

struct Precheck {
    PrecheckState state = PrecheckState::Unchecked;
    std::vector<Diagnostic> diagnostics;  // SyntaxOrResolution errors when Failed
};

struct Candidate {
    CandidateKind kind = CandidateKind::GenericPatch;
    Patch patch;
    /// The replacement text of every edit, in order, separated by blank lines.
    std::string display_code;
    Provenance provenance;
    Precheck precheck;
    /// Declaration the candidate is about (lemma name for ProofBody and call
    /// insertions); empty when not applicable.
    std::string target_name;
};

/// Turns one model response into candidates against `session_text`.
///
/// A snippet holding most of the original file (at least `rewrite_threshold`
/// of its non-blank lines, in order) becomes a single FullFileRewrite with a
/// minimal line diff. Otherwise each snippet is split into declarations and
/// call statements and placed:
///   - new declarations: before the first declaration of the file;
///   - declarations whose name exists: body replacement (ProofBody) for
///     lemmas, whole-declaration replacement (GenericPatch) for the rest;
///   - `Lemma(args);` lines: after the matching context line from the
///     snippet, else before the first statement after the target line;
///   - bare calc/assert blocks: body of the lemma that encloses the target
///     or that the prose names.
///
/// Throws NoCodeFound when the response has no code and UnplaceableSnippet
/// when code exists but nothing could be anchored. Returns an empty list when
/// the snippet equals the file.
std::vector<Candidate> candidates_from_response(const SourceText& session_text,
                                                const CompletionResponse& response,
                                                const Diagnostic* target = nullptr,
                                                double rewrite_threshold = 0.8);

/// Whether `snippet` contains at least `threshold` of the original's
/// non-blank lines in order (lines compared after trimming).
bool is_full_file_rewrite(const SourceText& original, std::string_view snippet, double threshold);

/// Combines candidates into one by concatenating their edits. Edits that
/// overlap an earlier candidate's edits are dropped. The result keeps the
/// first candidate's kind when all kinds agree and is GenericPatch otherwise.
Candidate merge_candidates(const SourceText& base, const std::vector<Candidate>& candidates);

/// Resolution-only verifier run; Passed iff no SyntaxOrResolution errors.
Precheck syntax_precheck(Verifier& verifier, const SourceText& text_after_patch);

/// Marks the lemma with {:axiom} and removes its body. Idempotent. Throws
/// NoSuchLemma when no lemma has that name.
SourceText axiomatize(const SourceText& text, std::string_view lemma_name);

}  // namespace dafny_pilot
