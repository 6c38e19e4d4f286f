#pragma once

#include <string>
#include <vector>

#include "dafny_pilot/diagnostic.hpp"
#include "dafny_pilot/source.hpp"

namespace dafny_pilot {

struct HeuristicResult {
    SourceText text;
    bool changed = false;
};

inline constexpr const char* kCommentFailingHints = "comment_failing_hints";
inline constexpr const char* kRewriteWitnessBindings = "rewrite_witness_bindings";
inline constexpr const char* kAxiomatize = "axiomatize";

/// Wraps calc hint groups `{ ... }` that error diagnostics point at in a
/// block comment. An error on a hint's own line (or on the step right after
/// it) selects that hint; an error elsewhere in a calc block selects every
/// hint of the block. Step operators stay in place.
HeuristicResult comment_failing_hints(const SourceText& text, const std::vector<Diagnostic>& diags);

/// Inside `lemma`'s body, rewrites `var v[: T] := e;` to `var v :| E;` for
/// each precondition `requires exists v :: E` binding exactly one variable.
HeuristicResult rewrite_witness_bindings(const SourceText& text, const DeclarationInfo& lemma);

/// rewrite_witness_bindings over every lemma of the file.
HeuristicResult rewrite_witness_bindings_everywhere(const SourceText& text);

}  // namespace dafny_pilot
