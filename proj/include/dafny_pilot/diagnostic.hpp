#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dafny_pilot/source.hpp"

namespace dafny_pilot {

enum class Severity { Error, Warning };

enum class DiagnosticCategory {
    InvariantNotMaintained,
    InvariantOnEntry,
    PostconditionViolation,
    PreconditionViolation,
    AssertionViolation,
    TerminationFailure,
    SyntaxOrResolution,
    Other,
};

std::string_view to_string(Severity s);
std::string_view to_string(DiagnosticCategory c);
std::optional<DiagnosticCategory> category_from_string(std::string_view s);

enum class RelatedKind {
    Location,  // "Related location: ..." with its own position
    Message,   // "Related message: ..." attached to the primary position
};

struct RelatedInfo {
    Span span;
    std::string message;
    RelatedKind kind = RelatedKind::Location;

    friend bool operator==(const RelatedInfo&, const RelatedInfo&) = default;
};

struct Diagnostic {
    Severity severity = Severity::Error;
    Span span;
    std::string message;
    DiagnosticCategory category = DiagnosticCategory::Other;
    std::vector<RelatedInfo> related;

    bool is_error() const { return severity == Severity::Error; }
    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

/// Text shown to the model for one diagnostic: related messages first, then
/// the main message with its first letter capitalized, joined by ". ", all on
/// one line.
std::string marker_message(const Diagnostic& diag);

/// "line L, column C: <marker_message> [Category]"
std::string describe(const Diagnostic& diag);

/// Re-derives byte offsets of every span from its line/column against `text`.
Diagnostic bind_to(const Diagnostic& diag, const SourceText& text);

/// Errors first ordered by position, warnings dropped.
std::vector<Diagnostic> errors_by_position(const std::vector<Diagnostic>& diags);

nlohmann::json to_json(const Span& span);
Span span_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Diagnostic& diag);
Diagnostic diagnostic_from_json(const nlohmann::json& j);

}  // namespace dafny_pilot
