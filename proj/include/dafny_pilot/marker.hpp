#pragma once

#include <string>
#include <string_view>

#include "dafny_pilot/diagnostic.hpp"
#include "dafny_pilot/source.hpp"

namespace dafny_pilot {

inline constexpr std::string_view kMarkerTag = "VERIFIER_ERROR";

/// "// VERIFIER_ERROR <message> //" with newlines in the message flattened
/// to "; ".
std::string marker_comment(std::string_view message);

bool is_marker_line(std::string_view line);

/// Inserts the marker comment on its own line directly above the line that
/// holds diag.span's start, indented like that line. Throws SpanOutOfRange.
SourceText insert_error_marker(const SourceText& text, const Diagnostic& diag);

/// Removes every line that is a marker comment.
SourceText strip_error_markers(const SourceText& text);
std::string strip_error_markers(std::string_view content);

}  // namespace dafny_pilot
