#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dafny_pilot/source.hpp"

namespace dafny_pilot {

/// A changed region between two line sequences, 0-based, half-open.
struct LineHunk {
    size_t old_start = 0;
    size_t old_count = 0;
    size_t new_start = 0;
    size_t new_count = 0;
};

/// Splits into lines that keep their '\n'; only the last one may lack it.
std::vector<std::string_view> split_keep_newlines(std::string_view text);

/// Minimal line diff (longest common subsequence). Hunks are maximal runs of
/// non-matching lines, in order.
std::vector<LineHunk> diff_lines(const std::vector<std::string_view>& a,
                                 const std::vector<std::string_view>& b);

/// Patch turning `base` into `new_content`, one edit per hunk. No edit's
/// replacement equals the bytes it replaces.
Patch line_diff_patch(const SourceText& base, std::string_view new_content);

/// Unified diff in the format GNU patch and git apply accept. Empty when the
/// contents are equal.
std::string unified_diff(std::string_view old_content, std::string_view new_content,
                         std::string_view old_label, std::string_view new_label, int context = 3);

}  // namespace dafny_pilot
