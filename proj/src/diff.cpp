#include "dafny_pilot/diff.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>

namespace dafny_pilot {

std::vector<std::string_view> split_keep_newlines(std::string_view text) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (start < text.size()) {
        const size_t nl = text.find('\n', start);
        const size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
        out.push_back(text.substr(start, end - start));
        start = end;
    }
    return out;
}

std::vector<LineHunk> diff_lines(const std::vector<std::string_view>& a,
                                 const std::vector<std::string_view>& b) {
    size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) ++prefix;
    size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
        ++suffix;
    }
    const size_t n = a.size() - prefix - suffix;
    const size_t m = b.size() - prefix - suffix;

    // lcs[i][j] = LCS length of a[prefix+i..] and b[prefix+j..].
    std::vector<uint32_t> lcs((n + 1) * (m + 1), 0);
    auto at = [&](size_t i, size_t j) -> uint32_t& { return lcs[i * (m + 1) + j]; };
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            at(i, j) = a[prefix + i] == b[prefix + j] ? at(i + 1, j + 1) + 1
                                                      : std::max(at(i + 1, j), at(i, j + 1));
        }
    }

    std::vector<LineHunk> hunks;
    LineHunk cur;
    bool open = false;
    auto flush = [&] {
        if (open && (cur.old_count > 0 || cur.new_count > 0)) hunks.push_back(cur);
        open = false;
    };
    size_t i = 0;
    size_t j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[prefix + i] == b[prefix + j]) {
            flush();
            ++i;
            ++j;
            continue;
        }
        if (!open) {
            cur = LineHunk{prefix + i, 0, prefix + j, 0};
            open = true;
        }
        if (j < m && (i == n || at(i, j + 1) >= at(i + 1, j))) {
            ++cur.new_count;
            ++j;
        } else {
            ++cur.old_count;
            ++i;
        }
    }
    flush();
    return hunks;
}

Patch line_diff_patch(const SourceText& base, std::string_view new_content) {
    const auto a = split_keep_newlines(base.content());
    const auto b = split_keep_newlines(new_content);
    std::vector<size_t> a_off(a.size() + 1, 0);
    for (size_t i = 0; i < a.size(); ++i) a_off[i + 1] = a_off[i] + a[i].size();

    std::vector<Edit> edits;
    for (const LineHunk& h : diff_lines(a, b)) {
        std::string replacement;
        for (size_t k = 0; k < h.new_count; ++k) replacement.append(b[h.new_start + k]);
        edits.push_back(make_edit(base, a_off[h.old_start], a_off[h.old_start + h.old_count],
                                  std::move(replacement)));
    }
    return make_patch(base, std::move(edits));
}

namespace {

std::string range(size_t start, size_t count) {
    // GNU convention: an empty range names the line before it.
    const size_t first = count == 0 ? start : start + 1;
    if (count == 1) return std::to_string(first);
    return std::to_string(first) + "," + std::to_string(count);
}

void emit_line(std::ostringstream& out, char tag, std::string_view line) {
    out << tag;
    if (!line.empty() && line.back() == '\n') {
        out << line;
    } else {
        out << line << "\n\\ No newline at end of file\n";
    }
}

}  // namespace

std::string unified_diff(std::string_view old_content, std::string_view new_content,
                         std::string_view old_label, std::string_view new_label, int context) {
    const auto a = split_keep_newlines(old_content);
    const auto b = split_keep_newlines(new_content);
    const auto hunks = diff_lines(a, b);
    if (hunks.empty()) return {};
    const size_t ctx = static_cast<size_t>(std::max(context, 0));

    std::ostringstream out;
    out << "--- " << old_label << "\n+++ " << new_label << "\n";
    size_t h = 0;
    while (h < hunks.size()) {
        // Group hunks whose context windows touch.
        size_t last = h;
        while (last + 1 < hunks.size() &&
               hunks[last + 1].old_start - (hunks[last].old_start + hunks[last].old_count) <= 2 * ctx) {
            ++last;
        }
        const size_t old_begin = hunks[h].old_start - std::min(ctx, hunks[h].old_start);
        const size_t new_begin = hunks[h].new_start - (hunks[h].old_start - old_begin);
        const size_t old_stop =
            std::min(a.size(), hunks[last].old_start + hunks[last].old_count + ctx);
        const size_t new_stop = hunks[last].new_start + hunks[last].new_count +
                                (old_stop - (hunks[last].old_start + hunks[last].old_count));

        out << "@@ -" << range(old_begin, old_stop - old_begin) << " +"
            << range(new_begin, new_stop - new_begin) << " @@\n";
        size_t ai = old_begin;
        for (size_t k = h; k <= last; ++k) {
            const LineHunk& hk = hunks[k];
            for (; ai < hk.old_start; ++ai) emit_line(out, ' ', a[ai]);
            for (size_t d = 0; d < hk.old_count; ++d) emit_line(out, '-', a[hk.old_start + d]);
            for (size_t d = 0; d < hk.new_count; ++d) emit_line(out, '+', b[hk.new_start + d]);
            ai = hk.old_start + hk.old_count;
        }
        for (; ai < old_stop; ++ai) emit_line(out, ' ', a[ai]);
        h = last + 1;
    }
    return out.str();
}

}  // namespace dafny_pilot
