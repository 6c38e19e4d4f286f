#include "dafny_pilot/marker.hpp"

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

std::string marker_comment(std::string_view message) {
    std::string flat;
    for (size_t i = 0; i < message.size(); ++i) {
        if (message[i] == '\r') continue;
        if (message[i] == '\n') {
            flat += "; ";
        } else {
            flat.push_back(message[i]);
        }
    }
    return "// " + std::string(kMarkerTag) + " " + flat + " //";
}

bool is_marker_line(std::string_view line) {
    const std::string_view t = trim(line);
    const std::string prefix = "// " + std::string(kMarkerTag) + " ";
    return t.size() >= prefix.size() + 2 && t.substr(0, prefix.size()) == prefix &&
           t.substr(t.size() - 2) == "//";
}

SourceText insert_error_marker(const SourceText& text, const Diagnostic& diag) {
    const int line = diag.span.start_line;
    if (line < 1 || static_cast<size_t>(line) > text.line_count()) {
        throw Error(ErrorCode::SpanOutOfRange,
                    "diagnostic line " + std::to_string(line) + " outside the text");
    }
    // Validates the column too.
    (void)text.offset_of(line, diag.span.start_col);
    const size_t at = text.line_start(line);
    const std::string indent = leading_whitespace(text.line(line));
    std::string content = text.content();
    content.insert(at, indent + marker_comment(marker_message(diag)) + "\n");
    return text.with_content(std::move(content));
}

std::string strip_error_markers(std::string_view content) {
    std::string out;
    out.reserve(content.size());
    size_t start = 0;
    while (start < content.size()) {
        size_t nl = content.find('\n', start);
        const size_t end = nl == std::string_view::npos ? content.size() : nl + 1;
        const std::string_view line = content.substr(start, (nl == std::string_view::npos ? end : nl) - start);
        if (!is_marker_line(line)) out.append(content.substr(start, end - start));
        start = end;
    }
    return out;
}

SourceText strip_error_markers(const SourceText& text) {
    return text.with_content(strip_error_markers(text.content()));
}

}  // namespace dafny_pilot
