#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dafny_pilot {

enum class LineEnding { LF, CRLF };

/// A region of one source file. Line/column pairs are 1-based and follow the
/// verifier's convention; byte offsets are what edits operate on.
struct Span {
    int start_line = 1;
    int start_col = 1;
    int end_line = 1;
    int end_col = 1;
    size_t start_off = 0;
    size_t end_off = 0;

    bool contains(const Span& other) const {
        return start_off <= other.start_off && other.end_off <= end_off;
    }
    bool empty() const { return start_off == end_off; }
    size_t length() const { return end_off - start_off; }

    friend bool operator==(const Span&, const Span&) = default;
};

/// Immutable Dafny program text. Content is kept with '\n' line endings; the
/// original style is remembered and restored by save().
class SourceText {
public:
    SourceText() : SourceText("", "") {}
    SourceText(std::string path, std::string content, LineEnding eol = LineEnding::LF);

    /// Reads a UTF-8 file, detecting the majority line-ending style.
    static SourceText load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    std::string content_with_original_endings() const;

    const std::string& path() const { return path_; }
    const std::string& content() const { return content_; }
    const std::vector<size_t>& line_index() const { return line_index_; }
    const std::string& content_hash() const { return hash_; }
    LineEnding line_ending() const { return eol_; }

    size_t line_count() const { return line_index_.size(); }
    /// Line `n` (1-based) without its terminating newline.
    std::string_view line(int n) const;
    size_t line_start(int n) const;
    /// Offset one past the last character of line `n`, excluding '\n'.
    size_t line_end(int n) const;

    /// Byte offset for a 1-based (line, col). Throws SpanOutOfRange.
    size_t offset_of(int line, int col) const;
    /// 1-based (line, col) of a byte offset in [0, size].
    std::pair<int, int> position_of(size_t offset) const;
    Span span(size_t start_off, size_t end_off) const;
    Span span_at(int line, int col) const;
    Span line_span(int first_line, int last_line) const;
    /// Clamps positions that fall outside the text instead of throwing; for
    /// binding verifier positions that may point one past a line's end.
    Span bind(int start_line, int start_col, int end_line, int end_col) const;

    /// Same path and line-ending style, new content.
    SourceText with_content(std::string content) const;

private:
    std::string path_;
    std::string content_;
    std::vector<size_t> line_index_;
    std::string hash_;
    LineEnding eol_;
};

struct Edit {
    Span span;
    std::string replacement;
};

/// Ordered, non-overlapping edits against the text whose hash is base_hash.
struct Patch {
    std::string base_hash;
    std::vector<Edit> edits;

    bool empty() const { return edits.empty(); }
    /// Bytes removed plus bytes inserted, summed over edits.
    size_t size_bytes() const;
};

Edit make_edit(const SourceText& text, size_t start_off, size_t end_off, std::string replacement);
Edit make_insertion(const SourceText& text, size_t at, std::string inserted);

/// Builds a patch, sorting the edits by start offset.
Patch make_patch(const SourceText& base, std::vector<Edit> edits);

/// Throws StaleBase on hash mismatch and OverlappingEdits when edits overlap
/// or are out of order.
SourceText apply_patch(const SourceText& text, const Patch& patch);

enum class DeclarationKind {
    Method,
    Lemma,
    Function,
    Predicate,
    GhostFunction,
    GhostPredicate,
    Datatype,
    Other,
};

std::string_view to_string(DeclarationKind kind);

struct DeclarationInfo {
    DeclarationKind kind = DeclarationKind::Other;
    std::string keyword;  // leading keyword as written ("lemma", "class", ...)
    std::string name;
    Span extent;
    Span header_extent;
    /// Braces of the body including both '{' and '}', when there is one.
    std::optional<Span> body;
    /// Whether the header carries the {:axiom} attribute.
    bool has_axiom_attribute = false;
    /// Members of classes, traits and modules.
    std::vector<DeclarationInfo> members;
};

/// Top-level declarations of the file, found by lexical scanning. Container
/// declarations (module, class, trait, datatype bodies) list their members.
std::vector<DeclarationInfo> scan_declarations(const SourceText& text);

/// Depth-first flattening of scan_declarations.
std::vector<DeclarationInfo> all_declarations(const SourceText& text);

/// Innermost declaration whose extent contains `span`, or nullopt.
std::optional<DeclarationInfo> find_enclosing_declaration(const SourceText& text, const Span& span);

std::optional<DeclarationInfo> find_declaration(const SourceText& text, std::string_view name);

}  // namespace dafny_pilot
