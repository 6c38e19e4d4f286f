#include "dafny_pilot/source.hpp"

#include <algorithm>
#include <array>

#include "dafny_pilot/error.hpp"
#include "dafny_pilot/lexer.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

// ---------------------------------------------------------------------------
// SourceText

SourceText::SourceText(std::string path, std::string content, LineEnding eol)
    : path_(std::move(path)), content_(std::move(content)), eol_(eol) {
    line_index_.push_back(0);
    for (size_t i = 0; i < content_.size(); ++i) {
        if (content_[i] == '\n' && i + 1 < content_.size()) {
            line_index_.push_back(i + 1);
        }
    }
    hash_ = sha256_hex(content_);
}

SourceText SourceText::load(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    size_t crlf = 0;
    size_t lf = 0;
    std::string normalized;
    normalized.reserve(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') {
            ++crlf;
            continue;
        }
        if (raw[i] == '\n' && (i == 0 || raw[i - 1] != '\r')) ++lf;
        normalized.push_back(raw[i]);
    }
    const LineEnding eol = crlf > lf ? LineEnding::CRLF : LineEnding::LF;
    return SourceText(path.string(), std::move(normalized), eol);
}

std::string SourceText::content_with_original_endings() const {
    if (eol_ == LineEnding::LF) return content_;
    std::string out;
    out.reserve(content_.size() + line_index_.size());
    for (char c : content_) {
        if (c == '\n') out.push_back('\r');
        out.push_back(c);
    }
    return out;
}

void SourceText::save(const std::filesystem::path& path) const {
    write_file_atomic(path, content_with_original_endings());
}

std::string_view SourceText::line(int n) const {
    const size_t b = line_start(n);
    return std::string_view(content_).substr(b, line_end(n) - b);
}

size_t SourceText::line_start(int n) const {
    if (n < 1 || static_cast<size_t>(n) > line_index_.size()) {
        throw Error(ErrorCode::SpanOutOfRange, "line " + std::to_string(n) + " outside 1.." +
                                                   std::to_string(line_index_.size()));
    }
    return line_index_[static_cast<size_t>(n - 1)];
}

size_t SourceText::line_end(int n) const {
    const size_t b = line_start(n);
    const size_t nl = content_.find('\n', b);
    return nl == std::string::npos ? content_.size() : nl;
}

size_t SourceText::offset_of(int line, int col) const {
    if (col < 1) {
        throw Error(ErrorCode::SpanOutOfRange, "column " + std::to_string(col));
    }
    const bool ends_with_newline = !content_.empty() && content_.back() == '\n';
    if (ends_with_newline && static_cast<size_t>(line) == line_index_.size() + 1 && col == 1) {
        return content_.size();
    }
    const size_t b = line_start(line);
    const size_t len = line_end(line) - b;
    if (static_cast<size_t>(col) > len + 1) {
        throw Error(ErrorCode::SpanOutOfRange, "column " + std::to_string(col) + " past end of line " +
                                                   std::to_string(line));
    }
    return b + static_cast<size_t>(col - 1);
}

std::pair<int, int> SourceText::position_of(size_t offset) const {
    offset = std::min(offset, content_.size());
    auto it = std::upper_bound(line_index_.begin(), line_index_.end(), offset);
    const size_t idx = static_cast<size_t>(it - line_index_.begin()) - 1;
    const size_t start = line_index_[idx];
    if (offset == content_.size() && !content_.empty() && content_.back() == '\n' &&
        offset > start) {
        // One past the trailing newline: column past the end of the last line.
        return {static_cast<int>(idx + 1), static_cast<int>(offset - start)};
    }
    return {static_cast<int>(idx + 1), static_cast<int>(offset - start + 1)};
}

Span SourceText::span(size_t start_off, size_t end_off) const {
    if (start_off > end_off || end_off > content_.size()) {
        throw Error(ErrorCode::SpanOutOfRange, "offsets " + std::to_string(start_off) + ".." +
                                                   std::to_string(end_off));
    }
    const auto [sl, sc] = position_of(start_off);
    const auto [el, ec] = position_of(end_off);
    return Span{sl, sc, el, ec, start_off, end_off};
}

Span SourceText::span_at(int line, int col) const {
    const size_t off = offset_of(line, col);
    return Span{line, col, line, col, off, off};
}

Span SourceText::line_span(int first_line, int last_line) const {
    return span(line_start(first_line), line_end(last_line));
}

Span SourceText::bind(int start_line, int start_col, int end_line, int end_col) const {
    auto clamp = [this](int line, int col) {
        const int lines = static_cast<int>(line_index_.size());
        line = std::clamp(line, 1, lines);
        const int len = static_cast<int>(line_end(line) - line_start(line));
        col = std::clamp(col, 1, len + 1);
        return std::pair{line, col};
    };
    auto [sl, sc] = clamp(start_line, start_col);
    auto [el, ec] = clamp(end_line, end_col);
    size_t so = line_start(sl) + static_cast<size_t>(sc - 1);
    size_t eo = line_start(el) + static_cast<size_t>(ec - 1);
    if (eo < so) {
        eo = so;
        el = sl;
        ec = sc;
    }
    return Span{sl, sc, el, ec, so, eo};
}

SourceText SourceText::with_content(std::string content) const {
    return SourceText(path_, std::move(content), eol_);
}

// ---------------------------------------------------------------------------
// Patches

size_t Patch::size_bytes() const {
    size_t total = 0;
    for (const Edit& e : edits) total += e.span.length() + e.replacement.size();
    return total;
}

Edit make_edit(const SourceText& text, size_t start_off, size_t end_off, std::string replacement) {
    return Edit{text.span(start_off, end_off), std::move(replacement)};
}

Edit make_insertion(const SourceText& text, size_t at, std::string inserted) {
    return make_edit(text, at, at, std::move(inserted));
}

Patch make_patch(const SourceText& base, std::vector<Edit> edits) {
    std::stable_sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
        return a.span.start_off < b.span.start_off;
    });
    return Patch{base.content_hash(), std::move(edits)};
}

SourceText apply_patch(const SourceText& text, const Patch& patch) {
    if (patch.base_hash != text.content_hash()) {
        throw Error(ErrorCode::StaleBase,
                    "patch base " + patch.base_hash.substr(0, 12) + " does not match text " +
                        text.content_hash().substr(0, 12));
    }
    const std::string& in = text.content();
    size_t cursor = 0;
    std::string out;
    out.reserve(in.size());
    for (const Edit& e : patch.edits) {
        if (e.span.start_off > e.span.end_off || e.span.end_off > in.size()) {
            throw Error(ErrorCode::SpanOutOfRange, "edit span outside text");
        }
        if (e.span.start_off < cursor) {
            throw Error(ErrorCode::OverlappingEdits,
                        "edit at offset " + std::to_string(e.span.start_off) +
                            " overlaps or precedes the previous edit");
        }
        out.append(in, cursor, e.span.start_off - cursor);
        out.append(e.replacement);
        cursor = e.span.end_off;
    }
    out.append(in, cursor, std::string::npos);
    return text.with_content(std::move(out));
}

// ---------------------------------------------------------------------------
// Declaration scanning

std::string_view to_string(DeclarationKind kind) {
    switch (kind) {
        case DeclarationKind::Method: return "method";
        case DeclarationKind::Lemma: return "lemma";
        case DeclarationKind::Function: return "function";
        case DeclarationKind::Predicate: return "predicate";
        case DeclarationKind::GhostFunction: return "ghost-function";
        case DeclarationKind::GhostPredicate: return "ghost-predicate";
        case DeclarationKind::Datatype: return "datatype";
        case DeclarationKind::Other: return "other";
    }
    return "other";
}

namespace {

constexpr std::array<std::string_view, 11> kModifiers = {
    "ghost", "static", "opaque", "abstract", "twostate", "least",
    "greatest", "inductive", "replaceable", "copredicate", "private",
};

constexpr std::array<std::string_view, 19> kDeclKeywords = {
    "method",  "constructor", "lemma",   "function", "predicate", "datatype", "codatatype",
    "class",   "trait",       "module",  "type",     "newtype",   "const",    "iterator",
    "import",  "include",     "export",  "var",      "colemma",
};

bool is_modifier(const Token& t) {
    return t.kind == TokenKind::Identifier &&
           std::find(kModifiers.begin(), kModifiers.end(), t.text) != kModifiers.end();
}

bool is_decl_keyword(const Token& t) {
    return t.kind == TokenKind::Identifier &&
           std::find(kDeclKeywords.begin(), kDeclKeywords.end(), t.text) != kDeclKeywords.end();
}

bool is_container(std::string_view kw) {
    return kw == "class" || kw == "trait" || kw == "module" || kw == "datatype" ||
           kw == "codatatype" || kw == "newtype" || kw == "iterator";
}

// A '{' right after one of these is a set display inside an expression, not
// the start of a body.
bool precedes_expression(const Token& t) {
    static constexpr std::array<std::string_view, 22> kOps = {
        "==", "!=", "=>", "<==>", "==>", "<==", ":=", ",", "(", "[", "+",
        "-",  "*",  "<",  "<=",   ">",   ">=",  "&&", "||", "!", "=", "in",
    };
    return std::find(kOps.begin(), kOps.end(), t.text) != kOps.end();
}

DeclarationKind classify(std::string_view kw, bool ghost) {
    if (kw == "method" || kw == "constructor") return DeclarationKind::Method;
    if (kw == "lemma" || kw == "colemma") return DeclarationKind::Lemma;
    if (kw == "function") return ghost ? DeclarationKind::GhostFunction : DeclarationKind::Function;
    if (kw == "predicate") {
        return ghost ? DeclarationKind::GhostPredicate : DeclarationKind::Predicate;
    }
    if (kw == "datatype" || kw == "codatatype") return DeclarationKind::Datatype;
    return DeclarationKind::Other;
}

struct Scanner {
    const SourceText& text;
    const std::vector<Token>& toks;

    // Scans [begin, end) at one nesting level.
    std::vector<DeclarationInfo> scan(size_t begin, size_t end) const {
        std::vector<DeclarationInfo> out;
        size_t i = begin;
        while (i < end) {
            const Token& t = toks[i];
            if (t.is("{") || t.is("{:") || t.is("(") || t.is("[")) {
                // Stray bracket outside any declaration: skip it whole.
                const size_t close = matching_close(toks, i);
                i = close >= end ? end : close + 1;
                continue;
            }
            if (!is_modifier(t) && !is_decl_keyword(t)) {
                ++i;
                continue;
            }
            size_t kw = i;
            bool ghost = false;
            while (kw < end && is_modifier(toks[kw])) {
                if (toks[kw].is("ghost")) ghost = true;
                ++kw;
            }
            if (kw >= end || !is_decl_keyword(toks[kw])) {
                i = kw;
                continue;
            }
            i = parse_one(i, kw, end, ghost, out);
        }
        return out;
    }

    size_t parse_one(size_t start, size_t kw, size_t end, bool ghost,
                     std::vector<DeclarationInfo>& out) const {
        DeclarationInfo d;
        d.keyword = std::string(toks[kw].text);
        d.kind = classify(toks[kw].text, ghost);

        size_t k = kw + 1;
        if (d.keyword == "function" && k < end && toks[k].is("method")) ++k;
        // Name: first identifier or string after attributes.
        for (size_t n = k; n < end; ++n) {
            if (toks[n].is("{:")) {
                if (n + 1 < end && toks[n + 1].is("axiom")) d.has_axiom_attribute = true;
                n = std::min(matching_close(toks, n), end);
                continue;
            }
            if (toks[n].kind == TokenKind::Identifier || toks[n].kind == TokenKind::String) {
                if (toks[n].is("opened")) continue;
                d.name = std::string(toks[n].text);
            }
            break;
        }
        if (d.name.empty()) d.name = d.keyword;

        const size_t start_off = toks[start].offset;
        size_t last = kw;  // last token belonging to the declaration
        while (k < end) {
            const Token& t = toks[k];
            if (t.is("{:")) {
                if (k + 1 < end && toks[k + 1].is("axiom")) d.has_axiom_attribute = true;
                const size_t close = matching_close(toks, k);
                if (close >= end) return finish_bodyless(d, start_off, end - 1, end, out);
                last = close;
                k = close + 1;
                continue;
            }
            if (t.is("(") || t.is("[")) {
                const size_t close = matching_close(toks, k);
                if (close >= end) return finish_bodyless(d, start_off, end - 1, end, out);
                last = close;
                k = close + 1;
                continue;
            }
            if (t.is("{") && !precedes_expression(toks[k - 1])) {
                const size_t close = matching_close(toks, k);
                const size_t body_end = close >= end ? end - 1 : close;
                d.header_extent = text.span(start_off, toks[k - 1].end());
                d.body = text.span(t.offset, toks[body_end].end());
                d.extent = text.span(start_off, toks[body_end].end());
                if (is_container(d.keyword)) d.members = scan(k + 1, body_end);
                out.push_back(std::move(d));
                return body_end + 1;
            }
            if (t.is("{")) {
                // Set display inside a header expression.
                const size_t close = matching_close(toks, k);
                if (close >= end) return finish_bodyless(d, start_off, end - 1, end, out);
                last = close;
                k = close + 1;
                continue;
            }
            if (t.is("}")) break;
            if ((is_decl_keyword(t) || is_modifier(t)) && !(d.keyword == "import" && t.is("opened"))) {
                break;
            }
            last = k;
            ++k;
        }
        return finish_bodyless(d, start_off, last, k, out);
    }

    size_t finish_bodyless(DeclarationInfo& d, size_t start_off, size_t last_tok, size_t resume,
                           std::vector<DeclarationInfo>& out) const {
        d.extent = text.span(start_off, toks[last_tok].end());
        d.header_extent = d.extent;
        out.push_back(std::move(d));
        return resume;
    }
};

void flatten(const std::vector<DeclarationInfo>& decls, std::vector<DeclarationInfo>& out) {
    for (const DeclarationInfo& d : decls) {
        out.push_back(d);
        flatten(d.members, out);
    }
}

const DeclarationInfo* innermost(const std::vector<DeclarationInfo>& decls, const Span& span) {
    for (const DeclarationInfo& d : decls) {
        if (d.extent.contains(span)) {
            if (const DeclarationInfo* inner = innermost(d.members, span)) return inner;
            return &d;
        }
    }
    return nullptr;
}

}  // namespace

std::vector<DeclarationInfo> scan_declarations(const SourceText& text) {
    const std::vector<Token> toks = tokenize(text.content());
    Scanner scanner{text, toks};
    return scanner.scan(0, toks.size());
}

std::vector<DeclarationInfo> all_declarations(const SourceText& text) {
    std::vector<DeclarationInfo> out;
    flatten(scan_declarations(text), out);
    return out;
}

std::optional<DeclarationInfo> find_enclosing_declaration(const SourceText& text, const Span& span) {
    const auto decls = scan_declarations(text);
    if (const DeclarationInfo* d = innermost(decls, span)) return *d;
    return std::nullopt;
}

std::optional<DeclarationInfo> find_declaration(const SourceText& text, std::string_view name) {
    for (DeclarationInfo& d : all_declarations(text)) {
        if (d.name == name) return std::move(d);
    }
    return std::nullopt;
}

}  // namespace dafny_pilot
