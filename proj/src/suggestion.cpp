#include "dafny_pilot/suggestion.hpp"

#include <algorithm>
#include <optional>
#include <regex>
#include <set>

#include "dafny_pilot/diff.hpp"
#include "dafny_pilot/error.hpp"
#include "dafny_pilot/lexer.hpp"
#include "dafny_pilot/marker.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

std::string_view to_string(CandidateKind k) {
    switch (k) {
        case CandidateKind::FullFileRewrite: return "FullFileRewrite";
        case CandidateKind::NewLemmaDeclaration: return "NewLemmaDeclaration";
        case CandidateKind::LemmaCallInsertion: return "LemmaCallInsertion";
        case CandidateKind::ProofBody: return "ProofBody";
        case CandidateKind::GenericPatch: return "GenericPatch";
    }
    return "GenericPatch";
}

std::string_view to_string(PrecheckState s) {
    switch (s) {
        case PrecheckState::Unchecked: return "unchecked";
        case PrecheckState::Passed: return "passed";
        case PrecheckState::Failed: return "failed";
    }
    return "unchecked";
}

namespace {

std::vector<std::string_view> nonblank_trimmed(std::string_view text) {
    std::vector<std::string_view> out;
    for (std::string_view line : split_lines(text)) {
        if (is_blank(line) || is_marker_line(line)) continue;
        out.push_back(trim(line));
    }
    return out;
}

size_t lcs_length(const std::vector<std::string_view>& a, const std::vector<std::string_view>& b) {
    std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (size_t i = 1; i <= a.size(); ++i) {
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string join_replacements(const Patch& patch) {
    std::string out;
    for (const Edit& e : patch.edits) {
        if (e.replacement.empty()) continue;
        if (!out.empty()) out += "\n";
        out += e.replacement;
    }
    return out;
}

Candidate make_candidate(const SourceText& base, CandidateKind kind, std::vector<Edit> edits,
                         const Provenance& prov, std::string target_name) {
    Candidate c;
    c.kind = kind;
    c.patch = make_patch(base, std::move(edits));
    c.display_code = join_replacements(c.patch);
    c.provenance = prov;
    c.target_name = std::move(target_name);
    return c;
}

bool is_spec_line(std::string_view trimmed) {
    for (std::string_view kw : {"invariant", "requires", "ensures", "decreases", "modifies", "reads"}) {
        if (trimmed.substr(0, kw.size()) == kw &&
            (trimmed.size() == kw.size() || !is_ident_char(trimmed[kw.size()]))) {
            return true;
        }
    }
    return false;
}

bool is_comment_line(std::string_view trimmed) {
    return trimmed.substr(0, 2) == "//" || (trimmed.substr(0, 2) == "/*" && trimmed.size() >= 4 &&
                                            trimmed.substr(trimmed.size() - 2) == "*/");
}

std::string indent_block(std::string_view code, std::string_view indent) {
    std::string out;
    for (std::string_view line : split_lines(code)) {
        if (!is_blank(line)) {
            out += indent;
            out += line;
        }
        out += "\n";
    }
    return out;
}

std::string dedent(std::string_view code) {
    const auto lines = split_lines(code);
    size_t common = std::string::npos;
    for (std::string_view line : lines) {
        if (is_blank(line)) continue;
        common = std::min(common, leading_whitespace(line).size());
    }
    if (common == std::string::npos) common = 0;
    std::string out;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (i) out += "\n";
        if (!is_blank(lines[i])) out += lines[i].substr(common);
    }
    return out;
}

class Placer {
public:
    Placer(const SourceText& text, const CompletionResponse& response, const Diagnostic* target)
        : text_(text), response_(response), target_(target), decls_(all_declarations(text)) {
        for (const DeclarationInfo& d : decls_) {
            if (d.kind == DeclarationKind::Lemma) lemma_names_.insert(d.name);
        }
    }

    /// Lemmas declared by any snippet of the response count as callable from
    /// every other snippet.
    void note_lemmas(std::string_view raw_snippet) {
        const SourceText snip("<snippet>", strip_error_markers(raw_snippet));
        for (const DeclarationInfo& d : scan_declarations(snip)) {
            if (d.kind == DeclarationKind::Lemma) lemma_names_.insert(d.name);
        }
    }

    /// Candidates for one snippet; sets `unplaceable` when some part of it
    /// could not be anchored.
    std::vector<Candidate> place(std::string_view raw_snippet, bool& unplaceable) {
        std::vector<Candidate> out;
        const std::string code = strip_error_markers(raw_snippet);
        const SourceText snip("<snippet>", code);
        const std::vector<DeclarationInfo> snippet_decls = scan_declarations(snip);

        std::set<std::string> known = lemma_names_;
        for (const DeclarationInfo& d : snippet_decls) {
            if (d.kind == DeclarationKind::Lemma) known.insert(d.name);
        }

        std::vector<std::string> new_decls;
        for (const DeclarationInfo& d : snippet_decls) {
            const std::string decl_text(code.substr(d.extent.start_off, d.extent.length()));
            const DeclarationInfo* existing = find_existing(d.name);
            if (existing == nullptr) {
                new_decls.push_back(decl_text);
                continue;
            }
            if (existing->kind == DeclarationKind::Lemma && d.kind == DeclarationKind::Lemma) {
                if (!d.body) {
                    unplaceable = true;
                    continue;
                }
                const std::string body(code.substr(d.body->start_off, d.body->length()));
                Edit e = existing->body
                             ? make_edit(text_, existing->body->start_off, existing->body->end_off, body)
                             : make_insertion(text_, existing->header_extent.end_off, " " + body);
                if (existing->body && text_.content().substr(existing->body->start_off,
                                                             existing->body->length()) == body) {
                    continue;
                }
                out.push_back(make_candidate(text_, CandidateKind::ProofBody, {std::move(e)},
                                             response_.provenance, d.name));
                continue;
            }
            if (text_.content().substr(existing->extent.start_off, existing->extent.length()) == decl_text) {
                continue;
            }
            out.push_back(make_candidate(
                text_, CandidateKind::GenericPatch,
                {make_edit(text_, existing->extent.start_off, existing->extent.end_off, decl_text)},
                response_.provenance, d.name));
        }

        if (!new_decls.empty()) {
            std::string joined;
            for (const std::string& d : new_decls) {
                if (!joined.empty()) joined += "\n\n";
                joined += d;
            }
            const std::vector<DeclarationInfo> top = scan_declarations(text_);
            Edit e = top.empty() ? make_insertion(text_, text_.content().size(),
                                                  (text_.content().empty() ? "" : "\n") + joined + "\n")
                                 : make_insertion(text_, top.front().extent.start_off, joined + "\n\n");
            out.push_back(make_candidate(text_, CandidateKind::NewLemmaDeclaration, {std::move(e)},
                                         response_.provenance, new_decls.size() == 1 ? name_of(new_decls[0]) : ""));
        }

        // Remaining lines outside the snippet's declarations.
        std::string rest;
        size_t pos = 0;
        for (const DeclarationInfo& d : snippet_decls) {
            rest += code.substr(pos, d.extent.start_off - pos);
            rest += "\n";
            pos = d.extent.end_off;
        }
        rest += code.substr(pos);
        const std::vector<std::string_view> loose = split_lines(rest);

        const bool calls_placed = place_calls(loose, known, out, unplaceable);

        if (snippet_decls.empty() && !calls_placed) {
            const std::vector<Token> toks = tokenize(code);
            if (!toks.empty() && (toks.front().is("calc") || toks.front().is("assert") || toks.front().is("var"))) {
                if (auto c = bare_proof(code)) {
                    out.push_back(std::move(*c));
                } else {
                    unplaceable = true;
                }
            } else if (!toks.empty()) {
                unplaceable = true;
            }
        }
        return out;
    }

private:
    const DeclarationInfo* find_existing(const std::string& name) const {
        for (const DeclarationInfo& d : decls_) {
            if (d.name == name) return &d;
        }
        return nullptr;
    }

    static std::string name_of(const std::string& decl_text) {
        const SourceText t("<decl>", decl_text);
        const auto ds = scan_declarations(t);
        return ds.empty() ? "" : ds.front().name;
    }

    /// File line equal to `context` (trimmed). Lines inside the target's
    /// declaration and lines followed by `following` are preferred.
    std::optional<int> anchor_line_for_context(std::string_view context,
                                               std::optional<std::string_view> following) const {
        const std::string_view want = trim(context);
        if (want.empty()) return std::nullopt;
        std::optional<DeclarationInfo> scope;
        if (target_ != nullptr) scope = find_enclosing_declaration(text_, target_->span);
        const int lines = static_cast<int>(text_.line_count());
        std::optional<int> best;
        int best_score = -1;
        for (int n = 1; n <= lines; ++n) {
            if (trim(text_.line(n)) != want) continue;
            int score = 0;
            if (scope && text_.line_start(n) >= scope->extent.start_off &&
                text_.line_start(n) < scope->extent.end_off) {
                score += 2;
            }
            if (following) {
                int k = n + 1;
                while (k <= lines && is_blank(text_.line(k))) ++k;
                if (k <= lines && trim(text_.line(k)) == trim(*following)) score += 1;
            }
            if (score > best_score) {
                best = n;
                best_score = score;
            }
        }
        return best;
    }

    std::optional<int> statement_after_target() const {
        if (target_ == nullptr) return std::nullopt;
        for (int n = target_->span.start_line + 1; n <= static_cast<int>(text_.line_count()); ++n) {
            const std::string_view t = trim(text_.line(n));
            if (t.empty() || is_spec_line(t) || is_comment_line(t)) continue;
            if (t.find(';') != std::string_view::npos) return n;
        }
        return std::nullopt;
    }

    std::string indent_after(int line) const {
        for (int n = line + 1; n <= static_cast<int>(text_.line_count()); ++n) {
            const std::string_view l = text_.line(n);
            if (is_blank(l)) continue;
            if (trim(l).front() == '}') return leading_whitespace(text_.line(line)) + "  ";
            return leading_whitespace(l);
        }
        return leading_whitespace(text_.line(line));
    }

    bool place_calls(const std::vector<std::string_view>& lines, const std::set<std::string>& known,
                     std::vector<Candidate>& out, bool& unplaceable) const {
        static const std::regex call_re(R"(^\s*([A-Za-z_][A-Za-z0-9_'?]*)\s*\(.*\)\s*;\s*(//.*)?$)");
        bool placed = false;
        for (size_t i = 0; i < lines.size(); ++i) {
            std::cmatch m;
            if (!std::regex_match(lines[i].begin(), lines[i].end(), m, call_re)) continue;
            const std::string name = m[1].str();
            if (!known.count(name)) continue;

            // Comment lines directly above the call travel with it.
            size_t first = i;
            while (first > 0 && is_comment_line(trim(lines[first - 1]))) --first;
            std::optional<std::string_view> context;
            for (size_t k = first; k > 0; --k) {
                if (!is_blank(lines[k - 1])) {
                    context = lines[k - 1];
                    break;
                }
            }

            std::optional<std::string_view> following;
            for (size_t k = i + 1; k < lines.size(); ++k) {
                if (!is_blank(lines[k])) {
                    following = lines[k];
                    break;
                }
            }

            std::optional<Edit> edit;
            if (context) {
                if (auto anchor = anchor_line_for_context(*context, following)) {
                    const std::string indent = indent_after(*anchor);
                    std::string inserted;
                    for (size_t k = first; k <= i; ++k) inserted += indent + std::string(trim(lines[k])) + "\n";
                    if (*anchor < static_cast<int>(text_.line_count())) {
                        edit = make_insertion(text_, text_.line_start(*anchor + 1), inserted);
                    } else {
                        inserted.pop_back();
                        edit = make_insertion(text_, text_.line_end(*anchor), "\n" + inserted);
                    }
                }
            }
            if (!edit) {
                if (auto stmt = statement_after_target()) {
                    const std::string indent = leading_whitespace(text_.line(*stmt));
                    std::string inserted;
                    for (size_t k = first; k <= i; ++k) inserted += indent + std::string(trim(lines[k])) + "\n";
                    edit = make_insertion(text_, text_.line_start(*stmt), inserted);
                }
            }
            if (!edit) {
                unplaceable = true;
                continue;
            }
            out.push_back(make_candidate(text_, CandidateKind::LemmaCallInsertion, {std::move(*edit)},
                                         response_.provenance, name));
            placed = true;
        }
        return placed;
    }

    std::optional<Candidate> bare_proof(const std::string& code) const {
        const DeclarationInfo* lemma = nullptr;
        if (target_ != nullptr) {
            for (const DeclarationInfo& d : decls_) {
                if (d.kind == DeclarationKind::Lemma && d.extent.contains(target_->span)) lemma = &d;
            }
        }
        if (lemma == nullptr) {
            for (const DeclarationInfo& d : decls_) {
                if (d.kind == DeclarationKind::Lemma && contains_word(response_.text, d.name)) {
                    lemma = &d;
                    break;
                }
            }
        }
        if (lemma == nullptr) return std::nullopt;
        const std::string body = "{\n" + indent_block(dedent(code), "  ") + "}";
        Edit e = lemma->body ? make_edit(text_, lemma->body->start_off, lemma->body->end_off, body)
                             : make_insertion(text_, lemma->header_extent.end_off, " " + body);
        return make_candidate(text_, CandidateKind::ProofBody, {std::move(e)}, response_.provenance, lemma->name);
    }

    const SourceText& text_;
    const CompletionResponse& response_;
    const Diagnostic* target_;
    std::vector<DeclarationInfo> decls_;
    std::set<std::string> lemma_names_;
};

}  // namespace

bool is_full_file_rewrite(const SourceText& original, std::string_view snippet, double threshold) {
    const auto orig = nonblank_trimmed(original.content());
    if (orig.empty()) return false;
    const auto snip = nonblank_trimmed(snippet);
    return static_cast<double>(lcs_length(orig, snip)) >= threshold * static_cast<double>(orig.size());
}

std::vector<Candidate> candidates_from_response(const SourceText& session_text, const CompletionResponse& response,
                                                const Diagnostic* target, double rewrite_threshold) {
    const std::vector<std::string_view> snippets = extract_code_blocks(response.text);
    if (snippets.empty()) throw Error(ErrorCode::NoCodeFound, "the response contains no code");

    for (std::string_view s : snippets) {
        if (!is_full_file_rewrite(session_text, s, rewrite_threshold)) continue;
        std::string new_content = strip_error_markers(s);
        if (!session_text.content().empty() && session_text.content().back() == '\n' &&
            (new_content.empty() || new_content.back() != '\n')) {
            new_content += '\n';
        }
        Patch patch = line_diff_patch(session_text, new_content);
        if (patch.empty()) return {};
        Candidate c;
        c.kind = CandidateKind::FullFileRewrite;
        c.patch = std::move(patch);
        c.display_code = join_replacements(c.patch);
        c.provenance = response.provenance;
        return {std::move(c)};
    }

    Placer placer(session_text, response, target);
    std::vector<Candidate> out;
    bool unplaceable = false;
    for (std::string_view s : snippets) placer.note_lemmas(s);
    for (std::string_view s : snippets) {
        auto cs = placer.place(s, unplaceable);
        for (Candidate& c : cs) out.push_back(std::move(c));
    }
    if (out.empty() && unplaceable) {
        throw Error(ErrorCode::UnplaceableSnippet, "no part of the suggested code could be anchored in the file");
    }
    return out;
}

Candidate merge_candidates(const SourceText& base, const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to merge");
    if (candidates.size() == 1) return candidates.front();
    std::vector<Edit> kept;
    auto overlaps = [&](const Edit& e) {
        for (const Edit& k : kept) {
            const bool both_insert_same = e.span.empty() && k.span.empty() && e.span.start_off == k.span.start_off;
            if (both_insert_same) continue;
            if (e.span.start_off < k.span.end_off && k.span.start_off < e.span.end_off) return true;
            if (e.span.empty() && k.span.start_off < e.span.start_off && e.span.start_off < k.span.end_off) return true;
            if (k.span.empty() && e.span.start_off < k.span.start_off && k.span.start_off < e.span.end_off) return true;
        }
        return false;
    };
    Candidate merged;
    merged.kind = candidates.front().kind;
    merged.provenance = candidates.front().provenance;
    merged.target_name = candidates.front().target_name;
    for (const Candidate& c : candidates) {
        if (c.kind != merged.kind) merged.kind = CandidateKind::GenericPatch;
        bool any = false;
        for (const Edit& e : c.patch.edits) {
            if (overlaps(e)) continue;
            kept.push_back(e);
            any = true;
        }
        if (!any) continue;
        if (!merged.display_code.empty()) merged.display_code += "\n";
        merged.display_code += c.display_code;
        if (c.target_name != merged.target_name) merged.target_name.clear();
    }
    merged.patch = make_patch(base, std::move(kept));
    return merged;
}

Precheck syntax_precheck(Verifier& verifier, const SourceText& text_after_patch) {
    const VerificationResult r = verifier.resolve(text_after_patch);
    Precheck p;
    for (const Diagnostic& d : r.errors()) {
        if (d.category == DiagnosticCategory::SyntaxOrResolution) p.diagnostics.push_back(d);
    }
    const bool crashed = r.status == VerificationStatus::CrashedOrUnparsable;
    p.state = p.diagnostics.empty() && !crashed ? PrecheckState::Passed : PrecheckState::Failed;
    return p;
}

SourceText axiomatize(const SourceText& text, std::string_view lemma_name) {
    const DeclarationInfo* lemma = nullptr;
    const std::vector<DeclarationInfo> decls = all_declarations(text);
    for (const DeclarationInfo& d : decls) {
        if (d.kind == DeclarationKind::Lemma && d.name == lemma_name) {
            lemma = &d;
            break;
        }
    }
    if (lemma == nullptr) throw Error(ErrorCode::NoSuchLemma, std::string(lemma_name));
    if (lemma->has_axiom_attribute && !lemma->body) return text;

    std::vector<Edit> edits;
    if (!lemma->has_axiom_attribute) {
        const size_t start = lemma->header_extent.start_off;
        const std::string_view header =
            std::string_view(text.content()).substr(start, lemma->header_extent.length());
        for (const Token& t : tokenize(header)) {
            if (t.is("lemma")) {
                edits.push_back(make_insertion(text, start + t.end(), " {:axiom}"));
                break;
            }
        }
    }
    if (lemma->body) {
        edits.push_back(make_edit(text, lemma->header_extent.end_off, lemma->body->end_off, ""));
    }
    return apply_patch(text, make_patch(text, std::move(edits)));
}

}  // namespace dafny_pilot
