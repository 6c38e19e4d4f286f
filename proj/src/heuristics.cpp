#include "dafny_pilot/heuristics.hpp"

#include <map>
#include <optional>
#include <set>

#include "dafny_pilot/lexer.hpp"
#include "dafny_pilot/util.hpp"

namespace dafny_pilot {

namespace {

bool is_calc_operator(const Token& t) {
    static const std::set<std::string_view> ops = {"==", "!=", "<", ">", "<=", ">=", "==>", "<==",
                                                   "<==>", "&&", "||", "=", "in", "!in"};
    return t.kind == TokenKind::Punct ? ops.count(t.text) > 0 : (t.is("in"));
}

bool starts_line(std::string_view content, const Token& t) {
    size_t i = t.offset;
    while (i > 0 && (content[i - 1] == ' ' || content[i - 1] == '\t')) --i;
    return i == 0 || content[i - 1] == '\n';
}

struct HintGroup {
    size_t open_tok;
    size_t close_tok;
};

struct CalcBlock {
    size_t calc_tok;
    size_t close_tok;
    std::vector<HintGroup> hints;
};

std::vector<CalcBlock> find_calc_blocks(std::string_view content, const std::vector<Token>& toks) {
    std::vector<CalcBlock> blocks;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (!toks[i].is("calc")) continue;
        size_t k = i + 1;
        while (k < toks.size() && toks[k].is("{:")) k = matching_close(toks, k) + 1;
        while (k < toks.size() && !toks[k].is("{") && !toks[k].is(";") && !toks[k].is("}")) ++k;
        if (k >= toks.size() || !toks[k].is("{")) continue;
        const size_t close = matching_close(toks, k);
        if (close >= toks.size()) continue;

        CalcBlock block{i, close, {}};
        for (size_t j = k + 1; j < close; ++j) {
            const Token& t = toks[j];
            if (t.is("(") || t.is("[") || t.is("{:")) {
                j = matching_close(toks, j);
                continue;
            }
            if (!t.is("{")) continue;
            const size_t hint_close = matching_close(toks, j);
            const Token& prev = toks[j - 1];
            const bool after_operator =
                is_calc_operator(prev) && (starts_line(content, prev) || toks[j - 2].is(";") || j - 1 == k + 1);
            const bool after_step = prev.is(";") || j - 1 == k;
            if ((after_operator || after_step) && hint_close > j + 1) {
                block.hints.push_back({j, hint_close});
            }
            j = hint_close;
        }
        blocks.push_back(std::move(block));
        i = close;
    }
    return blocks;
}

}  // namespace

HeuristicResult comment_failing_hints(const SourceText& text, const std::vector<Diagnostic>& diags) {
    const std::string& content = text.content();
    const std::vector<Token> toks = tokenize(content);
    const std::vector<CalcBlock> blocks = find_calc_blocks(content, toks);

    std::set<size_t> chosen;  // open-token indices of hints to wrap
    for (const Diagnostic& raw : diags) {
        if (!raw.is_error()) continue;
        const Diagnostic d = bind_to(raw, text);
        const size_t at = d.span.start_off;
        for (const CalcBlock& b : blocks) {
            if (b.hints.empty()) continue;
            if (at < toks[b.calc_tok].offset || at >= toks[b.close_tok].end()) continue;
            std::optional<size_t> pick;
            for (const HintGroup& h : b.hints) {
                const int first = text.position_of(toks[h.open_tok].offset).first;
                const int last = text.position_of(toks[h.close_tok].offset).first;
                if (d.span.start_line >= first && d.span.start_line <= last) pick = h.open_tok;
            }
            if (!pick) {
                // The step right after a hint carries the failure for that hint.
                for (const HintGroup& h : b.hints) {
                    const int last = text.position_of(toks[h.close_tok].offset).first;
                    if (last + 1 == d.span.start_line) pick = h.open_tok;
                }
            }
            if (pick) {
                chosen.insert(*pick);
            } else {
                for (const HintGroup& h : b.hints) chosen.insert(h.open_tok);
            }
        }
    }
    if (chosen.empty()) return {text, false};

    std::vector<Edit> edits;
    for (const CalcBlock& b : blocks) {
        for (const HintGroup& h : b.hints) {
            if (!chosen.count(h.open_tok)) continue;
            edits.push_back(make_insertion(text, toks[h.open_tok].offset, "/* "));
            edits.push_back(make_insertion(text, toks[h.close_tok].end(), " */"));
        }
    }
    return {apply_patch(text, make_patch(text, std::move(edits))), true};
}

namespace {

bool is_clause_keyword(const Token& t) {
    return t.is("requires") || t.is("ensures") || t.is("decreases") || t.is("modifies") || t.is("reads");
}

/// Single-variable existential preconditions: variable name -> body text.
std::map<std::string, std::string> existential_requires(std::string_view content,
                                                        const std::vector<Token>& toks) {
    std::map<std::string, std::string> out;
    for (size_t i = 0; i + 3 < toks.size(); ++i) {
        if (!toks[i].is("requires") || !toks[i + 1].is("exists")) continue;
        size_t k = i + 2;
        std::vector<std::string> vars;
        while (k < toks.size() && !toks[k].is("::")) {
            if (toks[k].kind == TokenKind::Identifier && (toks[k - 1].is("exists") || toks[k - 1].is(","))) {
                vars.emplace_back(toks[k].text);
            }
            ++k;
        }
        if (k >= toks.size() || vars.size() != 1) continue;
        size_t e = k + 1;
        size_t last = k;
        int depth = 0;
        while (e < toks.size()) {
            const Token& t = toks[e];
            if (depth == 0 && (is_clause_keyword(t) || t.is("{"))) break;
            if (t.is("(") || t.is("[")) ++depth;
            if (t.is(")") || t.is("]")) --depth;
            last = e;
            ++e;
        }
        if (last == k) continue;
        const size_t from = toks[k + 1].offset;
        out.emplace(vars.front(), std::string(content.substr(from, toks[last].end() - from)));
        i = last;
    }
    return out;
}

}  // namespace

HeuristicResult rewrite_witness_bindings(const SourceText& text, const DeclarationInfo& lemma) {
    if (lemma.kind != DeclarationKind::Lemma || !lemma.body) return {text, false};
    const std::string_view content = text.content();

    const size_t hstart = lemma.header_extent.start_off;
    const std::string_view header = content.substr(hstart, lemma.header_extent.length());
    const std::map<std::string, std::string> witnesses = existential_requires(header, tokenize(header));
    if (witnesses.empty()) return {text, false};

    const size_t bstart = lemma.body->start_off;
    const std::string_view body = content.substr(bstart, lemma.body->length());
    const std::vector<Token> toks = tokenize(body);
    std::vector<Edit> edits;
    for (size_t i = 0; i + 2 < toks.size(); ++i) {
        if (!toks[i].is("var") || toks[i + 1].kind != TokenKind::Identifier) continue;
        const auto w = witnesses.find(std::string(toks[i + 1].text));
        if (w == witnesses.end()) continue;
        size_t k = i + 2;
        bool simple = true;
        int depth = 0;
        while (k < toks.size() && !(depth == 0 && (toks[k].is(":=") || toks[k].is(":|") || toks[k].is(";")))) {
            if (toks[k].is("<") || toks[k].is("(")) ++depth;
            if (toks[k].is(">") || toks[k].is(")")) --depth;
            if (depth == 0 && toks[k].is(",")) simple = false;
            ++k;
        }
        if (!simple || k >= toks.size() || !toks[k].is(":=")) continue;
        size_t semi = k + 1;
        depth = 0;
        while (semi < toks.size() && !(depth == 0 && toks[semi].is(";"))) {
            if (toks[semi].is("(") || toks[semi].is("[") || toks[semi].is("{")) ++depth;
            if (toks[semi].is(")") || toks[semi].is("]") || toks[semi].is("}")) --depth;
            if (depth == 0 && toks[semi].is(",")) simple = false;
            ++semi;
        }
        if (!simple || semi >= toks.size()) continue;
        edits.push_back(make_edit(text, bstart + toks[i].offset, bstart + toks[semi].end(),
                                  "var " + w->first + " :| " + w->second + ";"));
        i = semi;
    }
    if (edits.empty()) return {text, false};
    return {apply_patch(text, make_patch(text, std::move(edits))), true};
}

HeuristicResult rewrite_witness_bindings_everywhere(const SourceText& text) {
    HeuristicResult acc{text, false};
    // Names are stable across rewrites; offsets are not, so rescan each time.
    std::vector<std::string> names;
    for (const DeclarationInfo& d : all_declarations(text)) {
        if (d.kind == DeclarationKind::Lemma) names.push_back(d.name);
    }
    for (const std::string& name : names) {
        for (const DeclarationInfo& d : all_declarations(acc.text)) {
            if (d.kind != DeclarationKind::Lemma || d.name != name) continue;
            HeuristicResult r = rewrite_witness_bindings(acc.text, d);
            if (r.changed) acc = {std::move(r.text), true};
            break;
        }
    }
    return acc;
}

}  // namespace dafny_pilot
