#include "dafny_pilot/lexer.hpp"

#include <array>
#include <cctype>

#include "dafny_pilot/util.hpp"

namespace dafny_pilot {
namespace {

constexpr std::array<std::string_view, 15> kOperators = {
    "<==>", "==>", "<==", "{:", "::", ":=", ":|", "==", "!=", "<=", ">=", "=>", "&&", "||", "..",
};

size_t skip_block_comment(std::string_view s, size_t i) {
    // Dafny block comments nest.
    int depth = 0;
    while (i < s.size()) {
        if (s.compare(i, 2, "/*") == 0) {
            ++depth;
            i += 2;
        } else if (s.compare(i, 2, "*/") == 0) {
            --depth;
            i += 2;
            if (depth == 0) return i;
        } else {
            ++i;
        }
    }
    return s.size();
}

size_t skip_string(std::string_view s, size_t i) {
    // s[i] == '"'
    ++i;
    while (i < s.size()) {
        if (s[i] == '\\') {
            i += 2;
        } else if (s[i] == '"') {
            return i + 1;
        } else if (s[i] == '\n') {
            return i;
        } else {
            ++i;
        }
    }
    return s.size();
}

size_t skip_verbatim_string(std::string_view s, size_t i) {
    // s[i] == '@', s[i+1] == '"'; "" is an escaped quote.
    i += 2;
    while (i < s.size()) {
        if (s[i] == '"') {
            if (i + 1 < s.size() && s[i + 1] == '"') {
                i += 2;
                continue;
            }
            return i + 1;
        }
        ++i;
    }
    return s.size();
}

// Returns the end of a char literal starting at i, or 0 when s[i] == '\''
// does not start one.
size_t char_literal_end(std::string_view s, size_t i) {
    if (i + 2 < s.size() && s[i + 1] != '\\' && s[i + 1] != '\n' && s[i + 2] == '\'') {
        return i + 3;
    }
    if (i + 1 < s.size() && s[i + 1] == '\\') {
        size_t j = i + 2;
        while (j < s.size() && j < i + 12 && s[j] != '\'' && s[j] != '\n') ++j;
        if (j < s.size() && s[j] == '\'') return j + 1;
    }
    return 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    size_t i = 0;
    auto push = [&](TokenKind kind, size_t start, size_t end) {
        out.push_back(Token{kind, start, end - start, s.substr(start, end - start)});
    };
    while (i < s.size()) {
        const char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (s.compare(i, 2, "//") == 0) {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (s.compare(i, 2, "/*") == 0) {
            i = skip_block_comment(s, i);
        } else if (c == '"') {
            const size_t end = skip_string(s, i);
            push(TokenKind::String, i, end);
            i = end;
        } else if (c == '@' && i + 1 < s.size() && s[i + 1] == '"') {
            const size_t end = skip_verbatim_string(s, i);
            push(TokenKind::String, i, end);
            i = end;
        } else if (c == '\'' && char_literal_end(s, i) != 0) {
            const size_t end = char_literal_end(s, i);
            push(TokenKind::Char, i, end);
            i = end;
        } else if (is_ident_start(c)) {
            size_t j = i + 1;
            while (j < s.size() && is_ident_char(s[j])) ++j;
            push(TokenKind::Identifier, i, j);
            i = j;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i + 1;
            while (j < s.size() &&
                   (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                    (s[j] == '.' && j + 1 < s.size() &&
                     std::isdigit(static_cast<unsigned char>(s[j + 1]))))) {
                ++j;
            }
            push(TokenKind::Number, i, j);
            i = j;
        } else {
            size_t len = 1;
            for (std::string_view op : kOperators) {
                if (s.compare(i, op.size(), op) == 0) {
                    len = op.size();
                    break;
                }
            }
            push(TokenKind::Punct, i, i + len);
            i += len;
        }
    }
    return out;
}

size_t matching_close(const std::vector<Token>& tokens, size_t open) {
    if (open >= tokens.size()) return tokens.size();
    const std::string_view o = tokens[open].text;
    std::string_view close;
    bool brace_family = false;
    if (o == "{" || o == "{:") {
        close = "}";
        brace_family = true;
    } else if (o == "(") {
        close = ")";
    } else if (o == "[") {
        close = "]";
    } else {
        return tokens.size();
    }
    int depth = 0;
    for (size_t i = open; i < tokens.size(); ++i) {
        const std::string_view t = tokens[i].text;
        const bool opens = brace_family ? (t == "{" || t == "{:") : t == o;
        if (opens) {
            ++depth;
        } else if (t == close) {
            --depth;
            if (depth == 0) return i;
        }
    }
    return tokens.size();
}

}  // namespace dafny_pilot
