#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace dafny_pilot {

enum class TokenKind { Identifier, Number, String, Char, Punct };

/// One lexical token of Dafny source. Comments and whitespace never produce
/// tokens, so braces inside them are invisible to callers.
struct Token {
    TokenKind kind;
    size_t offset;
    size_t length;
    std::string_view text;

    size_t end() const { return offset + length; }
    bool is(std::string_view s) const { return text == s; }
};

/// Character-level scan of Dafny text. Handles nested block comments, line
/// comments, regular and verbatim (@"...") strings, char literals, and
/// primes inside identifiers (x' is one identifier). Multi-character
/// operators are emitted as a single Punct token where it matters to callers
/// ("{:", "::", ":=", ":|", "==", "!=", "<=", ">=", "==>", "<==", "<==>",
/// "=>", "&&", "||", "..").
std::vector<Token> tokenize(std::string_view source);

/// Index of the token matching the opening bracket at `open` ("{", "(" or
/// "["), or tokens.size() when unbalanced.
size_t matching_close(const std::vector<Token>& tokens, size_t open);

}  // namespace dafny_pilot
