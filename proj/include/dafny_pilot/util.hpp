#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dafny_pilot {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);
bool is_blank(std::string_view s);

/// Splits on '\n'. A trailing newline does not produce an empty last element.
std::vector<std::string_view> split_lines(std::string_view text);

std::string leading_whitespace(std::string_view line);

/// Identifier characters as Dafny's lexer understands them (letters, digits,
/// '_', '\'', '?').
bool is_ident_char(char c);
bool is_ident_start(char c);

/// True when `word` occurs in `text` delimited by non-identifier characters.
bool contains_word(std::string_view text, std::string_view word);

std::string to_lower(std::string_view s);

}  // namespace dafny_pilot
