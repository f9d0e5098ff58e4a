#pragma once

// Lexical helpers shared by the line splitter and the inline parser.

#include <cstddef>
#include <string_view>
#include <vector>

namespace taleweaver::markup::detail {

constexpr std::size_t npos = std::string_view::npos;

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

// Skips a double-quoted string starting at s[i] == '"'. Returns the index
// one past the closing quote, or npos when unterminated.
std::size_t skip_string(std::string_view s, std::size_t i);

// Given s[open] == '{', returns the index of the matching '}' or npos.
// Inside braces the expression part (before a top-level '?') treats
// double quotes as string literals; branch text after '?' does not.
std::size_t matching_brace(std::string_view s, std::size_t open);

// Index where a `//` comment starts, or npos. `expression_line` marks
// VAR and `~` lines, where string literals may appear outside braces.
std::size_t comment_start(std::string_view line, bool expression_line);

// First '?' at brace depth 0 outside string literals, or npos.
std::size_t top_level_question(std::string_view s);

// First '|' at brace depth 0 (escapes skipped), or npos.
std::size_t top_level_bar(std::string_view s);

}  // namespace taleweaver::markup::detail
