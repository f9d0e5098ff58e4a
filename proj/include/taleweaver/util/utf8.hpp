#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taleweaver::utf8 {

// Offset of the first byte that does not start a well-formed UTF-8 sequence,
// or nullopt when the whole input is valid.
std::optional<std::size_t> first_invalid(std::string_view text);

// Decodes valid UTF-8 into code points. Invalid bytes decode as U+FFFD.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view cps);
void append(std::string& out, char32_t cp);

// Number of code points in valid UTF-8.
std::size_t length(std::string_view text);

bool is_space(char32_t cp);

}  // namespace taleweaver::utf8
