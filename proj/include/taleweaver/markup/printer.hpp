#pragma once

#include "taleweaver/markup/ast.hpp"

#include <string>

namespace taleweaver::markup {

// Canonical `.tale` text. parse_story(print_story(d)) == d for every parsed d.
std::string print_story(const StoryDocument& doc);

// Canonical expression text with the minimum parentheses needed.
std::string print_expr(const Expr& e);

// Inline content as it appears in source (escapes and tags restored).
std::string print_inline(const InlineContent& content);

std::string print_literal(const Literal& lit);

}  // namespace taleweaver::markup
