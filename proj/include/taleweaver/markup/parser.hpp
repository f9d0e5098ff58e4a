#pragma once

#include "taleweaver/markup/ast.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace taleweaver::markup {

enum class ParseErrorCode {
    InvalidUtf8,
    UnknownLineForm,
    BadKnotName,
    DuplicateKnot,
    DuplicateVariable,
    DuplicateDirective,
    DirectiveAfterKnot,
    ContentOutsideKnot,
    ChoiceMissingTarget,
    EmptyChoiceLabel,
    BadDivert,
    BadAssignment,
    BadVarDecl,
    EmptyTag,
    UnterminatedString,
    BadEscape,
    UnbalancedBrace,
    UnbalancedStyleTag,
    BadStyleTag,
    BadColorLiteral,
    AlignNotOutermost,
    UnexpectedToken,
    UnbalancedParen,
    EmptyExpression,
    IntOverflow,
    NestingTooDeep,
};

const char* to_string(ParseErrorCode code);

struct ParseError {
    int line = 1;
    int column = 1;
    std::string message;
    ParseErrorCode code = ParseErrorCode::UnknownLineForm;
};

// "line:col: code: message"
std::string format(const ParseError& e);

inline constexpr int kMaxNesting = 32;

using ParseResult = std::variant<StoryDocument, std::vector<ParseError>>;
using ExprResult = std::variant<Expr, ParseError>;

// CRLF is normalized to LF before parsing. Errors recover at the next knot
// header, so a single call can report problems in several knots.
ParseResult parse_story(std::string_view source);

ExprResult parse_expression(std::string_view text);

}  // namespace taleweaver::markup
