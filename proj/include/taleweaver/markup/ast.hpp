#pragma once

// Syntax tree for `.tale` story sources.
//
// All node types are regular values. Structural equality (operator==)
// ignores source locations: SourceLoc compares equal to every other
// SourceLoc, so a re-parsed document equals the original even though its
// statements moved to different lines.

#include "taleweaver/util/box.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace taleweaver::markup {

struct SourceLoc {
    int line = 0;    // 1-based; 0 = unknown
    int column = 0;  // 1-based byte column

    friend bool operator==(const SourceLoc&, const SourceLoc&) { return true; }
};

// ---- Expressions -----------------------------------------------------------

enum class UnaryOp { Not, Negate };

enum class BinaryOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

struct Expr;

struct IntLit {
    std::int64_t value = 0;
    bool operator==(const IntLit&) const = default;
};

struct StrLit {
    std::string value;
    bool operator==(const StrLit&) const = default;
};

struct BoolLit {
    bool value = false;
    bool operator==(const BoolLit&) const = default;
};

struct VarRef {
    std::string name;
    bool operator==(const VarRef&) const = default;
};

struct Unary {
    UnaryOp op = UnaryOp::Not;
    Box<Expr> operand;
    bool operator==(const Unary&) const = default;
};

struct Binary {
    BinaryOp op = BinaryOp::Add;
    Box<Expr> lhs;
    Box<Expr> rhs;
    bool operator==(const Binary&) const = default;
};

struct Expr {
    std::variant<IntLit, StrLit, BoolLit, VarRef, Unary, Binary> node;
    SourceLoc loc;
    bool operator==(const Expr&) const = default;
};

const char* to_string(UnaryOp op);
const char* to_string(BinaryOp op);

// Binding strength, higher binds tighter: or=1 and=2 not=3 cmp=4 add=5 mul=6
// negate=7.
int precedence(BinaryOp op);

Expr make_int(std::int64_t v);
Expr make_str(std::string v);
Expr make_bool(bool v);
Expr make_var(std::string name);
Expr make_unary(UnaryOp op, Expr operand);
Expr make_binary(BinaryOp op, Expr lhs, Expr rhs);

// Height of the expression tree (a leaf has height 1).
int expr_height(const Expr& e);

// ---- Inline content --------------------------------------------------------

struct StyleTag {
    enum class Kind { Color, Bold, Italic, Align };
    enum class Align { Left, Center, Right };

    Kind kind = Kind::Bold;
    std::uint32_t rgb = 0;       // Color only
    Align align = Align::Left;   // Align only

    static StyleTag color(std::uint32_t rgb) { return {Kind::Color, rgb, Align::Left}; }
    static StyleTag bold() { return {Kind::Bold, 0, Align::Left}; }
    static StyleTag italic() { return {Kind::Italic, 0, Align::Left}; }
    static StyleTag aligned(Align a) { return {Kind::Align, 0, a}; }

    bool operator==(const StyleTag&) const = default;
};

const char* tag_name(StyleTag::Kind kind);  // "color", "b", "i", "align"
const char* to_string(StyleTag::Align a);   // "left", "center", "right"
std::string color_hex(std::uint32_t rgb);   // "#RRGGBB"

struct InlineContent;

struct PlainText {
    std::string text;
    bool operator==(const PlainText&) const = default;
};

struct Interpolation {
    Expr expr;
    bool operator==(const Interpolation&) const = default;
};

struct ConditionalText {
    Expr cond;
    Box<InlineContent> then_branch;
    std::optional<Box<InlineContent>> else_branch;
    bool operator==(const ConditionalText&) const = default;
};

struct StyledSpan {
    StyleTag style;
    Box<InlineContent> children;
    bool operator==(const StyledSpan&) const = default;
};

using Span = std::variant<PlainText, Interpolation, ConditionalText, StyledSpan>;

struct InlineContent {
    std::vector<Span> spans;
    bool operator==(const InlineContent&) const = default;
    bool empty() const { return spans.empty(); }
};

// ---- Statements and documents ----------------------------------------------

inline constexpr const char* kEndTarget = "END";

struct Paragraph {
    InlineContent content;
    bool operator==(const Paragraph&) const = default;
};

struct Divert {
    std::string target;  // identifier or "END"
    bool operator==(const Divert&) const = default;
};

struct Choice {
    std::optional<Expr> guard;
    std::string label;
    std::optional<InlineContent> appended;
    std::string target;
    bool operator==(const Choice&) const = default;
};

struct Assign {
    std::string name;
    Expr value;
    bool operator==(const Assign&) const = default;
};

struct TagLine {
    std::string text;
    bool operator==(const TagLine&) const = default;
};

struct Statement {
    std::variant<Paragraph, Divert, Choice, Assign, TagLine> node;
    SourceLoc loc;
    bool operator==(const Statement&) const = default;
};

struct Knot {
    std::string name;
    std::vector<Statement> statements;
    std::vector<std::string> tags;  // from the header line: `== name #a #b`
    SourceLoc loc;
    bool operator==(const Knot&) const = default;
};

// Literal initial value of a VAR declaration.
using Literal = std::variant<std::int64_t, std::string, bool>;

struct VarDecl {
    std::string name;
    Literal value;
    SourceLoc loc;
    bool operator==(const VarDecl&) const = default;
};

struct StoryDocument {
    std::optional<std::string> title;
    // Explicit `@start`; when absent the first knot starts the story.
    std::optional<std::string> start_knot;
    std::vector<VarDecl> var_decls;
    std::vector<Knot> knots;

    bool operator==(const StoryDocument&) const = default;

    // Start knot name as the runtime sees it (explicit or first knot).
    std::optional<std::string> effective_start() const;
};

bool is_identifier(std::string_view s);
bool is_keyword(std::string_view s);

}  // namespace taleweaver::markup
