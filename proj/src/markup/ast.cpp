#include "taleweaver/markup/ast.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <string_view>

namespace taleweaver::markup {

const char* to_string(UnaryOp op)
{
    return op == UnaryOp::Not ? "not" : "-";
}

const char* to_string(BinaryOp op)
{
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
    }
    return "?";
}

int precedence(BinaryOp op)
{
    switch (op) {
    case BinaryOp::Or: return 1;
    case BinaryOp::And: return 2;
    case BinaryOp::Eq:
    case BinaryOp::Ne:
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return 4;
    case BinaryOp::Add:
    case BinaryOp::Sub: return 5;
    case BinaryOp::Mul:
    case BinaryOp::Div: return 6;
    }
    return 0;
}

Expr make_int(std::int64_t v) { return Expr{IntLit{v}, {}}; }
Expr make_str(std::string v) { return Expr{StrLit{std::move(v)}, {}}; }
Expr make_bool(bool v) { return Expr{BoolLit{v}, {}}; }
Expr make_var(std::string name) { return Expr{VarRef{std::move(name)}, {}}; }

Expr make_unary(UnaryOp op, Expr operand)
{
    return Expr{Unary{op, Box<Expr>(std::move(operand))}, {}};
}

Expr make_binary(BinaryOp op, Expr lhs, Expr rhs)
{
    return Expr{Binary{op, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))}, {}};
}

int expr_height(const Expr& e)
{
    if (const auto* u = std::get_if<Unary>(&e.node)) {
        return 1 + expr_height(*u->operand);
    }
    if (const auto* b = std::get_if<Binary>(&e.node)) {
        return 1 + std::max(expr_height(*b->lhs), expr_height(*b->rhs));
    }
    return 1;
}

const char* tag_name(StyleTag::Kind kind)
{
    switch (kind) {
    case StyleTag::Kind::Color: return "color";
    case StyleTag::Kind::Bold: return "b";
    case StyleTag::Kind::Italic: return "i";
    case StyleTag::Kind::Align: return "align";
    }
    return "?";
}

const char* to_string(StyleTag::Align a)
{
    switch (a) {
    case StyleTag::Align::Left: return "left";
    case StyleTag::Align::Center: return "center";
    case StyleTag::Align::Right: return "right";
    }
    return "left";
}

std::string color_hex(std::uint32_t rgb)
{
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%06X", static_cast<unsigned>(rgb & 0xFFFFFF));
    return buf;
}

std::optional<std::string> StoryDocument::effective_start() const
{
    if (start_knot) {
        return start_knot;
    }
    if (!knots.empty()) {
        return knots.front().name;
    }
    return std::nullopt;
}

bool is_identifier(std::string_view s)
{
    if (s.empty()) {
        return false;
    }
    auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    if (!alpha(s[0])) {
        return false;
    }
    return std::all_of(s.begin() + 1, s.end(), [&](char c) { return alpha(c) || digit(c); });
}

bool is_keyword(std::string_view s)
{
    static constexpr std::array<std::string_view, 5> kKeywords{"and", "or", "not", "true", "false"};
    return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end();
}

}  // namespace taleweaver::markup
