#include "taleweaver/markup/printer.hpp"

namespace taleweaver::markup {

namespace {

std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Binding strength of an expression's top-level operator.
int strength(const Expr& e)
{
    if (const auto* b = std::get_if<Binary>(&e.node)) {
        return precedence(b->op);
    }
    if (const auto* u = std::get_if<Unary>(&e.node)) {
        return u->op == UnaryOp::Not ? 3 : 7;
    }
    return 8;
}

void print_expr_to(std::string& out, const Expr& e);

void print_operand(std::string& out, const Expr& e, bool parens)
{
    if (parens) {
        out.push_back('(');
        print_expr_to(out, e);
        out.push_back(')');
    } else {
        print_expr_to(out, e);
    }
}

void print_expr_to(std::string& out, const Expr& e)
{
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, IntLit>) {
                // Negative literals only come from hand-built trees.
                if (n.value < 0) {
                    out += "(" + std::to_string(n.value) + ")";
                } else {
                    out += std::to_string(n.value);
                }
            } else if constexpr (std::is_same_v<T, StrLit>) {
                out += quote(n.value);
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                out += n.value ? "true" : "false";
            } else if constexpr (std::is_same_v<T, VarRef>) {
                out += n.name;
            } else if constexpr (std::is_same_v<T, Unary>) {
                const int mine = n.op == UnaryOp::Not ? 3 : 7;
                out += n.op == UnaryOp::Not ? "not " : "-";
                print_operand(out, *n.operand, strength(*n.operand) < mine);
            } else {
                const int mine = precedence(n.op);
                print_operand(out, *n.lhs, strength(*n.lhs) < mine);
                out.push_back(' ');
                out += to_string(n.op);
                out.push_back(' ');
                // Left-associative: an equal-strength right operand needs parens.
                print_operand(out, *n.rhs, strength(*n.rhs) <= mine);
            }
        },
        e.node);
}

void print_text(std::string& out, std::string_view text)
{
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        switch (c) {
        case '\\':
        case '{':
        case '}':
        case '<':
        case '*':
        case '~':
            out.push_back('\\');
            out.push_back(c);
            break;
        case '/':
            if (i + 1 < text.size() && text[i + 1] == '/') {
                out.push_back('\\');
            }
            out.push_back(c);
            break;
        default:
            out.push_back(c);
        }
    }
}

void print_inline_to(std::string& out, const InlineContent& content);

void print_style_open(std::string& out, const StyleTag& tag)
{
    switch (tag.kind) {
    case StyleTag::Kind::Color:
        out += "<color=" + color_hex(tag.rgb) + ">";
        break;
    case StyleTag::Kind::Bold:
        out += "<b>";
        break;
    case StyleTag::Kind::Italic:
        out += "<i>";
        break;
    case StyleTag::Kind::Align:
        out += std::string("<align=") + to_string(tag.align) + ">";
        break;
    }
}

void print_inline_to(std::string& out, const InlineContent& content)
{
    for (const Span& span : content.spans) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, PlainText>) {
                    print_text(out, s.text);
                } else if constexpr (std::is_same_v<T, Interpolation>) {
                    out.push_back('{');
                    print_expr_to(out, s.expr);
                    out.push_back('}');
                } else if constexpr (std::is_same_v<T, ConditionalText>) {
                    out.push_back('{');
                    print_expr_to(out, s.cond);
                    out += " ? ";
                    print_inline_to(out, *s.then_branch);
                    if (s.else_branch) {
                        out += " | ";
                        print_inline_to(out, **s.else_branch);
                    }
                    out.push_back('}');
                } else {
                    print_style_open(out, s.style);
                    print_inline_to(out, *s.children);
                    out += std::string("</") + tag_name(s.style.kind) + ">";
                }
            },
            span);
    }
}

void print_statement(std::string& out, const Statement& st)
{
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Paragraph>) {
                print_inline_to(out, s.content);
            } else if constexpr (std::is_same_v<T, Divert>) {
                out += "-> " + s.target;
            } else if constexpr (std::is_same_v<T, Choice>) {
                out += "* ";
                if (s.guard) {
                    out += "{" + print_expr(*s.guard) + "} ";
                }
                out += s.label;
                if (s.appended) {
                    out += " [";
                    print_inline_to(out, *s.appended);
                    out += "]";
                }
                out += " -> " + s.target;
            } else if constexpr (std::is_same_v<T, Assign>) {
                out += "~ " + s.name + " = " + print_expr(s.value);
            } else {
                out += "# " + s.text;
            }
        },
        st.node);
    out.push_back('\n');
}

}  // namespace

std::string print_expr(const Expr& e)
{
    std::string out;
    print_expr_to(out, e);
    return out;
}

std::string print_inline(const InlineContent& content)
{
    std::string out;
    print_inline_to(out, content);
    return out;
}

std::string print_literal(const Literal& lit)
{
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(v);
            } else if constexpr (std::is_same_v<T, std::string>) {
                return quote(v);
            } else {
                return v ? "true" : "false";
            }
        },
        lit);
}

std::string print_story(const StoryDocument& doc)
{
    std::string out;
    if (doc.title) {
        out += "@title " + *doc.title + "\n";
    }
    if (doc.start_knot) {
        out += "@start " + *doc.start_knot + "\n";
    }
    for (const VarDecl& v : doc.var_decls) {
        out += "VAR " + v.name + " = " + print_literal(v.value) + "\n";
    }
    bool first = out.empty();
    for (const Knot& knot : doc.knots) {
        if (!first) {
            out.push_back('\n');
        }
        first = false;
        out += "== " + knot.name;
        for (const std::string& tag : knot.tags) {
            out += " #" + tag;
        }
        out.push_back('\n');
        for (std::size_t i = 0; i < knot.statements.size(); ++i) {
            const Statement& st = knot.statements[i];
            print_statement(out, st);
            // Adjacent paragraphs need a blank line or they would merge.
            if (std::holds_alternative<Paragraph>(st.node) && i + 1 < knot.statements.size() &&
                std::holds_alternative<Paragraph>(knot.statements[i + 1].node)) {
                out.push_back('\n');
            }
        }
    }
    return out;
}

}  // namespace taleweaver::markup
