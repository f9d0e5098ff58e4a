#include "taleweaver/markup/parser.hpp"

#include "scan.hpp"
#include "taleweaver/util/utf8.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace taleweaver::markup {

using detail::npos;
using detail::trim;

const char* to_string(ParseErrorCode code)
{
    switch (code) {
    case ParseErrorCode::InvalidUtf8: return "invalid_utf8";
    case ParseErrorCode::UnknownLineForm: return "unknown_line_form";
    case ParseErrorCode::BadKnotName: return "bad_knot_name";
    case ParseErrorCode::DuplicateKnot: return "duplicate_knot";
    case ParseErrorCode::DuplicateVariable: return "duplicate_variable";
    case ParseErrorCode::DuplicateDirective: return "duplicate_directive";
    case ParseErrorCode::DirectiveAfterKnot: return "directive_after_knot";
    case ParseErrorCode::ContentOutsideKnot: return "content_outside_knot";
    case ParseErrorCode::ChoiceMissingTarget: return "choice_missing_target";
    case ParseErrorCode::EmptyChoiceLabel: return "empty_choice_label";
    case ParseErrorCode::BadDivert: return "bad_divert";
    case ParseErrorCode::BadAssignment: return "bad_assignment";
    case ParseErrorCode::BadVarDecl: return "bad_var_decl";
    case ParseErrorCode::EmptyTag: return "empty_tag";
    case ParseErrorCode::UnterminatedString: return "unterminated_string";
    case ParseErrorCode::BadEscape: return "bad_escape";
    case ParseErrorCode::UnbalancedBrace: return "unbalanced_brace";
    case ParseErrorCode::UnbalancedStyleTag: return "unbalanced_style_tag";
    case ParseErrorCode::BadStyleTag: return "bad_style_tag";
    case ParseErrorCode::BadColorLiteral: return "bad_color_literal";
    case ParseErrorCode::AlignNotOutermost: return "align_not_outermost";
    case ParseErrorCode::UnexpectedToken: return "unexpected_token";
    case ParseErrorCode::UnbalancedParen: return "unbalanced_paren";
    case ParseErrorCode::EmptyExpression: return "empty_expression";
    case ParseErrorCode::IntOverflow: return "int_overflow";
    case ParseErrorCode::NestingTooDeep: return "nesting_too_deep";
    }
    return "unknown";
}

std::string format(const ParseError& e)
{
    return std::to_string(e.line) + ":" + std::to_string(e.column) + ": " + to_string(e.code) + ": " +
           e.message;
}

namespace {

struct Failure {
    ParseError error;
};

// Maps offsets in a (possibly multi-line, joined) text back to source.
class Origin {
public:
    struct Segment {
        std::size_t start;
        int line;
        int column;
    };

    Origin() = default;
    Origin(int line, int column) { segments_.push_back({0, line, column}); }

    void add(std::size_t start, int line, int column) { segments_.push_back({start, line, column}); }

    SourceLoc at(std::size_t offset) const
    {
        auto it = std::upper_bound(segments_.begin(), segments_.end(), offset,
                                   [](std::size_t off, const Segment& s) { return off < s.start; });
        if (it == segments_.begin()) {
            return {1, 1};
        }
        --it;
        return {it->line, it->column + static_cast<int>(offset - it->start)};
    }

private:
    std::vector<Segment> segments_;
};

[[noreturn]] void fail(const Origin& origin, std::size_t offset, ParseErrorCode code, std::string message)
{
    const SourceLoc loc = origin.at(offset);
    throw Failure{ParseError{loc.line, loc.column, std::move(message), code}};
}

// Unescapes the body of a string literal; `s` excludes the quotes.
std::string unescape_string(std::string_view s, const Origin& origin, std::size_t base)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\') {
            if (i + 1 < s.size() && (s[i + 1] == '"' || s[i + 1] == '\\')) {
                out.push_back(s[++i]);
                continue;
            }
            fail(origin, base + i, ParseErrorCode::BadEscape, "only \\\" and \\\\ are valid in strings");
        }
        out.push_back(s[i]);
    }
    return out;
}

// ---- Expressions -----------------------------------------------------------

class ExprParser {
public:
    ExprParser(std::string_view text, std::size_t base, const Origin& origin)
        : text_(text), base_(base), origin_(origin)
    {
    }

    Expr parse()
    {
        tokenize();
        if (tokens_.size() == 1) {
            fail(origin_, base_ + text_.size(), ParseErrorCode::EmptyExpression, "expected an expression");
        }
        Expr e = parse_or();
        const Token& t = peek();
        if (t.kind == Token::RParen) {
            fail(origin_, base_ + t.pos, ParseErrorCode::UnbalancedParen, "unmatched ')'");
        }
        if (t.kind != Token::End) {
            fail(origin_, base_ + t.pos, ParseErrorCode::UnexpectedToken, "unexpected '" + t.text + "'");
        }
        if (expr_height(e) > kMaxNesting) {
            fail(origin_, base_, ParseErrorCode::NestingTooDeep, "expression nests deeper than 32 levels");
        }
        return e;
    }

private:
    struct Token {
        enum Kind { Int, Str, Ident, Op, LParen, RParen, End } kind;
        std::string text;
        std::int64_t ival = 0;
        std::size_t pos = 0;
    };

    void tokenize()
    {
        std::size_t i = 0;
        const auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
        const auto digit = [](char c) { return c >= '0' && c <= '9'; };
        while (i < text_.size()) {
            const char c = text_[i];
            if (c == ' ' || c == '\t') {
                ++i;
                continue;
            }
            const std::size_t start = i;
            if (digit(c)) {
                while (i < text_.size() && digit(text_[i])) {
                    ++i;
                }
                if (i < text_.size() && alpha(text_[i])) {
                    fail(origin_, base_ + i, ParseErrorCode::UnexpectedToken, "malformed number");
                }
                std::int64_t v = 0;
                const auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + i, v);
                if (ec != std::errc{}) {
                    fail(origin_, base_ + start, ParseErrorCode::IntOverflow, "integer literal out of 64-bit range");
                }
                tokens_.push_back({Token::Int, std::string(text_.substr(start, i - start)), v, start});
                continue;
            }
            if (alpha(c)) {
                while (i < text_.size() && (alpha(text_[i]) || digit(text_[i]))) {
                    ++i;
                }
                tokens_.push_back({Token::Ident, std::string(text_.substr(start, i - start)), 0, start});
                continue;
            }
            if (c == '"') {
                const std::size_t end = detail::skip_string(text_, i);
                if (end == npos) {
                    fail(origin_, base_ + start, ParseErrorCode::UnterminatedString, "unterminated string literal");
                }
                std::string value = unescape_string(text_.substr(i + 1, end - i - 2), origin_, base_ + i + 1);
                tokens_.push_back({Token::Str, std::move(value), 0, start});
                i = end;
                continue;
            }
            if (c == '(' || c == ')') {
                tokens_.push_back({c == '(' ? Token::LParen : Token::RParen, std::string(1, c), 0, start});
                ++i;
                continue;
            }
            const std::string_view two = text_.substr(i, 2);
            if (two == "==" || two == "!=" || two == "<=" || two == ">=") {
                tokens_.push_back({Token::Op, std::string(two), 0, start});
                i += 2;
                continue;
            }
            if (c == '<' || c == '>' || c == '+' || c == '-' || c == '*' || c == '/') {
                tokens_.push_back({Token::Op, std::string(1, c), 0, start});
                ++i;
                continue;
            }
            fail(origin_, base_ + i, ParseErrorCode::UnexpectedToken,
                 std::string("unexpected character '") + c + "'");
        }
        tokens_.push_back({Token::End, "end of expression", 0, text_.size()});
    }

    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() { return tokens_[pos_++]; }

    bool peek_ident(std::string_view word) const
    {
        return peek().kind == Token::Ident && peek().text == word;
    }

    bool peek_op(std::string_view op) const { return peek().kind == Token::Op && peek().text == op; }

    SourceLoc loc_of(const Token& t) const { return origin_.at(base_ + t.pos); }

    void enter(const Token& at)
    {
        if (++depth_ > kMaxNesting) {
            fail(origin_, base_ + at.pos, ParseErrorCode::NestingTooDeep, "expression nests deeper than 32 levels");
        }
    }

    Expr binary(BinaryOp op, Expr lhs, Expr rhs)
    {
        SourceLoc loc = lhs.loc;
        Expr e = make_binary(op, std::move(lhs), std::move(rhs));
        e.loc = loc;
        return e;
    }

    Expr parse_or()
    {
        Expr lhs = parse_and();
        while (peek_ident("or")) {
            next();
            lhs = binary(BinaryOp::Or, std::move(lhs), parse_and());
        }
        return lhs;
    }

    Expr parse_and()
    {
        Expr lhs = parse_not();
        while (peek_ident("and")) {
            next();
            lhs = binary(BinaryOp::And, std::move(lhs), parse_not());
        }
        return lhs;
    }

    Expr parse_not()
    {
        if (peek_ident("not")) {
            const Token& t = next();
            enter(t);
            Expr e = make_unary(UnaryOp::Not, parse_not());
            --depth_;
            e.loc = loc_of(t);
            return e;
        }
        return parse_cmp();
    }

    Expr parse_cmp()
    {
        Expr lhs = parse_add();
        for (;;) {
            std::optional<BinaryOp> op;
            if (peek_op("==")) op = BinaryOp::Eq;
            else if (peek_op("!=")) op = BinaryOp::Ne;
            else if (peek_op("<")) op = BinaryOp::Lt;
            else if (peek_op("<=")) op = BinaryOp::Le;
            else if (peek_op(">")) op = BinaryOp::Gt;
            else if (peek_op(">=")) op = BinaryOp::Ge;
            if (!op) {
                return lhs;
            }
            next();
            lhs = binary(*op, std::move(lhs), parse_add());
        }
    }

    Expr parse_add()
    {
        Expr lhs = parse_mul();
        while (peek_op("+") || peek_op("-")) {
            const BinaryOp op = next().text == "+" ? BinaryOp::Add : BinaryOp::Sub;
            lhs = binary(op, std::move(lhs), parse_mul());
        }
        return lhs;
    }

    Expr parse_mul()
    {
        Expr lhs = parse_unary();
        while (peek_op("*") || peek_op("/")) {
            const BinaryOp op = next().text == "*" ? BinaryOp::Mul : BinaryOp::Div;
            lhs = binary(op, std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Expr parse_unary()
    {
        if (peek_op("-")) {
            const Token& t = next();
            enter(t);
            Expr e = make_unary(UnaryOp::Negate, parse_unary());
            --depth_;
            e.loc = loc_of(t);
            return e;
        }
        return parse_primary();
    }

    Expr parse_primary()
    {
        const Token& t = next();
        Expr e;
        switch (t.kind) {
        case Token::Int:
            e = make_int(t.ival);
            break;
        case Token::Str:
            e = make_str(t.text);
            break;
        case Token::Ident:
            if (t.text == "true" || t.text == "false") {
                e = make_bool(t.text == "true");
            } else if (is_keyword(t.text)) {
                fail(origin_, base_ + t.pos, ParseErrorCode::UnexpectedToken, "unexpected keyword '" + t.text + "'");
            } else {
                e = make_var(t.text);
            }
            break;
        case Token::LParen: {
            enter(t);
            ++open_parens_;
            e = parse_or();
            if (peek().kind != Token::RParen) {
                const Token& bad = peek();
                if (bad.kind == Token::End) {
                    fail(origin_, base_ + bad.pos, ParseErrorCode::UnbalancedParen, "missing ')'");
                }
                fail(origin_, base_ + bad.pos, ParseErrorCode::UnexpectedToken, "expected ')' before '" + bad.text + "'");
            }
            next();
            --open_parens_;
            --depth_;
            break;
        }
        case Token::RParen:
            fail(origin_, base_ + t.pos, ParseErrorCode::UnbalancedParen, "unmatched ')'");
        case Token::End:
            fail(origin_, base_ + t.pos, open_parens_ > 0 ? ParseErrorCode::UnbalancedParen : ParseErrorCode::UnexpectedToken,
                 open_parens_ > 0 ? "missing ')'" : "expression ends early");
        case Token::Op:
            fail(origin_, base_ + t.pos, ParseErrorCode::UnexpectedToken, "unexpected '" + t.text + "'");
        }
        e.loc = loc_of(t);
        return e;
    }

    std::string_view text_;
    std::size_t base_;
    const Origin& origin_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    int depth_ = 0;
    int open_parens_ = 0;
};

Expr parse_expr_at(std::string_view text, std::size_t base, const Origin& origin)
{
    return ExprParser(text, base, origin).parse();
}

// ---- Inline content --------------------------------------------------------

bool valid_escape(char c)
{
    return c == '{' || c == '}' || c == '*' || c == '~' || c == '<' || c == '\\' || c == '/';
}

class InlineParser {
public:
    InlineParser(std::string_view text, std::size_t base, const Origin& origin, int depth)
        : text_(text), base_(base), origin_(origin), depth_(depth)
    {
    }

    // `paragraph_root` allows a single align span wrapping the whole content.
    InlineContent parse(bool paragraph_root)
    {
        InlineContent content = parse_seq(std::nullopt, depth_);
        check_alignment(content, paragraph_root);
        return content;
    }

private:
    void check_alignment(const InlineContent& content, bool paragraph_root)
    {
        for (std::size_t i = 0; i < content.spans.size(); ++i) {
            const auto* styled = std::get_if<StyledSpan>(&content.spans[i]);
            if (styled && styled->style.kind == StyleTag::Kind::Align) {
                if (!paragraph_root || content.spans.size() != 1) {
                    fail(origin_, base_, ParseErrorCode::AlignNotOutermost,
                         "<align> must wrap the whole paragraph");
                }
            }
        }
        for (const Span& span : content.spans) {
            if (const auto* styled = std::get_if<StyledSpan>(&span)) {
                check_alignment(*styled->children, false);
            }
            // Conditional branches were checked when they were parsed.
        }
    }

    static void push_text(InlineContent& content, std::string& buf)
    {
        if (buf.empty()) {
            return;
        }
        if (!content.spans.empty()) {
            if (auto* prev = std::get_if<PlainText>(&content.spans.back())) {
                prev->text += buf;
                buf.clear();
                return;
            }
        }
        content.spans.emplace_back(PlainText{std::move(buf)});
        buf.clear();
    }

    InlineContent parse_seq(std::optional<StyleTag::Kind> closing, int depth)
    {
        InlineContent content;
        std::string buf;
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '\\') {
                if (pos_ + 1 >= text_.size() || !valid_escape(text_[pos_ + 1])) {
                    fail(origin_, base_ + pos_, ParseErrorCode::BadEscape, "invalid escape sequence");
                }
                buf.push_back(text_[pos_ + 1]);
                pos_ += 2;
                continue;
            }
            if (c == '}') {
                fail(origin_, base_ + pos_, ParseErrorCode::UnbalancedBrace, "unmatched '}'");
            }
            if (c == '{') {
                push_text(content, buf);
                content.spans.push_back(parse_brace(depth));
                continue;
            }
            if (c == '<') {
                if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
                    const std::size_t at = pos_;
                    const StyleTag::Kind kind = parse_close_tag();
                    if (!closing || *closing != kind) {
                        fail(origin_, base_ + at, ParseErrorCode::UnbalancedStyleTag,
                             std::string("unexpected </") + tag_name(kind) + ">");
                    }
                    push_text(content, buf);
                    return content;
                }
                push_text(content, buf);
                const std::size_t at = pos_;
                const StyleTag style = parse_open_tag();
                if (depth + 1 > kMaxNesting) {
                    fail(origin_, base_ + at, ParseErrorCode::NestingTooDeep, "style tags nest deeper than 32 levels");
                }
                InlineContent children = parse_seq(style.kind, depth + 1);
                content.spans.emplace_back(StyledSpan{style, Box<InlineContent>(std::move(children))});
                continue;
            }
            buf.push_back(c);
            ++pos_;
        }
        if (closing) {
            fail(origin_, base_ + text_.size(), ParseErrorCode::UnbalancedStyleTag,
                 std::string("missing </") + tag_name(*closing) + ">");
        }
        push_text(content, buf);
        return content;
    }

    std::size_t tag_end(std::size_t at)
    {
        const std::size_t close = text_.find('>', at);
        if (close == npos) {
            fail(origin_, base_ + at, ParseErrorCode::BadStyleTag, "unterminated style tag (use \\< for a literal '<')");
        }
        return close;
    }

    StyleTag::Kind parse_close_tag()
    {
        const std::size_t at = pos_;
        const std::size_t close = tag_end(at);
        const std::string_view name = text_.substr(at + 2, close - at - 2);
        pos_ = close + 1;
        if (name == "b") return StyleTag::Kind::Bold;
        if (name == "i") return StyleTag::Kind::Italic;
        if (name == "color") return StyleTag::Kind::Color;
        if (name == "align") return StyleTag::Kind::Align;
        fail(origin_, base_ + at, ParseErrorCode::BadStyleTag, "unknown closing tag '</" + std::string(name) + ">'");
    }

    StyleTag parse_open_tag()
    {
        const std::size_t at = pos_;
        const std::size_t close = tag_end(at);
        const std::string_view body = text_.substr(at + 1, close - at - 1);
        pos_ = close + 1;
        if (body == "b") {
            return StyleTag::bold();
        }
        if (body == "i") {
            return StyleTag::italic();
        }
        if (body.starts_with("color=")) {
            const std::string_view value = body.substr(6);
            const bool ok = value.size() == 7 && value[0] == '#' &&
                            std::all_of(value.begin() + 1, value.end(), [](char ch) {
                                return (ch >= '0' && ch <= '9') || (ch >= 'a' && ch <= 'f') || (ch >= 'A' && ch <= 'F');
                            });
            if (!ok) {
                fail(origin_, base_ + at + 7, ParseErrorCode::BadColorLiteral,
                     "color must be #RRGGBB, got '" + std::string(value) + "'");
            }
            std::uint32_t rgb = 0;
            std::from_chars(value.data() + 1, value.data() + 7, rgb, 16);
            return StyleTag::color(rgb);
        }
        if (body.starts_with("align=")) {
            const std::string_view value = body.substr(6);
            if (value == "left") return StyleTag::aligned(StyleTag::Align::Left);
            if (value == "center") return StyleTag::aligned(StyleTag::Align::Center);
            if (value == "right") return StyleTag::aligned(StyleTag::Align::Right);
            fail(origin_, base_ + at + 7, ParseErrorCode::BadStyleTag, "align must be left, center or right");
        }
        fail(origin_, base_ + at, ParseErrorCode::BadStyleTag, "unknown style tag '<" + std::string(body) + ">'");
    }

    Span parse_brace(int depth)
    {
        const std::size_t open = pos_;
        const std::size_t close = detail::matching_brace(text_, open);
        if (close == npos) {
            fail(origin_, base_ + open, ParseErrorCode::UnbalancedBrace, "unmatched '{'");
        }
        pos_ = close + 1;
        const std::string_view inner = text_.substr(open + 1, close - open - 1);
        const std::size_t inner_base = base_ + open + 1;

        const std::size_t q = detail::top_level_question(inner);
        if (q == npos) {
            return Interpolation{parse_expr_at(inner, inner_base, origin_)};
        }
        if (depth + 1 > kMaxNesting) {
            fail(origin_, base_ + open, ParseErrorCode::NestingTooDeep, "conditional text nests deeper than 32 levels");
        }
        ConditionalText cond;
        cond.cond = parse_expr_at(inner.substr(0, q), inner_base, origin_);
        const std::string_view rest = inner.substr(q + 1);
        const std::size_t bar = detail::top_level_bar(rest);
        const std::string_view then_raw = bar == npos ? rest : rest.substr(0, bar);
        cond.then_branch = parse_branch(then_raw, inner_base + q + 1, depth + 1);
        if (bar != npos) {
            cond.else_branch = parse_branch(rest.substr(bar + 1), inner_base + q + 1 + bar + 1, depth + 1);
        }
        return cond;
    }

    Box<InlineContent> parse_branch(std::string_view raw, std::size_t raw_base, int depth)
    {
        const std::string_view trimmed = trim(raw);
        const std::size_t lead = trimmed.empty() ? 0 : static_cast<std::size_t>(trimmed.data() - raw.data());
        InlineParser sub(trimmed, raw_base + lead, origin_, depth);
        return Box<InlineContent>(sub.parse(false));
    }

    std::string_view text_;
    std::size_t base_;
    const Origin& origin_;
    int depth_;
    std::size_t pos_ = 0;
};

// ---- Line-level parser -----------------------------------------------------

struct Line {
    int number = 0;
    std::string_view code;  // comment stripped and trimmed
    int column = 1;         // 1-based column of code[0]
    bool raw_blank = false;
};

class StoryParser {
public:
    explicit StoryParser(std::string_view source) : source_(source) {}

    ParseResult run()
    {
        if (const auto bad = utf8::first_invalid(source_)) {
            const std::size_t nl = source_.rfind('\n', *bad);
            const std::size_t col0 = nl == npos ? *bad : *bad - nl - 1;
            const int line = 1 + static_cast<int>(std::count(source_.begin(), source_.begin() + static_cast<std::ptrdiff_t>(*bad), '\n'));
            return std::vector<ParseError>{
                ParseError{line, static_cast<int>(col0) + 1, "source is not valid UTF-8", ParseErrorCode::InvalidUtf8}};
        }
        split_lines();
        for (const Line& line : lines_) {
            try {
                handle(line);
            } catch (const Failure& f) {
                errors_.push_back(f.error);
                paragraph_.clear();
                skipping_ = true;
            }
        }
        try {
            flush_paragraph();
        } catch (const Failure& f) {
            errors_.push_back(f.error);
        }
        if (!errors_.empty()) {
            return errors_;
        }
        return std::move(doc_);
    }

private:
    void split_lines()
    {
        std::size_t start = 0;
        int number = 1;
        while (start <= source_.size()) {
            std::size_t end = source_.find('\n', start);
            if (end == npos) {
                end = source_.size();
            }
            const std::string_view raw = std::string_view(source_).substr(start, end - start);
            if (!(end == source_.size() && raw.empty() && number > 1)) {
                lines_.push_back(make_line(raw, number));
            }
            if (end == source_.size()) {
                break;
            }
            start = end + 1;
            ++number;
        }
    }

    static Line make_line(std::string_view raw, int number)
    {
        Line line;
        line.number = number;
        line.raw_blank = detail::is_blank(raw);
        const std::string_view lead_trimmed = trim(raw);
        const bool expression_line =
            lead_trimmed.starts_with("~") || (lead_trimmed.starts_with("VAR") &&
                                              (lead_trimmed.size() == 3 || lead_trimmed[3] == ' ' || lead_trimmed[3] == '\t'));
        std::string_view code = raw;
        const std::size_t comment = detail::comment_start(raw, expression_line);
        if (comment != npos) {
            code = raw.substr(0, comment);
        }
        const std::string_view trimmed = trim(code);
        line.code = trimmed;
        line.column = trimmed.empty() ? 1 : static_cast<int>(trimmed.data() - raw.data()) + 1;
        return line;
    }

    static bool is_var_line(std::string_view code)
    {
        return code.starts_with("VAR") && (code.size() == 3 || code[3] == ' ' || code[3] == '\t');
    }

    [[noreturn]] static void fail_line(const Line& line, std::size_t offset, ParseErrorCode code, std::string msg)
    {
        throw Failure{ParseError{line.number, line.column + static_cast<int>(offset), std::move(msg), code}};
    }

    void handle(const Line& line)
    {
        if (line.code.empty()) {
            if (line.raw_blank && !skipping_) {
                flush_paragraph();
            }
            return;
        }
        const std::string_view code = line.code;
        if (code.starts_with("==")) {
            if (!skipping_) {
                try {
                    flush_paragraph();
                } catch (const Failure& f) {
                    errors_.push_back(f.error);
                }
            }
            paragraph_.clear();
            skipping_ = false;
            knot_header(line);
            return;
        }
        if (skipping_) {
            return;
        }
        const bool paragraph_line = !(code.starts_with("@") || is_var_line(code) || code.starts_with("->") ||
                                      code.starts_with("*") || code.starts_with("~") || code.starts_with("#"));
        if (!paragraph_line) {
            flush_paragraph();
        }
        if (code.starts_with("@")) {
            directive(line);
            return;
        }
        if (is_var_line(code)) {
            var_decl(line);
            return;
        }
        if (current_ == nullptr) {
            fail_line(line, 0, ParseErrorCode::ContentOutsideKnot, "story content must follow a knot header (== name)");
        }
        if (code.starts_with("->")) {
            divert(line);
        } else if (code.starts_with("*")) {
            choice(line);
        } else if (code.starts_with("~")) {
            assign(line);
        } else if (code.starts_with("#")) {
            tag(line);
        } else {
            paragraph_.push_back(&line);
        }
    }

    void knot_header(const Line& line)
    {
        current_ = nullptr;
        const std::string_view rest = line.code.substr(2);
        const std::size_t hash = rest.find('#');
        const std::string_view name = trim(rest.substr(0, hash));
        if (!is_identifier(name) || name == kEndTarget) {
            fail_line(line, 2, ParseErrorCode::BadKnotName, "invalid knot name '" + std::string(name) + "'");
        }
        if (!knot_names_.insert(std::string(name)).second) {
            fail_line(line, 2, ParseErrorCode::DuplicateKnot, "knot '" + std::string(name) + "' is already defined");
        }
        Knot knot;
        knot.name = std::string(name);
        knot.loc = {line.number, line.column};
        if (hash != npos) {
            std::string_view tags = rest.substr(hash + 1);
            for (;;) {
                const std::size_t next = tags.find('#');
                const std::string_view tag = trim(tags.substr(0, next));
                if (tag.empty()) {
                    fail_line(line, 0, ParseErrorCode::EmptyTag, "empty knot tag");
                }
                knot.tags.emplace_back(tag);
                if (next == npos) {
                    break;
                }
                tags = tags.substr(next + 1);
            }
        }
        doc_.knots.push_back(std::move(knot));
        current_ = &doc_.knots.back();
    }

    void directive(const Line& line)
    {
        if (!doc_.knots.empty()) {
            fail_line(line, 0, ParseErrorCode::DirectiveAfterKnot, "@ directives must come before the first knot");
        }
        const std::string_view code = line.code;
        std::size_t word_end = 1;
        while (word_end < code.size() && code[word_end] != ' ' && code[word_end] != '\t') {
            ++word_end;
        }
        const std::string_view word = code.substr(1, word_end - 1);
        const std::string_view arg = trim(code.substr(word_end));
        if (word == "title") {
            if (doc_.title) {
                fail_line(line, 0, ParseErrorCode::DuplicateDirective, "@title given twice");
            }
            if (arg.empty()) {
                fail_line(line, word_end, ParseErrorCode::UnknownLineForm, "@title needs text");
            }
            doc_.title = std::string(arg);
        } else if (word == "start") {
            if (doc_.start_knot) {
                fail_line(line, 0, ParseErrorCode::DuplicateDirective, "@start given twice");
            }
            if (!is_identifier(arg) || arg == kEndTarget) {
                fail_line(line, word_end, ParseErrorCode::BadKnotName, "@start needs a knot name");
            }
            doc_.start_knot = std::string(arg);
        } else {
            fail_line(line, 0, ParseErrorCode::UnknownLineForm, "unknown directive '@" + std::string(word) + "'");
        }
    }

    void var_decl(const Line& line)
    {
        const std::string_view rest = line.code.substr(3);
        const std::size_t eq = rest.find('=');
        if (eq == npos) {
            fail_line(line, 0, ParseErrorCode::BadVarDecl, "expected VAR name = value");
        }
        const std::string_view name = trim(rest.substr(0, eq));
        if (!is_identifier(name) || is_keyword(name)) {
            fail_line(line, 3, ParseErrorCode::BadVarDecl, "invalid variable name '" + std::string(name) + "'");
        }
        const std::string_view raw_value = rest.substr(eq + 1);
        const std::string_view value = trim(raw_value);
        const std::size_t value_offset = 3 + eq + 1 + static_cast<std::size_t>(value.data() - raw_value.data());
        VarDecl decl;
        decl.name = std::string(name);
        decl.loc = {line.number, line.column};
        decl.value = parse_literal(line, value, value_offset);
        if (!var_names_.insert(decl.name).second) {
            fail_line(line, 3, ParseErrorCode::DuplicateVariable, "variable '" + decl.name + "' is declared twice");
        }
        doc_.var_decls.push_back(std::move(decl));
    }

    static Literal parse_literal(const Line& line, std::string_view value, std::size_t offset)
    {
        if (value == "true" || value == "false") {
            return value == "true";
        }
        if (value.starts_with("\"")) {
            const std::size_t end = detail::skip_string(value, 0);
            if (end == npos) {
                fail_line(line, offset, ParseErrorCode::UnterminatedString, "unterminated string literal");
            }
            if (end != value.size()) {
                fail_line(line, offset + end, ParseErrorCode::BadVarDecl, "unexpected text after string literal");
            }
            const Origin origin(line.number, line.column);
            return unescape_string(value.substr(1, value.size() - 2), origin, offset + 1);
        }
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec == std::errc::result_out_of_range) {
            fail_line(line, offset, ParseErrorCode::IntOverflow, "integer literal out of 64-bit range");
        }
        if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
            fail_line(line, offset, ParseErrorCode::BadVarDecl, "VAR value must be an integer, string or boolean literal");
        }
        return v;
    }

    void divert(const Line& line)
    {
        const std::string_view target = trim(line.code.substr(2));
        if (target.empty()) {
            fail_line(line, line.code.size(), ParseErrorCode::BadDivert, "divert needs a target");
        }
        if (target != kEndTarget && !is_identifier(target)) {
            fail_line(line, 2, ParseErrorCode::BadDivert, "invalid divert target '" + std::string(target) + "'");
        }
        current_->statements.push_back({Divert{std::string(target)}, {line.number, line.column}});
    }

    void choice(const Line& line)
    {
        const std::string_view code = line.code;
        const Origin origin(line.number, line.column);
        Choice c;
        std::size_t i = 1;
        while (i < code.size() && (code[i] == ' ' || code[i] == '\t')) {
            ++i;
        }
        if (i < code.size() && code[i] == '{') {
            const std::size_t close = detail::matching_brace(code, i);
            if (close == npos) {
                fail_line(line, i, ParseErrorCode::UnbalancedBrace, "unmatched '{' in choice guard");
            }
            c.guard = parse_expr_at(code.substr(i + 1, close - i - 1), i + 1, origin);
            i = close + 1;
        }
        const std::string_view body = code.substr(i);
        const std::size_t arrow = body.rfind("->");
        if (arrow == npos) {
            fail_line(line, code.size(), ParseErrorCode::ChoiceMissingTarget, "choice needs '-> target'");
        }
        const std::string_view target = trim(body.substr(arrow + 2));
        if (target.empty()) {
            fail_line(line, code.size(), ParseErrorCode::ChoiceMissingTarget, "choice needs '-> target'");
        }
        if (target != kEndTarget && !is_identifier(target)) {
            fail_line(line, i + arrow + 2, ParseErrorCode::BadDivert, "invalid choice target '" + std::string(target) + "'");
        }
        c.target = std::string(target);

        const std::string_view before = body.substr(0, arrow);
        const std::size_t bracket = before.find('[');
        const std::string_view label = trim(before.substr(0, bracket));
        if (bracket != npos) {
            const std::string_view tail = trim(before.substr(bracket + 1));
            if (tail.empty() || tail.back() != ']') {
                fail_line(line, i + bracket, ParseErrorCode::UnexpectedToken, "missing ']' after appended text");
            }
            const std::string_view raw = trim(tail.substr(0, tail.size() - 1));
            const std::size_t raw_base = raw.empty() ? i + bracket + 1 : static_cast<std::size_t>(raw.data() - code.data());
            InlineParser inline_parser(raw, raw_base, origin, 0);
            c.appended = inline_parser.parse(false);
        }
        if (label.empty()) {
            fail_line(line, i, ParseErrorCode::EmptyChoiceLabel, "choice label is empty");
        }
        c.label = std::string(label);
        current_->statements.push_back({std::move(c), {line.number, line.column}});
    }

    void assign(const Line& line)
    {
        const std::string_view rest = line.code.substr(1);
        const std::size_t eq = rest.find('=');
        if (eq == npos || (eq + 1 < rest.size() && rest[eq + 1] == '=')) {
            fail_line(line, 0, ParseErrorCode::BadAssignment, "expected ~ name = expression");
        }
        const std::string_view name = trim(rest.substr(0, eq));
        if (!is_identifier(name) || is_keyword(name)) {
            fail_line(line, 1, ParseErrorCode::BadAssignment, "invalid variable name '" + std::string(name) + "'");
        }
        const Origin origin(line.number, line.column);
        Assign a{std::string(name), parse_expr_at(rest.substr(eq + 1), 1 + eq + 1, origin)};
        current_->statements.push_back({std::move(a), {line.number, line.column}});
    }

    void tag(const Line& line)
    {
        const std::string_view text = trim(line.code.substr(1));
        if (text.empty()) {
            fail_line(line, 0, ParseErrorCode::EmptyTag, "empty tag");
        }
        current_->statements.push_back({TagLine{std::string(text)}, {line.number, line.column}});
    }

    void flush_paragraph()
    {
        if (paragraph_.empty()) {
            return;
        }
        std::vector<const Line*> lines;
        lines.swap(paragraph_);
        std::string joined;
        Origin origin;
        for (const Line* l : lines) {
            if (!joined.empty()) {
                joined.push_back(' ');
            }
            origin.add(joined.size(), l->number, l->column);
            joined.append(l->code);
        }
        InlineParser parser(joined, 0, origin, 0);
        Paragraph p{parser.parse(true)};
        current_->statements.push_back({std::move(p), {lines.front()->number, lines.front()->column}});
    }

    std::string source_;
    std::vector<Line> lines_;
    StoryDocument doc_;
    Knot* current_ = nullptr;
    std::vector<const Line*> paragraph_;
    std::set<std::string> knot_names_;
    std::set<std::string> var_names_;
    std::vector<ParseError> errors_;
    bool skipping_ = false;
};

std::string normalize_newlines(std::string_view source)
{
    std::string out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] == '\r' && i + 1 < source.size() && source[i + 1] == '\n') {
            continue;
        }
        out.push_back(source[i]);
    }
    return out;
}

}  // namespace

ParseResult parse_story(std::string_view source)
{
    const std::string normalized = normalize_newlines(source);
    StoryParser parser(normalized);
    return parser.run();
}

ExprResult parse_expression(std::string_view text)
{
    const Origin origin(1, 1);
    try {
        return parse_expr_at(text, 0, origin);
    } catch (const Failure& f) {
        return f.error;
    }
}

}  // namespace taleweaver::markup
