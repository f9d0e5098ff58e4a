#include "scan.hpp"

namespace taleweaver::markup::detail {

namespace {

bool ws(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::string_view trim(std::string_view s)
{
    while (!s.empty() && ws(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && ws(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::size_t skip_string(std::string_view s, std::size_t i)
{
    ++i;
    while (i < s.size()) {
        if (s[i] == '\\') {
            i += 2;
            continue;
        }
        if (s[i] == '"') {
            return i + 1;
        }
        ++i;
    }
    return npos;
}

std::size_t matching_brace(std::string_view s, std::size_t open)
{
    // One flag per open brace: true while still in that brace's expression part.
    std::vector<bool> expr_part{true};
    std::size_t i = open + 1;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == '"' && expr_part.back()) {
            i = skip_string(s, i);
            if (i == npos) {
                return npos;
            }
            continue;
        }
        if (c == '?' && expr_part.back()) {
            expr_part.back() = false;
        } else if (c == '{') {
            expr_part.push_back(true);
        } else if (c == '}') {
            expr_part.pop_back();
            if (expr_part.empty()) {
                return i;
            }
        }
        ++i;
    }
    return npos;
}

std::size_t comment_start(std::string_view line, bool expression_line)
{
    std::vector<bool> expr_part;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        const bool in_expr = expr_part.empty() ? expression_line : expr_part.back();
        if (c == '"' && in_expr) {
            const std::size_t end = skip_string(line, i);
            if (end == npos) {
                return npos;  // the parser reports the unterminated string
            }
            i = end;
            continue;
        }
        if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') {
            return i;
        }
        if (c == '{') {
            expr_part.push_back(true);
        } else if (c == '}') {
            if (!expr_part.empty()) {
                expr_part.pop_back();
            }
        } else if (c == '?' && !expr_part.empty()) {
            expr_part.back() = false;
        }
        ++i;
    }
    return npos;
}

std::size_t top_level_question(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == '"') {
            i = skip_string(s, i);
            if (i == npos) {
                return npos;
            }
            continue;
        }
        if (c == '{') {
            const std::size_t close = matching_brace(s, i);
            if (close == npos) {
                return npos;
            }
            i = close + 1;
            continue;
        }
        if (c == '?') {
            return i;
        }
        ++i;
    }
    return npos;
}

std::size_t top_level_bar(std::string_view s)
{
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (c == '\\') {
            i += 2;
            continue;
        }
        if (c == '{') {
            const std::size_t close = matching_brace(s, i);
            if (close == npos) {
                return npos;
            }
            i = close + 1;
            continue;
        }
        if (c == '|') {
            return i;
        }
        ++i;
    }
    return npos;
}

}  // namespace taleweaver::markup::detail
