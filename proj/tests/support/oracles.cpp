#include "oracles.hpp"

#include <deque>
#include <functional>

namespace tw_test {

using taleweaver::Value;
using namespace taleweaver::markup;

std::uint64_t RefSplitMix::next()
{
    ++n_;
    std::uint64_t z = seed_ + n_ * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

using Wide = __int128;

struct Fail {
    std::string code;
};

bool fits(Wide w) { return w >= INT64_MIN && w <= INT64_MAX; }

Value walk(const Expr& e, const std::map<std::string, Value>& vars)
{
    if (auto* i = std::get_if<IntLit>(&e.node)) return Value::integer(i->value);
    if (auto* s = std::get_if<StrLit>(&e.node)) return Value::text(s->value);
    if (auto* b = std::get_if<BoolLit>(&e.node)) return Value::boolean(b->value);
    if (auto* v = std::get_if<VarRef>(&e.node)) {
        auto it = vars.find(v->name);
        if (it == vars.end()) throw Fail{"unknown_variable"};
        return it->second;
    }
    if (auto* u = std::get_if<Unary>(&e.node)) {
        Value x = walk(*u->operand, vars);
        if (u->op == UnaryOp::Not) {
            if (x.type() != taleweaver::ValueType::Bool) throw Fail{"type_mismatch"};
            return Value::boolean(!x.as_bool());
        }
        if (x.type() != taleweaver::ValueType::Int) throw Fail{"type_mismatch"};
        Wide w = -static_cast<Wide>(x.as_int());
        if (!fits(w)) throw Fail{"integer_overflow"};
        return Value::integer(static_cast<std::int64_t>(w));
    }
    const Binary& b = std::get<Binary>(e.node);
    if (b.op == BinaryOp::And || b.op == BinaryOp::Or) {
        Value l = walk(*b.lhs, vars);
        if (l.type() != taleweaver::ValueType::Bool) throw Fail{"type_mismatch"};
        if (b.op == BinaryOp::And && l.as_bool() == false) return Value::boolean(false);
        if (b.op == BinaryOp::Or && l.as_bool() == true) return Value::boolean(true);
        Value r = walk(*b.rhs, vars);
        if (r.type() != taleweaver::ValueType::Bool) throw Fail{"type_mismatch"};
        return r;
    }
    Value l = walk(*b.lhs, vars);
    Value r = walk(*b.rhs, vars);
    if (b.op == BinaryOp::Eq || b.op == BinaryOp::Ne) {
        if (l.type() != r.type()) throw Fail{"type_mismatch"};
        bool same = l.data == r.data;
        return Value::boolean(b.op == BinaryOp::Eq ? same : !same);
    }
    if (b.op == BinaryOp::Add && l.type() == taleweaver::ValueType::Str &&
        r.type() == taleweaver::ValueType::Str) {
        return Value::text(l.as_str() + r.as_str());
    }
    if (l.type() != taleweaver::ValueType::Int || r.type() != taleweaver::ValueType::Int) {
        throw Fail{"type_mismatch"};
    }
    Wide x = l.as_int();
    Wide y = r.as_int();
    Wide w = 0;
    switch (b.op) {
    case BinaryOp::Add: w = x + y; break;
    case BinaryOp::Sub: w = x - y; break;
    case BinaryOp::Mul: w = x * y; break;
    case BinaryOp::Div:
        if (y == 0) throw Fail{"division_by_zero"};
        // Truncation toward zero, spelled out.
        w = (x < 0) == (y < 0) ? (x < 0 ? -x : x) / (y < 0 ? -y : y) : -((x < 0 ? -x : x) / (y < 0 ? -y : y));
        break;
    case BinaryOp::Lt: return Value::boolean(x < y);
    case BinaryOp::Le: return Value::boolean(x <= y);
    case BinaryOp::Gt: return Value::boolean(x > y);
    case BinaryOp::Ge: return Value::boolean(x >= y);
    default: throw Fail{"type_mismatch"};
    }
    if (!fits(w)) throw Fail{"integer_overflow"};
    return Value::integer(static_cast<std::int64_t>(w));
}

}  // namespace

NaiveResult naive_eval(const Expr& e, const std::map<std::string, Value>& vars)
{
    try {
        return walk(e, vars);
    } catch (const Fail& f) {
        return f.code;
    }
}

std::set<int> bfs_reachable(const GraphModel& g)
{
    std::set<int> seen{g.start};
    std::deque<int> queue{g.start};
    while (!queue.empty()) {
        int k = queue.front();
        queue.pop_front();
        std::vector<int> next = g.nodes[k].choices;
        if (g.nodes[k].divert) next.push_back(*g.nodes[k].divert);
        for (int t : next) {
            if (t >= 0 && !seen.count(t)) {
                seen.insert(t);
                queue.push_back(t);
            }
        }
    }
    return seen;
}

std::uint64_t count_paths(const GraphModel& g)
{
    std::function<std::uint64_t(int)> count = [&](int k) -> std::uint64_t {
        if (k < 0) return 1;
        const auto& n = g.nodes[k];
        if (!n.choices.empty()) {
            std::uint64_t total = 0;
            for (int t : n.choices) total += count(t);
            return total;
        }
        if (n.divert) return count(*n.divert);
        return 1;  // dead end
    };
    return count(g.start);
}

std::vector<ModelPath> list_paths(const GraphModel& g)
{
    std::vector<ModelPath> out;
    ModelPath cur;
    std::function<void(int)> go = [&](int k) {
        const auto& n = g.nodes[k];
        if (!n.choices.empty()) {
            for (int i = 0; i < static_cast<int>(n.choices.size()); ++i) {
                cur.steps.push_back({k, i});
                if (n.choices[i] < 0) {
                    cur.reached_end = true;
                    out.push_back(cur);
                } else {
                    go(n.choices[i]);
                }
                cur.steps.pop_back();
            }
            return;
        }
        cur.steps.push_back({k, -1});
        if (n.divert && *n.divert >= 0) {
            go(*n.divert);
        } else {
            cur.reached_end = n.divert.has_value();
            out.push_back(cur);
        }
        cur.steps.pop_back();
    };
    go(g.start);
    return out;
}

int scan_hit(const std::vector<taleweaver::layout::WordBox>& boxes, std::int64_t x, std::int64_t y)
{
    int found = -1;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i];
        if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1) {
            if (found != -1) return -2;  // overlapping boxes
            found = static_cast<int>(i);
        }
    }
    return found;
}

std::string normalize_ws(const std::string& s)
{
    // Decode just enough UTF-8 to recognise the whitespace code points.
    static const std::set<char32_t> spaces = {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20, 0x85, 0xA0, 0x1680,
                                              0x2000, 0x2001, 0x2002, 0x2003, 0x2004, 0x2005, 0x2006,
                                              0x2007, 0x2008, 0x2009, 0x200A, 0x2028, 0x2029, 0x202F,
                                              0x205F, 0x3000};
    std::string out;
    std::string word;
    std::size_t i = 0;
    auto flush = [&] {
        if (!word.empty()) {
            if (!out.empty()) out += ' ';
            out += word;
            word.clear();
        }
    };
    while (i < s.size()) {
        unsigned char c = s[i];
        std::size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
        char32_t cp = 0;
        if (len == 1) cp = c;
        else if (len == 2) cp = ((c & 0x1F) << 6) | (s[i + 1] & 0x3F);
        else if (len == 3) cp = ((c & 0x0F) << 12) | ((s[i + 1] & 0x3F) << 6) | (s[i + 2] & 0x3F);
        else cp = ((c & 0x07) << 18) | ((s[i + 1] & 0x3F) << 12) | ((s[i + 2] & 0x3F) << 6) | (s[i + 3] & 0x3F);
        if (spaces.count(cp)) flush();
        else word.append(s, i, len);
        i += len;
    }
    flush();
    return out;
}

}  // namespace tw_test
