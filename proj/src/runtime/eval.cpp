#include "taleweaver/runtime/eval.hpp"

namespace taleweaver::runtime {

using namespace taleweaver::markup;

namespace {

[[noreturn]] void mismatch(const char* what, const Value& a, const Value& b)
{
    throw EvalError("type_mismatch", std::string("cannot apply '") + what + "' to " + to_string(a.type()) +
                                         " and " + to_string(b.type()));
}

bool require_bool(const Value& v, const char* what)
{
    if (!v.is_bool()) {
        throw EvalError("type_mismatch",
                        std::string("'") + what + "' needs a bool, got " + to_string(v.type()));
    }
    return v.as_bool();
}

void check_overflow(bool overflowed)
{
    if (overflowed) {
        throw EvalError("integer_overflow", "integer arithmetic overflowed 64 bits");
    }
}

Value eval_binary(const Binary& b, const Vars& vars)
{
    const char* op = to_string(b.op);
    if (b.op == BinaryOp::And || b.op == BinaryOp::Or) {
        const bool lhs = require_bool(eval_expr(*b.lhs, vars), op);
        if (b.op == BinaryOp::And && !lhs) {
            return Value::boolean(false);
        }
        if (b.op == BinaryOp::Or && lhs) {
            return Value::boolean(true);
        }
        return Value::boolean(require_bool(eval_expr(*b.rhs, vars), op));
    }

    const Value lhs = eval_expr(*b.lhs, vars);
    const Value rhs = eval_expr(*b.rhs, vars);

    switch (b.op) {
    case BinaryOp::Eq:
    case BinaryOp::Ne:
        if (!lhs.same_type(rhs)) {
            mismatch(op, lhs, rhs);
        }
        return Value::boolean((lhs == rhs) == (b.op == BinaryOp::Eq));
    case BinaryOp::Add:
        if (lhs.is_str() && rhs.is_str()) {
            return Value::text(lhs.as_str() + rhs.as_str());
        }
        [[fallthrough]];
    default:
        break;
    }

    if (!lhs.is_int() || !rhs.is_int()) {
        mismatch(op, lhs, rhs);
    }
    const std::int64_t x = lhs.as_int();
    const std::int64_t y = rhs.as_int();
    std::int64_t r = 0;
    switch (b.op) {
    case BinaryOp::Add:
        check_overflow(__builtin_add_overflow(x, y, &r));
        return Value::integer(r);
    case BinaryOp::Sub:
        check_overflow(__builtin_sub_overflow(x, y, &r));
        return Value::integer(r);
    case BinaryOp::Mul:
        check_overflow(__builtin_mul_overflow(x, y, &r));
        return Value::integer(r);
    case BinaryOp::Div:
        if (y == 0) {
            throw EvalError("division_by_zero", "division by zero");
        }
        if (x == INT64_MIN && y == -1) {
            throw EvalError("integer_overflow", "integer arithmetic overflowed 64 bits");
        }
        return Value::integer(x / y);
    case BinaryOp::Lt: return Value::boolean(x < y);
    case BinaryOp::Le: return Value::boolean(x <= y);
    case BinaryOp::Gt: return Value::boolean(x > y);
    case BinaryOp::Ge: return Value::boolean(x >= y);
    default: break;
    }
    mismatch(op, lhs, rhs);
}

}  // namespace

Value eval_expr(const Expr& expr, const Vars& vars)
{
    return std::visit(
        [&](const auto& n) -> Value {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, IntLit>) {
                return Value::integer(n.value);
            } else if constexpr (std::is_same_v<T, StrLit>) {
                return Value::text(n.value);
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                return Value::boolean(n.value);
            } else if constexpr (std::is_same_v<T, VarRef>) {
                const auto it = vars.find(n.name);
                if (it == vars.end()) {
                    throw EvalError("unknown_variable", "unknown variable '" + n.name + "'");
                }
                return it->second;
            } else if constexpr (std::is_same_v<T, Unary>) {
                const Value v = eval_expr(*n.operand, vars);
                if (n.op == UnaryOp::Not) {
                    return Value::boolean(!require_bool(v, "not"));
                }
                if (!v.is_int()) {
                    throw EvalError("type_mismatch", std::string("'-' needs an int, got ") + to_string(v.type()));
                }
                if (v.as_int() == INT64_MIN) {
                    throw EvalError("integer_overflow", "integer arithmetic overflowed 64 bits");
                }
                return Value::integer(-v.as_int());
            } else {
                return eval_binary(n, vars);
            }
        },
        expr.node);
}

}  // namespace taleweaver::runtime
