#pragma once

#include "taleweaver/error.hpp"
#include "taleweaver/markup/ast.hpp"
#include "taleweaver/value.hpp"

#include <functional>
#include <map>
#include <string>

namespace taleweaver::runtime {

using Vars = std::map<std::string, Value, std::less<>>;

// Codes: type_mismatch, division_by_zero, unknown_variable, integer_overflow.
class EvalError : public Error {
public:
    using Error::Error;
};

// Int arithmetic truncates toward zero and rejects overflow; `+` also joins
// strings; == and != need equal types; ordering is Int-only; and/or/not are
// Bool-only and short-circuit. Operands evaluate left to right before any
// type check.
Value eval_expr(const markup::Expr& expr, const Vars& vars);

}  // namespace taleweaver::runtime
