#include "taleweaver/value.hpp"

namespace taleweaver {

const char* to_string(ValueType t)
{
    switch (t) {
    case ValueType::Int: return "int";
    case ValueType::Str: return "string";
    case ValueType::Bool: return "bool";
    }
    return "?";
}

std::string Value::render() const
{
    switch (type()) {
    case ValueType::Int: return std::to_string(as_int());
    case ValueType::Str: return as_str();
    case ValueType::Bool: return as_bool() ? "true" : "false";
    }
    return {};
}

}  // namespace taleweaver
