#pragma once

#include <cstdint>
#include <string>
#include <variant>

namespace taleweaver {

enum class ValueType { Int, Str, Bool };

const char* to_string(ValueType t);

// A story variable's value. Ints are 64-bit signed.
struct Value {
    std::variant<std::int64_t, std::string, bool> data;

    static Value integer(std::int64_t v) { return Value{v}; }
    static Value text(std::string v) { return Value{std::move(v)}; }
    static Value boolean(bool v) { return Value{v}; }

    ValueType type() const { return static_cast<ValueType>(data.index()); }
    bool same_type(const Value& other) const { return data.index() == other.data.index(); }

    bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
    bool is_str() const { return std::holds_alternative<std::string>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }

    std::int64_t as_int() const { return std::get<std::int64_t>(data); }
    const std::string& as_str() const { return std::get<std::string>(data); }
    bool as_bool() const { return std::get<bool>(data); }

    // Ints as decimal, bools as true/false, strings verbatim.
    std::string render() const;

    bool operator==(const Value&) const = default;
};

}  // namespace taleweaver
