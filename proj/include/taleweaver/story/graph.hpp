#pragma once

// Compiled, name-resolved story. Immutable once built; share it freely
// between threads via std::shared_ptr<const StoryGraph>.

#include "taleweaver/markup/ast.hpp"
#include "taleweaver/value.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace taleweaver::story {

// Index into StoryGraph::knots, or the END sentinel.
struct KnotId {
    std::int32_t value = -1;

    static constexpr KnotId end() { return KnotId{-1}; }
    constexpr bool is_end() const { return value < 0; }
    std::size_t index() const { return static_cast<std::size_t>(value); }

    auto operator<=>(const KnotId&) const = default;
};

struct BodyParagraph {
    markup::InlineContent content;
};

struct BodyAssign {
    std::string name;
    markup::Expr value;
};

struct BodyTag {
    std::string text;
};

struct BodyStatement {
    std::variant<BodyParagraph, BodyAssign, BodyTag> node;
    int line = 0;
};

struct CompiledChoice {
    std::size_t index = 0;  // contiguous from 0 in source order
    std::optional<markup::Expr> guard;
    std::string label;
    std::optional<markup::InlineContent> appended;
    KnotId target;
    int line = 0;
};

struct ExitDivert {
    KnotId target;
    int line = 0;
};
struct ExitChoicePoint {};
struct ExitFallOff {};

using KnotExit = std::variant<ExitDivert, ExitChoicePoint, ExitFallOff>;

struct CompiledKnot {
    KnotId id;
    std::string name;
    std::vector<std::string> tags;
    std::vector<BodyStatement> body;
    std::vector<CompiledChoice> choices;  // non-empty iff exit is a ChoicePoint
    KnotExit exit = ExitFallOff{};
    int line = 0;
};

struct VarInit {
    std::string name;
    Value value;
};

struct StoryGraph {
    std::string title;
    KnotId start;
    std::vector<CompiledKnot> knots;
    std::vector<VarInit> var_decls;  // declaration order
    std::map<std::string, KnotId, std::less<>> knot_index;
    std::uint64_t content_hash = 0;  // FNV-1a 64 of the canonical source

    const CompiledKnot& knot(KnotId id) const { return knots.at(id.index()); }
    std::optional<KnotId> find_knot(std::string_view name) const;
    const Value* declared(std::string_view name) const;

    // Outgoing edges in order: the divert target or each choice target.
    std::vector<KnotId> successors(KnotId id) const;
};

}  // namespace taleweaver::story
