#pragma once

// Deterministic story state machine.
//
// A Session owns one reader's progress through a compiled story. Every
// successful mutating call (continue_story, choose, set_variable) bumps
// seq() by exactly one; a call that throws leaves the session untouched.
// Choices are never written into the transcript: they are handed to the
// director through pending(), and only a choice's appended content (if the
// author wrote any) reaches the reader.
//
// Sessions are single-owner. Copying one yields an independent snapshot of
// the state that shares the immutable graph.

#include "taleweaver/error.hpp"
#include "taleweaver/markup/ast.hpp"
#include "taleweaver/runtime/eval.hpp"
#include "taleweaver/story/graph.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace taleweaver::runtime {

using story::KnotId;
using story::StoryGraph;

// Error codes: story_finished, choices_pending, step_limit_exceeded,
// eval_error, no_satisfiable_choice, invalid_choice_id, no_pending_choices,
// unknown_variable, type_mismatch, unknown_override, override_type_mismatch,
// story_hash_mismatch, malformed_save, unsupported_save_version.
class RuntimeError : public Error {
public:
    RuntimeError(std::string code, const std::string& message, std::optional<std::string> knot = std::nullopt,
                 int line = 0, std::string detail = {})
        : Error(std::move(code), message), knot_(std::move(knot)), line_(line), detail_(std::move(detail))
    {
    }

    const std::optional<std::string>& knot() const { return knot_; }
    int line() const { return line_; }
    // For eval_error: the underlying evaluation code (e.g. division_by_zero).
    const std::string& detail() const { return detail_; }

private:
    std::optional<std::string> knot_;
    int line_;
    std::string detail_;
};

// A styled region of a paragraph, in code points of plain_text.
struct StyledRange {
    markup::StyleTag style;
    std::size_t start = 0;
    std::size_t end = 0;
    bool operator==(const StyledRange&) const = default;
};

struct EmittedParagraph {
    std::string plain_text;
    std::vector<StyledRange> spans;  // pre-order: outer spans before inner
    KnotId knot;
    std::size_t statement = 0;
    std::vector<std::string> tags;

    markup::StyleTag::Align align() const;
    bool operator==(const EmittedParagraph&) const = default;
};

struct PresentedChoice {
    std::size_t id = 0;            // dense over satisfiable choices
    std::string label;
    std::size_t source_index = 0;  // CompiledChoice::index
    bool operator==(const PresentedChoice&) const = default;
};

struct Advance {
    std::vector<EmittedParagraph> paragraphs;
    std::vector<PresentedChoice> choices;  // empty when the story ended
    bool ended = false;
    std::vector<KnotId> visited;  // knots executed during this advance, in order
};

struct Position {
    KnotId knot;
    std::size_t statement = 0;
    bool operator==(const Position&) const = default;
};

struct SessionOptions {
    std::size_t step_limit = 10'000;  // statements per continue_story call
};

inline constexpr int kSaveVersion = 1;

class Session {
public:
    // Initial values are the VAR declarations overlaid with `overrides`.
    static Session create(std::shared_ptr<const StoryGraph> graph, const Vars& overrides = {},
                          SessionOptions options = {});

    // Runs until a choice point with at least one satisfiable choice, or END.
    Advance continue_story();

    void choose(std::size_t choice_id);
    void set_variable(std::string_view name, Value value);

    // SaveBlob JSON text (transcript text excluded; see transcript_offset).
    std::string snapshot() const;
    static Session restore(std::shared_ptr<const StoryGraph> graph, std::string_view blob,
                           SessionOptions options = {});

    const StoryGraph& graph() const { return *graph_; }
    const std::shared_ptr<const StoryGraph>& graph_ptr() const { return graph_; }
    const Position& position() const { return position_; }
    const Vars& vars() const { return vars_; }
    const std::optional<std::vector<PresentedChoice>>& pending() const { return pending_; }
    std::uint64_t seq() const { return seq_; }
    std::uint64_t steps_taken() const { return steps_taken_; }
    bool finished() const { return finished_; }

    // Paragraphs emitted by this object. A restored session starts with an
    // empty transcript; transcript_offset() counts the paragraphs emitted
    // before the snapshot it came from.
    std::span<const EmittedParagraph> transcript() const { return transcript_; }
    std::size_t transcript_offset() const { return transcript_offset_; }
    std::size_t transcript_length() const { return transcript_offset_ + transcript_.size(); }

    // Name of the knot the session is in. After END the position stays on
    // the knot that ended the story.
    std::string current_knot_name() const;

private:
    explicit Session(std::shared_ptr<const StoryGraph> graph, SessionOptions options);

    std::shared_ptr<const StoryGraph> graph_;
    SessionOptions options_;
    Position position_;
    Vars vars_;
    std::vector<EmittedParagraph> transcript_;
    std::size_t transcript_offset_ = 0;
    std::optional<std::vector<PresentedChoice>> pending_;
    std::uint64_t seq_ = 0;
    std::uint64_t steps_taken_ = 0;
    bool finished_ = false;
};

// Evaluates inline content to plain text plus styled ranges.
EmittedParagraph render_inline(const markup::InlineContent& content, const Vars& vars);

}  // namespace taleweaver::runtime
