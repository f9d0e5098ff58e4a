#pragma once

#include "taleweaver/error.hpp"
#include "taleweaver/markup/ast.hpp"
#include "taleweaver/story/graph.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace taleweaver::story {

enum class Severity { Error, Warning };

enum class DiagnosticCode {
    NoKnots,
    UnknownStartKnot,
    DanglingDivert,
    UndeclaredVariable,
    DeadEnd,
    StatementAfterDivert,
    UnreachableChoice,
    UnreachableKnot,
};

const char* to_string(Severity s);
const char* to_string(DiagnosticCode c);

struct Diagnostic {
    Severity severity = Severity::Error;
    DiagnosticCode code = DiagnosticCode::NoKnots;
    std::optional<std::string> knot;
    int line = 0;
    std::string message;
};

// `SEVERITY code knot:line message`; a missing knot prints as `-`.
std::string format_line(const Diagnostic& d);

struct CompileOutput {
    std::optional<StoryGraph> graph;  // absent when any error was reported
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return graph.has_value(); }
};

// Resolves names, checks references and classifies each knot's exit.
// Errors block the graph; warnings ride along with it.
CompileOutput compile(const markup::StoryDocument& doc);

struct Reachability {
    std::set<KnotId> reachable;
    std::vector<Diagnostic> warnings;  // one unreachable_knot per unreachable id
};

// Knots reachable from start over divert and choice edges. Guards are
// ignored, so this over-approximates what a session can visit.
Reachability reachability(const StoryGraph& graph);

enum class PathEnd { End, FallOff, Truncated };

const char* to_string(PathEnd e);

struct PathStep {
    KnotId knot;
    std::optional<std::size_t> choice;  // nullopt: left by divert or fell off

    bool operator==(const PathStep&) const = default;
};

struct Path {
    std::vector<PathStep> steps;
    PathEnd end = PathEnd::End;

    bool truncated() const { return end == PathEnd::Truncated; }
    bool operator==(const Path&) const = default;
};

inline constexpr std::size_t kDefaultPathCap = 100'000;

class PathExplosion : public Error {
public:
    explicit PathExplosion(std::size_t cap)
        : Error("path_explosion", "more than " + std::to_string(cap) + " paths")
    {
    }
};

// Depth-first over every choice index (guards ignored), in lexicographic
// order of choice indices. Paths longer than max_steps are cut and marked
// Truncated. Throws PathExplosion past `cap` paths, std::invalid_argument
// when max_steps is 0.
std::vector<Path> enumerate_paths(const StoryGraph& graph, std::size_t max_steps,
                                  std::size_t cap = kDefaultPathCap);

}  // namespace taleweaver::story
