#include "taleweaver/story/compiler.hpp"

#include "taleweaver/markup/printer.hpp"
#include "taleweaver/util/hash.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

namespace taleweaver::story {

using namespace taleweaver::markup;

const char* to_string(Severity s)
{
    return s == Severity::Error ? "ERROR" : "WARNING";
}

const char* to_string(DiagnosticCode c)
{
    switch (c) {
    case DiagnosticCode::NoKnots: return "no_knots";
    case DiagnosticCode::UnknownStartKnot: return "unknown_start_knot";
    case DiagnosticCode::DanglingDivert: return "dangling_divert";
    case DiagnosticCode::UndeclaredVariable: return "undeclared_variable";
    case DiagnosticCode::DeadEnd: return "dead_end";
    case DiagnosticCode::StatementAfterDivert: return "statement_after_divert";
    case DiagnosticCode::UnreachableChoice: return "unreachable_choice";
    case DiagnosticCode::UnreachableKnot: return "unreachable_knot";
    }
    return "unknown";
}

const char* to_string(PathEnd e)
{
    switch (e) {
    case PathEnd::End: return "end";
    case PathEnd::FallOff: return "fall_off";
    case PathEnd::Truncated: return "truncated";
    }
    return "?";
}

std::string format_line(const Diagnostic& d)
{
    return std::string(to_string(d.severity)) + " " + to_string(d.code) + " " + d.knot.value_or("-") + ":" +
           std::to_string(d.line) + " " + d.message;
}

std::optional<KnotId> StoryGraph::find_knot(std::string_view name) const
{
    const auto it = knot_index.find(name);
    if (it == knot_index.end()) {
        return std::nullopt;
    }
    return it->second;
}

const Value* StoryGraph::declared(std::string_view name) const
{
    for (const VarInit& v : var_decls) {
        if (v.name == name) {
            return &v.value;
        }
    }
    return nullptr;
}

std::vector<KnotId> StoryGraph::successors(KnotId id) const
{
    const CompiledKnot& k = knot(id);
    std::vector<KnotId> out;
    if (const auto* d = std::get_if<ExitDivert>(&k.exit)) {
        out.push_back(d->target);
    } else {
        for (const CompiledChoice& c : k.choices) {
            out.push_back(c.target);
        }
    }
    return out;
}

namespace {

void collect_vars(const Expr& e, std::vector<std::string>& out)
{
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, VarRef>) {
                out.push_back(n.name);
            } else if constexpr (std::is_same_v<T, Unary>) {
                collect_vars(*n.operand, out);
            } else if constexpr (std::is_same_v<T, Binary>) {
                collect_vars(*n.lhs, out);
                collect_vars(*n.rhs, out);
            }
        },
        e.node);
}

void collect_vars(const InlineContent& content, std::vector<std::string>& out)
{
    for (const Span& span : content.spans) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interpolation>) {
                    collect_vars(s.expr, out);
                } else if constexpr (std::is_same_v<T, ConditionalText>) {
                    collect_vars(s.cond, out);
                    collect_vars(*s.then_branch, out);
                    if (s.else_branch) {
                        collect_vars(**s.else_branch, out);
                    }
                } else if constexpr (std::is_same_v<T, StyledSpan>) {
                    collect_vars(*s.children, out);
                }
            },
            span);
    }
}

std::vector<std::string> referenced_vars(const Statement& st)
{
    std::vector<std::string> names;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Paragraph>) {
                collect_vars(s.content, names);
            } else if constexpr (std::is_same_v<T, Choice>) {
                if (s.guard) {
                    collect_vars(*s.guard, names);
                }
                if (s.appended) {
                    collect_vars(*s.appended, names);
                }
            } else if constexpr (std::is_same_v<T, Assign>) {
                names.push_back(s.name);
                collect_vars(s.value, names);
            }
        },
        st.node);
    return names;
}

class Compiler {
public:
    explicit Compiler(const StoryDocument& doc) : doc_(doc) {}

    CompileOutput run()
    {
        if (doc_.knots.empty()) {
            error(DiagnosticCode::NoKnots, std::nullopt, 0, "story has no knots");
            return std::move(out_);
        }
        for (std::size_t i = 0; i < doc_.knots.size(); ++i) {
            graph_.knot_index.emplace(doc_.knots[i].name, KnotId{static_cast<std::int32_t>(i)});
        }
        for (const VarDecl& v : doc_.var_decls) {
            graph_.var_decls.push_back({v.name, std::visit([](const auto& x) { return Value{x}; }, v.value)});
            declared_.insert(v.name);
        }
        const std::string start = *doc_.effective_start();
        if (const auto id = graph_.find_knot(start)) {
            graph_.start = *id;
        } else {
            error(DiagnosticCode::UnknownStartKnot, std::nullopt, doc_.knots.front().loc.line,
                  "@start names unknown knot '" + start + "'");
        }
        for (std::size_t i = 0; i < doc_.knots.size(); ++i) {
            graph_.knots.push_back(compile_knot(doc_.knots[i], KnotId{static_cast<std::int32_t>(i)}));
        }
        const bool has_error = std::any_of(out_.diagnostics.begin(), out_.diagnostics.end(),
                                           [](const Diagnostic& d) { return d.severity == Severity::Error; });
        if (!has_error) {
            graph_.title = doc_.title.value_or("");
            graph_.content_hash = fnv1a64(print_story(doc_));
            out_.graph = std::move(graph_);
        }
        return std::move(out_);
    }

private:
    void error(DiagnosticCode code, std::optional<std::string> knot, int line, std::string message)
    {
        out_.diagnostics.push_back({Severity::Error, code, std::move(knot), line, std::move(message)});
    }

    void warning(DiagnosticCode code, std::optional<std::string> knot, int line, std::string message)
    {
        out_.diagnostics.push_back({Severity::Warning, code, std::move(knot), line, std::move(message)});
    }

    KnotId resolve(const Knot& knot, const std::string& target, int line)
    {
        if (target == kEndTarget) {
            return KnotId::end();
        }
        if (const auto id = graph_.find_knot(target)) {
            return *id;
        }
        error(DiagnosticCode::DanglingDivert, knot.name, line, "target '" + target + "' is not a knot");
        return KnotId::end();
    }

    CompiledKnot compile_knot(const Knot& knot, KnotId id)
    {
        CompiledKnot ck;
        ck.id = id;
        ck.name = knot.name;
        ck.tags = knot.tags;
        ck.line = knot.loc.line;

        std::optional<ExitDivert> divert;
        bool warned_after_divert = false;
        std::set<std::string> reported_vars;

        for (const Statement& st : knot.statements) {
            for (const std::string& name : referenced_vars(st)) {
                if (!declared_.contains(name) && reported_vars.insert(name).second) {
                    error(DiagnosticCode::UndeclaredVariable, knot.name, st.loc.line,
                          "variable '" + name + "' is not declared with VAR");
                }
            }

            // References are resolved (and reported) even in dropped statements.
            const auto* d = std::get_if<Divert>(&st.node);
            const auto* c = std::get_if<Choice>(&st.node);
            KnotId target;
            if (d) {
                target = resolve(knot, d->target, st.loc.line);
            } else if (c) {
                target = resolve(knot, c->target, st.loc.line);
            }

            if (divert) {
                if (!warned_after_divert) {
                    warning(DiagnosticCode::StatementAfterDivert, knot.name, st.loc.line,
                            "statement after divert is never executed");
                    warned_after_divert = true;
                }
                continue;
            }

            if (d) {
                divert = ExitDivert{target, st.loc.line};
            } else if (c) {
                ck.choices.push_back({ck.choices.size(), c->guard, c->label, c->appended, target, st.loc.line});
            } else if (const auto* p = std::get_if<Paragraph>(&st.node)) {
                ck.body.push_back({BodyParagraph{p->content}, st.loc.line});
            } else if (const auto* a = std::get_if<Assign>(&st.node)) {
                ck.body.push_back({BodyAssign{a->name, a->value}, st.loc.line});
            } else if (const auto* t = std::get_if<TagLine>(&st.node)) {
                ck.body.push_back({BodyTag{t->text}, st.loc.line});
            }
        }

        if (divert) {
            if (!ck.choices.empty()) {
                warning(DiagnosticCode::UnreachableChoice, knot.name, ck.choices.front().line,
                        "choices are never offered because the knot ends with a divert");
                ck.choices.clear();
            }
            ck.exit = *divert;
        } else if (!ck.choices.empty()) {
            ck.exit = ExitChoicePoint{};
        } else {
            ck.exit = ExitFallOff{};
            warning(DiagnosticCode::DeadEnd, knot.name, knot.loc.line,
                    "knot has neither a divert nor choices; the story stops here");
        }
        return ck;
    }

    const StoryDocument& doc_;
    StoryGraph graph_;
    std::set<std::string> declared_;
    CompileOutput out_;
};

}  // namespace

CompileOutput compile(const StoryDocument& doc)
{
    return Compiler(doc).run();
}

Reachability reachability(const StoryGraph& graph)
{
    Reachability result;
    std::deque<KnotId> queue{graph.start};
    result.reachable.insert(graph.start);
    while (!queue.empty()) {
        const KnotId id = queue.front();
        queue.pop_front();
        for (const KnotId next : graph.successors(id)) {
            if (!next.is_end() && result.reachable.insert(next).second) {
                queue.push_back(next);
            }
        }
    }
    for (const CompiledKnot& k : graph.knots) {
        if (!result.reachable.contains(k.id)) {
            result.warnings.push_back({Severity::Warning, DiagnosticCode::UnreachableKnot, k.name, k.line,
                                       "knot cannot be reached from the start knot"});
        }
    }
    return result;
}

std::vector<Path> enumerate_paths(const StoryGraph& graph, std::size_t max_steps, std::size_t cap)
{
    if (max_steps == 0) {
        throw std::invalid_argument("max_steps must be at least 1");
    }
    std::vector<Path> paths;
    auto emit = [&](const std::vector<PathStep>& steps, PathEnd end) {
        if (paths.size() >= cap) {
            throw PathExplosion(cap);
        }
        paths.push_back({steps, end});
    };

    // A choice point on the current path, the next choice to try there and
    // the path length when it was reached.
    struct Frame {
        KnotId knot;
        std::size_t next_choice = 0;
        std::size_t depth = 0;
    };
    std::vector<PathStep> steps;
    std::vector<Frame> stack;

    // Follows diverts from `id` until a choice point (pushed) or a terminal
    // (emitted).
    auto descend = [&](KnotId id) {
        for (;;) {
            if (id.is_end()) {
                emit(steps, PathEnd::End);
                return;
            }
            if (steps.size() == max_steps) {
                emit(steps, PathEnd::Truncated);
                return;
            }
            const CompiledKnot& k = graph.knot(id);
            if (const auto* d = std::get_if<ExitDivert>(&k.exit)) {
                steps.push_back({id, std::nullopt});
                id = d->target;
                continue;
            }
            if (std::holds_alternative<ExitFallOff>(k.exit)) {
                steps.push_back({id, std::nullopt});
                emit(steps, PathEnd::FallOff);
                return;
            }
            stack.push_back({id, 0, steps.size()});
            return;
        }
    };

    descend(graph.start);
    while (!stack.empty()) {
        Frame& top = stack.back();
        const CompiledKnot& k = graph.knot(top.knot);
        if (top.next_choice >= k.choices.size()) {
            stack.pop_back();
            continue;
        }
        const std::size_t i = top.next_choice++;
        steps.resize(top.depth);
        steps.push_back({top.knot, i});
        const KnotId target = k.choices[i].target;
        descend(target);
    }
    return paths;
}

}  // namespace taleweaver::story
