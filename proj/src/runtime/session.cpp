#include "taleweaver/runtime/session.hpp"

#include "taleweaver/util/hash.hpp"
#include "taleweaver/util/utf8.hpp"

#include <json.hpp>

namespace taleweaver::runtime {

using namespace taleweaver::markup;
using story::CompiledChoice;
using story::CompiledKnot;
using story::ExitChoicePoint;
using story::ExitDivert;
using story::ExitFallOff;
using json = nlohmann::json;

namespace {

class Renderer {
public:
    explicit Renderer(const Vars& vars) : vars_(vars) {}

    void render(const InlineContent& content)
    {
        for (const Span& span : content.spans) {
            std::visit(
                [&](const auto& s) {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, PlainText>) {
                        append(s.text);
                    } else if constexpr (std::is_same_v<T, Interpolation>) {
                        append(eval_expr(s.expr, vars_).render());
                    } else if constexpr (std::is_same_v<T, ConditionalText>) {
                        const Value cond = eval_expr(s.cond, vars_);
                        if (!cond.is_bool()) {
                            throw EvalError("type_mismatch", std::string("condition must be a bool, got ") +
                                                                 to_string(cond.type()));
                        }
                        if (cond.as_bool()) {
                            render(*s.then_branch);
                        } else if (s.else_branch) {
                            render(**s.else_branch);
                        }
                    } else {
                        const std::size_t slot = out_.spans.size();
                        out_.spans.push_back({s.style, length_, length_});
                        render(*s.children);
                        out_.spans[slot].end = length_;
                    }
                },
                span);
        }
    }

    EmittedParagraph take() { return std::move(out_); }

private:
    void append(const std::string& text)
    {
        out_.plain_text += text;
        length_ += utf8::length(text);
    }

    const Vars& vars_;
    EmittedParagraph out_;
    std::size_t length_ = 0;
};

RuntimeError eval_failure(const EvalError& e, const CompiledKnot& knot, int line)
{
    return RuntimeError("eval_error", knot.name + ":" + std::to_string(line) + ": " + e.what(), knot.name, line,
                        e.code());
}

json value_to_json(const Value& v)
{
    switch (v.type()) {
    case ValueType::Int: return v.as_int();
    case ValueType::Str: return v.as_str();
    case ValueType::Bool: return v.as_bool();
    }
    return nullptr;
}

[[noreturn]] void malformed(const std::string& why)
{
    throw RuntimeError("malformed_save", "malformed save: " + why);
}

}  // namespace

StyleTag::Align EmittedParagraph::align() const
{
    for (const StyledRange& r : spans) {
        if (r.style.kind == StyleTag::Kind::Align) {
            return r.style.align;
        }
    }
    return StyleTag::Align::Left;
}

EmittedParagraph render_inline(const InlineContent& content, const Vars& vars)
{
    Renderer r(vars);
    r.render(content);
    return r.take();
}

Session::Session(std::shared_ptr<const StoryGraph> graph, SessionOptions options)
    : graph_(std::move(graph)), options_(options)
{
}

Session Session::create(std::shared_ptr<const StoryGraph> graph, const Vars& overrides, SessionOptions options)
{
    Session s(std::move(graph), options);
    for (const story::VarInit& v : s.graph_->var_decls) {
        s.vars_.emplace(v.name, v.value);
    }
    for (const auto& [name, value] : overrides) {
        const auto it = s.vars_.find(name);
        if (it == s.vars_.end()) {
            throw RuntimeError("unknown_override", "override for undeclared variable '" + name + "'");
        }
        if (!it->second.same_type(value)) {
            throw RuntimeError("override_type_mismatch", "override for '" + name + "' must be " +
                                                             to_string(it->second.type()) + ", got " +
                                                             to_string(value.type()));
        }
        it->second = value;
    }
    s.position_ = {s.graph_->start, 0};
    return s;
}

std::string Session::current_knot_name() const
{
    return graph_->knot(position_.knot).name;
}

Advance Session::continue_story()
{
    if (finished_) {
        throw RuntimeError("story_finished", "the story has already ended");
    }
    if (pending_) {
        throw RuntimeError("choices_pending", "choose one of the pending choices first");
    }

    // Work on copies and commit only when the whole advance succeeds.
    Position pos = position_;
    Vars vars = vars_;
    Advance adv;
    std::vector<std::string> pending_tags;
    std::size_t steps = 0;
    bool ended = false;
    adv.visited.push_back(pos.knot);

    for (;;) {
        if (steps == options_.step_limit) {
            throw RuntimeError("step_limit_exceeded",
                               "more than " + std::to_string(options_.step_limit) +
                                   " statements without reaching a choice or END (divert loop?)",
                               graph_->knot(pos.knot).name);
        }
        ++steps;
        const CompiledKnot& knot = graph_->knot(pos.knot);

        if (pos.statement < knot.body.size()) {
            const story::BodyStatement& st = knot.body[pos.statement];
            try {
                if (const auto* p = std::get_if<story::BodyParagraph>(&st.node)) {
                    EmittedParagraph para = render_inline(p->content, vars);
                    if (!para.plain_text.empty()) {
                        para.knot = pos.knot;
                        para.statement = pos.statement;
                        para.tags = std::move(pending_tags);
                        pending_tags.clear();
                        adv.paragraphs.push_back(std::move(para));
                    }
                } else if (const auto* a = std::get_if<story::BodyAssign>(&st.node)) {
                    Value v = eval_expr(a->value, vars);
                    Value& slot = vars.at(a->name);
                    if (!slot.same_type(v)) {
                        throw EvalError("type_mismatch", "cannot assign " + std::string(to_string(v.type())) +
                                                             " to " + to_string(slot.type()) + " variable '" +
                                                             a->name + "'");
                    }
                    slot = std::move(v);
                } else if (const auto* t = std::get_if<story::BodyTag>(&st.node)) {
                    pending_tags.push_back(t->text);
                }
            } catch (const EvalError& e) {
                throw eval_failure(e, knot, st.line);
            }
            ++pos.statement;
            continue;
        }

        if (const auto* d = std::get_if<ExitDivert>(&knot.exit)) {
            if (d->target.is_end()) {
                ended = true;
                break;
            }
            pos = {d->target, 0};
            pending_tags.clear();
            adv.visited.push_back(pos.knot);
            continue;
        }
        if (std::holds_alternative<ExitFallOff>(knot.exit)) {
            ended = true;
            break;
        }

        for (const CompiledChoice& c : knot.choices) {
            bool open = true;
            if (c.guard) {
                try {
                    const Value g = eval_expr(*c.guard, vars);
                    if (!g.is_bool()) {
                        throw EvalError("type_mismatch",
                                        std::string("choice guard must be a bool, got ") + to_string(g.type()));
                    }
                    open = g.as_bool();
                } catch (const EvalError& e) {
                    throw eval_failure(e, knot, c.line);
                }
            }
            if (open) {
                adv.choices.push_back({adv.choices.size(), c.label, c.index});
            }
        }
        if (adv.choices.empty()) {
            throw RuntimeError("no_satisfiable_choice", "every choice guard in '" + knot.name + "' is false",
                               knot.name, knot.choices.front().line);
        }
        break;
    }

    position_ = pos;
    vars_ = std::move(vars);
    transcript_.insert(transcript_.end(), adv.paragraphs.begin(), adv.paragraphs.end());
    if (ended) {
        finished_ = true;
        adv.ended = true;
    } else {
        pending_ = adv.choices;
    }
    steps_taken_ += steps;
    ++seq_;
    return adv;
}

void Session::choose(std::size_t choice_id)
{
    if (!pending_) {
        throw RuntimeError("no_pending_choices", "there are no choices to make right now");
    }
    if (choice_id >= pending_->size()) {
        throw RuntimeError("invalid_choice_id", "choice " + std::to_string(choice_id) + " is not one of the " +
                                                    std::to_string(pending_->size()) + " pending choices");
    }
    const CompiledKnot& knot = graph_->knot(position_.knot);
    const CompiledChoice& choice = knot.choices.at((*pending_)[choice_id].source_index);

    std::optional<EmittedParagraph> appended;
    if (choice.appended) {
        try {
            appended = render_inline(*choice.appended, vars_);
        } catch (const EvalError& e) {
            throw eval_failure(e, knot, choice.line);
        }
        appended->knot = position_.knot;
        appended->statement = knot.body.size();
    }

    if (appended && !appended->plain_text.empty()) {
        transcript_.push_back(std::move(*appended));
    }
    pending_.reset();
    if (choice.target.is_end()) {
        finished_ = true;
    } else {
        position_ = {choice.target, 0};
    }
    ++seq_;
}

void Session::set_variable(std::string_view name, Value value)
{
    const auto it = vars_.find(name);
    if (it == vars_.end()) {
        throw RuntimeError("unknown_variable", "variable '" + std::string(name) + "' is not declared");
    }
    if (!it->second.same_type(value)) {
        throw RuntimeError("type_mismatch", "variable '" + std::string(name) + "' holds " +
                                                to_string(it->second.type()) + ", got " + to_string(value.type()));
    }
    it->second = std::move(value);
    ++seq_;
}

std::string Session::snapshot() const
{
    json vars = json::object();
    for (const auto& [name, value] : vars_) {
        vars[name] = value_to_json(value);
    }
    json pending = json::array();
    if (pending_) {
        for (const PresentedChoice& c : *pending_) {
            pending.push_back({{"id", c.id}, {"label", c.label}, {"source_index", c.source_index}});
        }
    }
    json blob = {
        {"version", kSaveVersion},
        {"story_hash", hash_to_hex(graph_->content_hash)},
        {"position", {{"knot", position_.knot.value}, {"stmt", position_.statement}}},
        {"vars", std::move(vars)},
        {"seq", seq_},
        {"steps", steps_taken_},
        {"finished", finished_},
        {"transcript_len", transcript_length()},
        {"pending", std::move(pending)},
    };
    return blob.dump();
}

Session Session::restore(std::shared_ptr<const StoryGraph> graph, std::string_view blob, SessionOptions options)
{
    json j;
    try {
        j = json::parse(blob);
    } catch (const json::exception& e) {
        malformed(e.what());
    }
    if (!j.is_object()) {
        malformed("not a JSON object");
    }
    if (!j.contains("version") || !j["version"].is_number_integer()) {
        malformed("missing version");
    }
    if (j["version"].get<std::int64_t>() != kSaveVersion) {
        throw RuntimeError("unsupported_save_version",
                           "save version " + j["version"].dump() + " is not supported (expected 1)");
    }
    const auto field = [&](const char* key, auto check) -> const json& {
        if (!j.contains(key) || !check(j[key])) {
            malformed(std::string("missing or invalid '") + key + "'");
        }
        return j[key];
    };
    const auto is_string = [](const json& v) { return v.is_string(); };
    const auto is_count = [](const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); };
    const auto is_bool = [](const json& v) { return v.is_boolean(); };
    const auto is_object = [](const json& v) { return v.is_object(); };
    const auto is_array = [](const json& v) { return v.is_array(); };

    if (field("story_hash", is_string).get<std::string>() != hash_to_hex(graph->content_hash)) {
        throw RuntimeError("story_hash_mismatch", "save belongs to a different story");
    }

    Session s(std::move(graph), options);
    const StoryGraph& g = *s.graph_;

    const json& pos = field("position", is_object);
    if (!pos.contains("knot") || !pos["knot"].is_number_integer() || !pos.contains("stmt") || !is_count(pos["stmt"])) {
        malformed("invalid position");
    }
    const std::int64_t knot = pos["knot"].get<std::int64_t>();
    if (knot < 0 || knot >= static_cast<std::int64_t>(g.knots.size())) {
        malformed("position names no knot");
    }
    s.position_ = {KnotId{static_cast<std::int32_t>(knot)}, pos["stmt"].get<std::size_t>()};
    const CompiledKnot& at = g.knot(s.position_.knot);
    if (s.position_.statement > at.body.size()) {
        malformed("statement index past the end of the knot");
    }

    const json& vars = field("vars", is_object);
    if (vars.size() != g.var_decls.size()) {
        malformed("variable set does not match the story");
    }
    for (const story::VarInit& decl : g.var_decls) {
        if (!vars.contains(decl.name)) {
            malformed("missing variable '" + decl.name + "'");
        }
        const json& v = vars[decl.name];
        Value value;
        if (v.is_boolean()) {
            value = Value::boolean(v.get<bool>());
        } else if (v.is_string()) {
            value = Value::text(v.get<std::string>());
        } else if (v.is_number_integer() && !(v.is_number_unsigned() && v.get<std::uint64_t>() > INT64_MAX)) {
            value = Value::integer(v.get<std::int64_t>());
        } else {
            malformed("variable '" + decl.name + "' has an invalid value");
        }
        if (!value.same_type(decl.value)) {
            malformed("variable '" + decl.name + "' has the wrong type");
        }
        s.vars_.emplace(decl.name, std::move(value));
    }

    s.seq_ = field("seq", is_count).get<std::uint64_t>();
    s.steps_taken_ = j.contains("steps") && is_count(j["steps"]) ? j["steps"].get<std::uint64_t>() : 0;
    s.finished_ = field("finished", is_bool).get<bool>();
    s.transcript_offset_ = field("transcript_len", is_count).get<std::size_t>();

    const json& pending = field("pending", is_array);
    if (!pending.empty()) {
        if (s.finished_ || !std::holds_alternative<story::ExitChoicePoint>(at.exit) ||
            s.position_.statement != at.body.size()) {
            malformed("pending choices outside a choice point");
        }
        std::vector<PresentedChoice> choices;
        for (const json& c : pending) {
            if (!c.is_object() || !c.contains("id") || !is_count(c["id"]) || !c.contains("label") ||
                !c["label"].is_string() || !c.contains("source_index") || !is_count(c["source_index"])) {
                malformed("invalid pending choice");
            }
            PresentedChoice pc{c["id"].get<std::size_t>(), c["label"].get<std::string>(),
                               c["source_index"].get<std::size_t>()};
            if (pc.id != choices.size() || pc.source_index >= at.choices.size() ||
                at.choices[pc.source_index].label != pc.label ||
                (!choices.empty() && pc.source_index <= choices.back().source_index)) {
                malformed("pending choice does not match the story");
            }
            choices.push_back(std::move(pc));
        }
        s.pending_ = std::move(choices);
    }
    return s;
}

}  // namespace taleweaver::runtime
