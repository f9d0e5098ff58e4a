#include "cli.hpp"

#include "taleweaver/director/client.hpp"
#include "taleweaver/director/server.hpp"
#include "taleweaver/layout/layout.hpp"
#include "taleweaver/markup/parser.hpp"
#include "taleweaver/runtime/session.hpp"
#include "taleweaver/story/compiler.hpp"
#include "taleweaver/util/splitmix64.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <sstream>
#include <thread>

namespace taleweaver::cli {

using ojson = nlohmann::ordered_json;

namespace {

struct Failure {
    int code;
    std::string message;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Failure{kUsageError, "cannot read '" + path + "'"};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Loaded {
    std::shared_ptr<const story::StoryGraph> graph;
    std::vector<story::Diagnostic> diagnostics;  // warnings, plus reachability
};

ojson diagnostic_json(const story::Diagnostic& d)
{
    ojson j;
    j["severity"] = story::to_string(d.severity);
    j["code"] = story::to_string(d.code);
    j["knot"] = d.knot ? ojson(*d.knot) : ojson(nullptr);
    j["line"] = d.line;
    j["message"] = d.message;
    return j;
}

ojson parse_error_json(const markup::ParseError& e)
{
    ojson j;
    j["severity"] = "ERROR";
    j["code"] = markup::to_string(e.code);
    j["knot"] = nullptr;
    j["line"] = e.line;
    j["column"] = e.column;
    j["message"] = e.message;
    return j;
}

// Parses and compiles. Story errors are written to `report` (as text or JSON
// lines) and raised as a Failure with exit code 1.
Loaded load(const std::string& path, std::ostream& report, bool json_lines)
{
    const std::string source = read_file(path);
    auto parsed = markup::parse_story(source);
    if (auto* errors = std::get_if<std::vector<markup::ParseError>>(&parsed)) {
        for (const markup::ParseError& e : *errors) {
            if (json_lines) {
                report << parse_error_json(e).dump() << '\n';
            } else {
                report << "ERROR " << markup::to_string(e.code) << ' ' << e.line << ':' << e.column << ' '
                       << e.message << '\n';
            }
        }
        throw Failure{kStoryError, ""};
    }
    story::CompileOutput compiled = story::compile(std::get<markup::StoryDocument>(parsed));
    Loaded loaded;
    loaded.diagnostics = compiled.diagnostics;
    if (compiled.ok()) {
        const story::Reachability reach = story::reachability(*compiled.graph);
        loaded.diagnostics.insert(loaded.diagnostics.end(), reach.warnings.begin(), reach.warnings.end());
        loaded.graph = std::make_shared<const story::StoryGraph>(std::move(*compiled.graph));
    }
    if (!loaded.graph) {
        for (const story::Diagnostic& d : loaded.diagnostics) {
            if (json_lines) {
                report << diagnostic_json(d).dump() << '\n';
            } else {
                report << story::format_line(d) << '\n';
            }
        }
        throw Failure{kStoryError, ""};
    }
    return loaded;
}

// `name=value`, typed by the variable's declaration.
std::pair<std::string, Value> parse_override(const story::StoryGraph& graph, const std::string& spec)
{
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Failure{kUsageError, "--var expects name=value, got '" + spec + "'"};
    }
    const std::string name = spec.substr(0, eq);
    const std::string text = spec.substr(eq + 1);
    const auto decl = std::find_if(graph.var_decls.begin(), graph.var_decls.end(),
                                   [&](const story::VarInit& v) { return v.name == name; });
    if (decl == graph.var_decls.end()) {
        throw Failure{kUsageError, "--var: the story declares no variable '" + name + "'"};
    }
    switch (decl->value.type()) {
    case ValueType::Int: {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
            throw Failure{kUsageError, "--var " + name + ": '" + text + "' is not a 64-bit integer"};
        }
        return {name, Value::integer(v)};
    }
    case ValueType::Bool:
        if (text == "true" || text == "false") {
            return {name, Value::boolean(text == "true")};
        }
        throw Failure{kUsageError, "--var " + name + ": expected true or false, got '" + text + "'"};
    case ValueType::Str:
        break;
    }
    return {name, Value::text(text)};
}

runtime::Vars parse_overrides(const story::StoryGraph& graph, const std::vector<std::string>& specs)
{
    runtime::Vars vars;
    for (const std::string& spec : specs) {
        auto [name, value] = parse_override(graph, spec);
        vars.insert_or_assign(std::move(name), std::move(value));
    }
    return vars;
}

std::vector<std::uint64_t> parse_choice_list(const std::string& text)
{
    std::vector<std::uint64_t> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            throw Failure{kUsageError, "--choices has an empty entry"};
        }
        item = item.substr(b, e - b + 1);
        std::uint64_t id = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), id);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw Failure{kUsageError, "--choices: '" + item + "' is not a choice id"};
        }
        ids.push_back(id);
    }
    return ids;
}

// Picks choice ids for run and layout when nobody is at the keyboard.
class AutoPick {
public:
    enum class Mode { First, Seed, Script };

    AutoPick(Mode mode, std::uint64_t seed, std::vector<std::uint64_t> script)
        : mode_(mode), rng_(seed), script_(std::move(script))
    {
    }

    std::size_t pick(const std::vector<runtime::PresentedChoice>& choices)
    {
        switch (mode_) {
        case Mode::First: return choices.front().id;
        case Mode::Seed: return choices[rng_.pick(choices.size())].id;
        case Mode::Script: break;
        }
        if (next_ >= script_.size()) {
            throw Failure{kRuntimeError, "script_exhausted: --choices ran out at choice point " +
                                             std::to_string(next_ + 1)};
        }
        const std::uint64_t id = script_[next_++];
        if (id >= choices.size()) {
            throw Failure{kRuntimeError, "invalid_scripted_id: choice " + std::to_string(id) + " of " +
                                             std::to_string(choices.size())};
        }
        return static_cast<std::size_t>(id);
    }

private:
    Mode mode_;
    SplitMix64 rng_;
    std::vector<std::uint64_t> script_;
    std::size_t next_ = 0;
};

struct PlayFlags {
    std::vector<std::string> vars;
    std::optional<std::uint64_t> seed;
    std::string choices;
};

AutoPick make_picker(const PlayFlags& f, AutoPick::Mode fallback)
{
    if (f.seed) {
        return AutoPick(AutoPick::Mode::Seed, *f.seed, {});
    }
    if (!f.choices.empty()) {
        return AutoPick(AutoPick::Mode::Script, 0, parse_choice_list(f.choices));
    }
    return AutoPick(fallback, 0, {});
}

// ---- subcommands -------------------------------------------------------------

int cmd_check(const std::string& path, bool json_lines, std::ostream& out)
{
    const Loaded loaded = load(path, out, json_lines);
    for (const story::Diagnostic& d : loaded.diagnostics) {
        out << (json_lines ? diagnostic_json(d).dump() : story::format_line(d)) << '\n';
    }
    return kOk;
}

int cmd_run(const std::string& path, const PlayFlags& flags, std::istream& in, std::ostream& out,
            std::ostream& err)
{
    const Loaded loaded = load(path, err, false);
    const bool interactive = !flags.seed && flags.choices.empty();
    AutoPick picker = make_picker(flags, AutoPick::Mode::First);
    runtime::Session session = runtime::Session::create(loaded.graph, parse_overrides(*loaded.graph, flags.vars));

    std::size_t printed = 0;
    auto flush = [&] {
        const auto transcript = session.transcript();
        for (; printed < transcript.size(); ++printed) {
            out << transcript[printed].plain_text << "\n\n";
        }
    };

    for (;;) {
        const runtime::Advance step = session.continue_story();
        flush();
        if (step.ended) {
            break;
        }
        std::size_t id = 0;
        if (interactive) {
            for (const runtime::PresentedChoice& c : step.choices) {
                out << "  " << c.id << ") " << c.label << '\n';
            }
            for (;;) {
                out << "> " << std::flush;
                std::string line;
                if (!std::getline(in, line)) {
                    throw Failure{kRuntimeError, "input closed before the story ended"};
                }
                std::size_t v = 0;
                const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
                if (ec == std::errc() && ptr == line.data() + line.size() && v < step.choices.size()) {
                    id = v;
                    break;
                }
                out << "pick a number from 0 to " << step.choices.size() - 1 << '\n';
            }
        } else {
            id = picker.pick(step.choices);
            out << "> " << step.choices[id].label << "\n\n";
        }
        session.choose(id);
        flush();
    }
    out << "--- END ---\n";
    return kOk;
}

class SignalWatcher {
public:
    explicit SignalWatcher(director::DirectorServer& server)
    {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        sigaddset(&set_, SIGUSR1);
        pthread_sigmask(SIG_BLOCK, &set_, &old_);
        thread_ = std::thread([this, &server] {
            int sig = 0;
            sigwait(&set_, &sig);
            if (sig != SIGUSR1) {
                spdlog::info("signal {} received, shutting down", sig);
                server.stop();
            }
        });
    }

    ~SignalWatcher()
    {
        pthread_kill(thread_.native_handle(), SIGUSR1);
        thread_.join();
        pthread_sigmask(SIG_SETMASK, &old_, nullptr);
    }

private:
    sigset_t set_{};
    sigset_t old_{};
    std::thread thread_;
};

int cmd_serve(const std::string& path, director::ServeConfig config, const std::vector<std::string>& vars,
              std::ostream& out, std::ostream& err)
{
    const Loaded loaded = load(path, err, false);
    config.overrides = parse_overrides(*loaded.graph, vars);
    director::DirectorServer server(loaded.graph, std::move(config));
    // Signals are blocked before the banner so an early interrupt is not fatal.
    SignalWatcher watcher(server);
    try {
        server.bind();
    } catch (const director::ServerError& e) {
        throw Failure{kRuntimeError, std::string(e.code()) + ": " + e.what()};
    }
    out << "serving on " << server.port();
    if (const auto ws = server.ws_port()) {
        out << " ws " << *ws;
    }
    out << std::endl;
    server.run();
    return kOk;
}

int cmd_auto(director::AutoDirectorOptions options, const PlayFlags& flags, std::ostream& out)
{
    director::AutoDirectorPolicy policy = director::RandomPolicy{flags.seed.value_or(0)};
    if (!flags.choices.empty()) {
        policy = director::ScriptedPolicy{parse_choice_list(flags.choices)};
    }
    const director::AutoDirectorResult result = director::run_auto_director(options, policy);
    for (const director::Decision& d : result.decisions) {
        ojson j;
        j["seq"] = d.seq;
        j["id"] = d.id;
        out << j.dump() << '\n';
    }
    return kOk;
}

int cmd_paths(const std::string& path, std::size_t max_steps, std::size_t cap, std::ostream& out,
              std::ostream& err)
{
    const Loaded loaded = load(path, err, false);
    const story::StoryGraph& g = *loaded.graph;
    std::vector<story::Path> paths;
    try {
        paths = story::enumerate_paths(g, max_steps, cap);
    } catch (const story::PathExplosion& e) {
        throw Failure{kStoryError, std::string(e.code()) + ": " + e.what()};
    }
    for (const story::Path& p : paths) {
        ojson steps = ojson::array();
        for (const story::PathStep& s : p.steps) {
            ojson step;
            step["knot"] = g.knot(s.knot).name;
            if (s.choice) {
                step["choice"] = *s.choice;
            }
            steps.push_back(std::move(step));
        }
        ojson j;
        j["steps"] = std::move(steps);
        j["end"] = story::to_string(p.end);
        out << j.dump() << '\n';
    }
    return kOk;
}

int cmd_layout(const std::string& path, const PlayFlags& flags, const layout::Tablet& tablet, bool strict,
               std::size_t max_choices, std::ostream& out, std::ostream& err)
{
    const Loaded loaded = load(path, err, false);
    AutoPick picker = make_picker(flags, AutoPick::Mode::First);
    runtime::Session session = runtime::Session::create(loaded.graph, parse_overrides(*loaded.graph, flags.vars));
    for (std::size_t made = 0;; ++made) {
        const runtime::Advance step = session.continue_story();
        if (step.ended || made == max_choices) {
            break;
        }
        session.choose(picker.pick(step.choices));
    }
    std::vector<layout::ParagraphInput> inputs;
    for (const runtime::EmittedParagraph& p : session.transcript()) {
        inputs.push_back({p.plain_text, p.align()});
    }
    const auto boxes = layout::layout_paragraphs(inputs, layout::FontMetrics{}, tablet, {strict});
    for (const layout::WordBox& b : boxes) {
        ojson j;
        j["p"] = b.paragraph_index;
        j["w"] = b.word_index;
        j["text"] = b.text;
        j["line"] = b.line;
        j["x0"] = b.x0;
        j["y0"] = b.y0;
        j["x1"] = b.x1;
        j["y1"] = b.y1;
        j["overflow"] = b.overflow;
        out << j.dump() << '\n';
    }
    return kOk;
}

}  // namespace

void configure_logging()
{
    auto logger = spdlog::stderr_color_mt("taleweaver");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    const char* env = std::getenv("TALEWEAVER_LOG");
    if (env == nullptr || *env == '\0') {
        return;
    }
    const std::string level = env;
    if (level == "error") {
        spdlog::set_level(spdlog::level::err);
    } else if (level == "warn") {
        spdlog::set_level(spdlog::level::warn);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::warn("ignoring TALEWEAVER_LOG={} (want error, warn, info or debug)", level);
    }
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err)
{
    CLI::App app{"taleweaver: branching stories with a live director"};
    app.require_subcommand(1);

    std::string path;
    bool json_lines = false;
    PlayFlags play;
    director::ServeConfig serve;
    bool stay = false;
    bool no_ws = false;
    std::uint16_t ws_port = 7708;
    std::string console_dir;
    director::AutoDirectorOptions auto_opts;
    std::size_t max_steps = 1000;
    std::size_t cap = story::kDefaultPathCap;
    layout::Tablet tablet;
    bool strict = false;
    std::size_t max_choices = 1000;

    auto add_play_flags = [&](CLI::App* sub) {
        sub->add_option("--var", play.vars, "Override a declared variable, name=value")->take_all();
        auto* seed = sub->add_option("--seed", play.seed, "Pick choices with SplitMix64 from this seed");
        sub->add_option("--choices", play.choices, "Comma-separated choice ids to take in order")->excludes(seed);
    };

    auto* check = app.add_subcommand("check", "Parse, compile and lint a story");
    check->add_option("path", path, "Story file")->required();
    check->add_flag("--json", json_lines, "One JSON object per diagnostic");

    auto* run_cmd = app.add_subcommand("run", "Play a story in the terminal");
    run_cmd->add_option("path", path, "Story file")->required();
    add_play_flags(run_cmd);

    auto* serve_cmd = app.add_subcommand("serve", "Serve a story to directors and observers");
    serve_cmd->add_option("path", path, "Story file")->required();
    serve_cmd->add_option("--host", serve.host, "Address to bind")->capture_default_str();
    serve_cmd->add_option("--port", serve.port, "Line-protocol port (0 picks one)")->capture_default_str();
    serve_cmd->add_option("--ws-port", ws_port, "Browser port with /ws (0 picks one)")->capture_default_str();
    serve_cmd->add_flag("--no-ws", no_ws, "Do not open the browser port");
    serve_cmd->add_option("--var", play.vars, "Override a declared variable, name=value")->take_all();
    serve_cmd->add_option("--console-dir", console_dir, "Serve these static files on the browser port")
        ->check(CLI::ExistingDirectory);
    serve_cmd->add_flag("--stay", stay, "Keep serving after the story ends");

    auto* auto_cmd = app.add_subcommand("auto", "Direct a running server automatically");
    auto_cmd->add_option("--host", auto_opts.host, "Server address")->capture_default_str();
    auto_cmd->add_option("--port", auto_opts.port, "Server line-protocol port")->capture_default_str();
    {
        auto* seed = auto_cmd->add_option("--seed", play.seed, "Random policy seed (default 0)");
        auto_cmd->add_option("--choices", play.choices, "Scripted policy: comma-separated ids")->excludes(seed);
    }

    auto* paths_cmd = app.add_subcommand("paths", "List every path through a story, ignoring guards");
    paths_cmd->add_option("path", path, "Story file")->required();
    paths_cmd->add_option("--max-steps", max_steps, "Knots per path before truncating")
        ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()))
        ->capture_default_str();
    paths_cmd->add_option("--cap", cap, "Give up past this many paths")->capture_default_str();

    auto* layout_cmd = app.add_subcommand("layout", "Word boxes for the text of one play-through");
    layout_cmd->add_option("path", path, "Story file")->required();
    layout_cmd->add_option("--width", tablet.width, "Tablet width")->capture_default_str();
    layout_cmd->add_option("--height", tablet.height, "Tablet height")->capture_default_str();
    layout_cmd->add_flag("--strict-height", strict, "Fail when the text runs past the tablet");
    layout_cmd->add_option("--max-choices", max_choices, "Stop after this many choices")->capture_default_str();
    add_play_flags(layout_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*check) {
            const int code = cmd_check(path, json_lines, out);
            return code;
        }
        if (*run_cmd) {
            return cmd_run(path, play, in, out, err);
        }
        if (*serve_cmd) {
            serve.ws_port = no_ws ? std::nullopt : std::optional<std::uint16_t>(ws_port);
            serve.console_dir = console_dir;
            serve.exit_on_end = !stay;
            return cmd_serve(path, std::move(serve), play.vars, out, err);
        }
        if (*auto_cmd) {
            return cmd_auto(auto_opts, play, out);
        }
        if (*paths_cmd) {
            return cmd_paths(path, max_steps, cap, out, err);
        }
        if (*layout_cmd) {
            return cmd_layout(path, play, tablet, strict, max_choices, out, err);
        }
    } catch (const Failure& f) {
        if (!f.message.empty()) {
            err << "taleweaver: " << f.message << '\n';
        }
        return f.code;
    } catch (const Error& e) {
        err << "taleweaver: " << e.code() << ": " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}

}  // namespace taleweaver::cli
