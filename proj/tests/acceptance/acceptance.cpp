// One line per acceptance criterion. Exit status is nonzero if any fails.
#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include "taleweaver/director/client.hpp"
#include "taleweaver/director/server.hpp"
#include "taleweaver/layout/layout.hpp"
#include "taleweaver/markup/parser.hpp"
#include "taleweaver/markup/printer.hpp"
#include "taleweaver/runtime/session.hpp"
#include "taleweaver/story/compiler.hpp"

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <functional>
#include <future>
#include <set>
#include <sstream>

using namespace taleweaver;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    std::vector<std::string> problems;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            if (problems.size() < 5) problems.push_back(what);
        }
    }
};

bool criterion(const std::string& name, double budget_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0) o.require(secs < budget_s, fmt::format("took {:.2f} s, budget {} s", secs, budget_s));
    fmt::print("{} {} ({}; {:.2f} s)\n", o.pass ? "PASS" : "FAIL", name, o.detail, secs);
    for (const auto& p : o.problems) fmt::print("    {}\n", p);
    std::fflush(stdout);
    return o.pass;
}

std::vector<director::WireParagraph> wire(std::span<const runtime::EmittedParagraph> ps)
{
    std::vector<director::WireParagraph> out;
    for (const auto& p : ps) out.push_back(director::to_wire(p));
    return out;
}

void round_trip(Outcome& o)
{
    int stories = 0;
    for (const auto& path : tw_test::story_files()) {
        const markup::StoryDocument doc = tw_test::parse_ok(tw_test::read_file(path));
        const markup::StoryDocument again = tw_test::parse_ok(markup::print_story(doc));
        o.require(again == doc, "round trip differs for " + path.filename().string());
        ++stories;
    }
    o.require(stories >= 10, "fewer than 10 handwritten stories");
    tw_test::Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const markup::StoryDocument doc = tw_test::random_document(rng);
        const std::string printed = markup::print_story(doc);
        const markup::StoryDocument again = tw_test::parse_ok(printed);
        o.require(again == doc, fmt::format("random document {} differs", i));
        o.require(markup::print_story(again) == printed, fmt::format("random document {} prints differently", i));
    }
    o.detail = fmt::format("{} handwritten + 200 random", stories);
}

std::vector<story::Diagnostic> lint(const std::string& src)
{
    story::CompileOutput out = story::compile(tw_test::parse_ok(src));
    std::vector<story::Diagnostic> ds = out.diagnostics;
    if (out.ok()) {
        const auto r = story::reachability(*out.graph);
        ds.insert(ds.end(), r.warnings.begin(), r.warnings.end());
    }
    return ds;
}

bool reported(const std::vector<story::Diagnostic>& ds, story::DiagnosticCode code, const std::string& knot)
{
    return std::any_of(ds.begin(), ds.end(),
                       [&](const story::Diagnostic& d) { return d.code == code && (knot.empty() || d.knot == knot); });
}

void lint_injection(Outcome& o)
{
    using story::DiagnosticCode;
    int injected = 0;
    int found = 0;
    std::size_t clean_diags = 0;
    for (const auto& path : tw_test::story_files()) {
        const std::string src = tw_test::read_file(path);
        const std::string name = path.filename().string();
        clean_diags += lint(src).size();

        const auto end_at = src.find("-> END");
        const auto header = src.find("== ");
        const auto header_end = src.find('\n', header);
        o.require(end_at != std::string::npos && header != std::string::npos, name + " has no END divert");
        if (end_at == std::string::npos || header == std::string::npos) continue;
        auto first_knot = src.substr(header + 3, header_end - header - 3);
        first_knot = first_knot.substr(0, first_knot.find_first_of(" #\r"));

        struct Case {
            std::string source;
            DiagnosticCode code;
            std::string knot;
        };
        std::string dangling = src;
        dangling.replace(end_at, 6, "-> missing_knot");
        std::string dead = src;
        dead.replace(end_at, 6, "-> stuck_zz");
        dead += "\n== stuck_zz\nNothing leads on from here.\n";
        std::string undeclared = src;
        undeclared.insert(header_end + 1, "A stray {undeclared_zz} value.\n\n");
        const std::vector<Case> cases = {
            {dangling, DiagnosticCode::DanglingDivert, ""},
            {src + "\n== orphan_zz\nNobody comes here.\n-> END\n", DiagnosticCode::UnreachableKnot, "orphan_zz"},
            {dead, DiagnosticCode::DeadEnd, "stuck_zz"},
            {undeclared, DiagnosticCode::UndeclaredVariable, first_knot},
        };
        for (const Case& c : cases) {
            ++injected;
            const bool hit = reported(lint(c.source), c.code, c.knot);
            found += hit;
            o.require(hit, fmt::format("{}: missed {}", name, story::to_string(c.code)));
        }
    }
    o.require(clean_diags == 0, fmt::format("{} diagnostics on the clean corpus", clean_diags));
    o.detail = fmt::format("recall {}/{}, {} diagnostics on clean stories", found, injected, clean_diags);
}

void path_oracle(Outcome& o)
{
    using runtime::Session;
    tw_test::Rng rng(8080);
    std::uint64_t total = 0;
    for (int i = 0; i < 100; ++i) {
        const auto model = tw_test::random_model(rng, tw_test::uniform(rng, 1, 8), 3, true);
        auto g = tw_test::compile_ok(tw_test::render_model(model));

        std::set<tw_test::ModelPath> driven;
        tw_test::ModelPath current;
        std::function<void(Session)> go = [&](Session s) {
            const bool done = s.finished();
            runtime::Advance a;
            if (!done) a = s.continue_story();
            for (story::KnotId k : a.visited) current.steps.push_back({static_cast<int>(k.value), -1});
            if (done || a.ended) {
                tw_test::ModelPath p = current;
                // Ended by END unless the last knot simply ran out of statements.
                const auto& last = model.nodes[p.steps.back().first];
                p.reached_end = !(last.choices.empty() && !last.divert);
                driven.insert(p);
            } else {
                for (const auto& c : *s.pending()) {
                    Session next = s;
                    next.choose(c.id);
                    current.steps.back().second = static_cast<int>(c.source_index);
                    go(next);
                }
                current.steps.back().second = -1;
            }
            current.steps.resize(current.steps.size() - a.visited.size());
        };
        go(Session::create(g));

        std::set<tw_test::ModelPath> enumerated;
        for (const story::Path& p : story::enumerate_paths(*g, 100)) {
            tw_test::ModelPath mp;
            for (const auto& s : p.steps) mp.steps.push_back({static_cast<int>(s.knot.value), s.choice ? static_cast<int>(*s.choice) : -1});
            mp.reached_end = p.end == story::PathEnd::End;
            enumerated.insert(mp);
        }
        const auto listed = tw_test::list_paths(model);
        const std::uint64_t count = tw_test::count_paths(model);
        o.require(driven == enumerated, fmt::format("model {}: driving gives {} paths, enumerate_paths {}", i,
                                                    driven.size(), enumerated.size()));
        o.require(enumerated == std::set<tw_test::ModelPath>(listed.begin(), listed.end()),
                  fmt::format("model {}: enumerate_paths disagrees with the recursive listing", i));
        o.require(enumerated.size() == count, fmt::format("model {}: {} paths, oracle counts {}", i, enumerated.size(), count));
        total += count;
    }
    o.detail = fmt::format("100 graphs, {} paths", total);
}

// Drives a session with the picks from `from` until `to`, recording each event.
void drive(runtime::Session& s, const std::vector<int>& picks, std::size_t from, std::size_t to, std::vector<std::string>& log)
{
    for (std::size_t i = from; i < to && !s.finished(); ++i) {
        if (!log.empty() && log.back() != "ok") return;
        try {
            if (const auto& pending = s.pending()) {
                s.choose(static_cast<std::size_t>(picks[i]) % pending->size());
            } else if (s.continue_story().ended) {
                log.push_back("end");
                return;
            }
            log.push_back("ok");
        } catch (const runtime::RuntimeError& e) {
            log.push_back(std::string(e.code()));
        }
    }
}

void bisimulation(Outcome& o)
{
    using runtime::Session;
    tw_test::Rng rng(555);
    int cut_with_pending = 0;
    for (int i = 0; i < 100; ++i) {
        auto g = tw_test::compile_ok(tw_test::random_rich_story(rng, tw_test::uniform(rng, 2, 8)));
        std::vector<int> picks(60);
        for (int& p : picks) p = tw_test::uniform(rng, 0, 5);
        const std::size_t cut = static_cast<std::size_t>(tw_test::uniform(rng, 1, 20));

        Session twin = Session::create(g);
        std::vector<std::string> twin_log;
        drive(twin, picks, 0, picks.size(), twin_log);

        Session s = Session::create(g);
        std::vector<std::string> log;
        drive(s, picks, 0, cut, log);
        cut_with_pending += s.pending().has_value();
        const auto before = wire(s.transcript());
        Session restored = Session::restore(g, s.snapshot());
        o.require(restored.transcript_offset() == before.size(), fmt::format("session {}: wrong transcript offset", i));
        drive(restored, picks, cut, picks.size(), log);

        auto joined = before;
        const auto after = wire(restored.transcript());
        joined.insert(joined.end(), after.begin(), after.end());
        o.require(joined == wire(twin.transcript()), fmt::format("session {}: transcripts differ", i));
        o.require(log == twin_log, fmt::format("session {}: event logs differ", i));
        o.require(restored.snapshot() == twin.snapshot(), fmt::format("session {}: final state differs", i));
    }
    o.detail = fmt::format("100 sessions, {} restored with choices pending", cut_with_pending);
}

void protocol_fuzz(Outcome& o)
{
    using namespace director;
    tw_test::Rng rng(9001);
    int round_tripped = 0;
    for (int i = 0; i < 10'000; ++i) {
        const Frame f = tw_test::random_frame(rng);
        const bool same = decode_frame(encode_frame(f)) == f;
        round_tripped += same;
        o.require(same, "frame did not round-trip: " + encode_frame(f));
    }
    int rejected = 0;
    for (int i = 0; i < 10'000; ++i) {
        const std::string line = tw_test::random_line(rng);
        try {
            decode_frame(line);
        } catch (const ProtocolError&) {
            ++rejected;
        }
    }
    o.detail = fmt::format("{}/10000 frames round-tripped, 10000 lines decoded without a crash ({} rejected)",
                           round_tripped, rejected);
}

void e2e(Outcome& o)
{
    using namespace director;
    auto g = tw_test::compile_ok(tw_test::read_file(tw_test::fixtures_dir() / "three_points.tale"));
    const std::size_t n = g->knot(g->start).choices.size();
    o.require(n == 3, "fixture hall should offer three choices");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<std::vector<std::uint64_t>> runs;
        for (int run = 0; run < 2; ++run) {
            tw_test::RunningServer server(g);
            const AutoDirectorResult r = run_auto_director({"127.0.0.1", server.port(), 10s}, RandomPolicy{seed});
            std::vector<std::uint64_t> ids;
            for (const Decision& d : r.decisions) ids.push_back(d.id);
            o.require(ids.size() == 3, fmt::format("seed {}: {} decisions", seed, ids.size()));
            runs.push_back(ids);
        }
        o.require(runs[0] == runs[1], fmt::format("seed {}: runs differ", seed));
        tw_test::RefSplitMix ref(seed);
        o.require(!runs[0].empty() && runs[0][0] == ref.next() % n, fmt::format("seed {}: first decision", seed));
    }
    o.detail = "20 seeds x 2 runs";
}

void single_director(Outcome& o)
{
    using namespace director;
    auto g = tw_test::compile_ok(tw_test::read_file(tw_test::fixtures_dir() / "three_points.tale"));
    tw_test::RunningServer server(g);
    std::vector<int> grants;
    for (int round = 0; round < 20; ++round) {
        std::vector<std::unique_ptr<LineClient>> clients;
        for (int i = 0; i < 8; ++i) {
            clients.push_back(std::make_unique<LineClient>("127.0.0.1", server.port()));
            clients.back()->receive();  // hello
            clients.back()->receive();  // status
        }
        std::vector<std::future<bool>> granted;
        for (auto& c : clients) {
            granted.push_back(std::async(std::launch::async, [&c] {
                c->send(Claim{});
                const Frame f = c->receive();
                const auto* h = std::get_if<Hello>(&f);
                return h != nullptr && h->role == "director";
            }));
        }
        int count = 0;
        for (auto& f : granted) count += f.get();
        grants.push_back(count);
        o.require(count == 1, fmt::format("round {}: {} grants", round, count));
        clients.clear();
        // Wait for the server to drop the director before the next round.
        for (int attempt = 0; attempt < 200; ++attempt) {
            LineClient probe("127.0.0.1", server.port());
            probe.receive();
            probe.receive();
            probe.send(Claim{});
            if (std::holds_alternative<Hello>(probe.receive())) break;
            std::this_thread::sleep_for(5ms);
        }
    }
    o.detail = "8 concurrent claims x 20 rounds, one grant each";
}

void layout_properties(Outcome& o)
{
    using namespace layout;
    auto check_box = [&](const std::vector<WordBox>& b, std::size_t i, std::int64_t x0, std::int64_t y0,
                         std::int64_t x1, std::int64_t y1, const char* what) {
        o.require(b.size() > i && std::tie(b[i].x0, b[i].y0, b[i].x1, b[i].y1) == std::tie(x0, y0, x1, y1), what);
    };
    auto fixed = layout_paragraphs(std::vector<ParagraphInput>{{"Hello world"}}, FontMetrics{}, Tablet{200, 600});
    check_box(fixed, 0, 0, 0, 50, 24, "Hello at width 200");
    check_box(fixed, 1, 60, 0, 110, 24, "world at width 200");
    fixed = layout_paragraphs(std::vector<ParagraphInput>{{"Hello world"}}, FontMetrics{}, Tablet{100, 600});
    check_box(fixed, 1, 0, 24, 50, 48, "world at width 100");
    fixed = layout_paragraphs(std::vector<ParagraphInput>{{"abcdefghijklmno"}}, FontMetrics{}, Tablet{100, 600});
    check_box(fixed, 0, 0, 0, 150, 24, "overflowing word");
    o.require(fixed.size() == 1 && fixed[0].overflow, "overflow flag");

    tw_test::Rng rng(31337);
    std::size_t boxes_seen = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string text = tw_test::random_paragraph_text(rng);
        const FontMetrics m = tw_test::random_metrics(rng);
        const std::int64_t width = tw_test::uniform(rng, 1, 400);
        const auto align = static_cast<Align>(tw_test::uniform(rng, 0, 2));
        const auto boxes = layout_paragraphs(std::vector<ParagraphInput>{{text, align}}, m, Tablet{width, 1'000'000});
        boxes_seen += boxes.size();
        std::string joined;
        for (std::size_t a = 0; a < boxes.size(); ++a) {
            const WordBox& b = boxes[a];
            if (!joined.empty()) joined += ' ';
            joined += b.text;
            o.require(b.x0 < b.x1 && b.y0 < b.y1, fmt::format("paragraph {}: empty box", i));
            o.require(hit_test(boxes, (b.x0 + b.x1) / 2, (b.y0 + b.y1) / 2) == &b,
                      fmt::format("paragraph {}: midpoint of box {} misses it", i, a));
            if (a > 0) {
                const WordBox& p = boxes[a - 1];
                o.require(p.line < b.line || (p.line == b.line && p.x1 <= b.x0),
                          fmt::format("paragraph {}: boxes {} and {} out of order", i, a - 1, a));
            }
            for (std::size_t c = a + 1; c < boxes.size(); ++c) {
                const WordBox& q = boxes[c];
                const bool apart = b.x1 <= q.x0 || q.x1 <= b.x0 || b.y1 <= q.y0 || q.y1 <= b.y0;
                o.require(apart, fmt::format("paragraph {}: boxes {} and {} overlap", i, a, c));
            }
        }
        o.require(joined == tw_test::normalize_ws(text), fmt::format("paragraph {}: text not reconstructed", i));
    }
    o.detail = fmt::format("3 fixed examples, 1000 paragraphs, {} boxes", boxes_seen);
}

}  // namespace

int main()
{
    spdlog::set_level(spdlog::level::warn);
    bool ok = true;
    ok &= criterion("parser round-trip", 10, round_trip);
    ok &= criterion("lint recall and precision", 0, lint_injection);
    ok &= criterion("path oracle equivalence", 30, path_oracle);
    ok &= criterion("runtime bisimulation under persistence", 0, bisimulation);
    ok &= criterion("protocol fuzz", 10, protocol_fuzz);
    ok &= criterion("end-to-end determinism", 0, e2e);
    ok &= criterion("single director", 0, single_director);
    ok &= criterion("layout properties", 0, layout_properties);
    return ok ? 0 : 1;
}
