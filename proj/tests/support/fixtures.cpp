#include "fixtures.hpp"

#include "taleweaver/markup/parser.hpp"
#include "taleweaver/story/compiler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tw_test {

namespace fs = std::filesystem;

fs::path stories_dir() { return TW_STORIES_DIR; }
fs::path fixtures_dir() { return TW_FIXTURES_DIR; }

std::vector<fs::path> story_files()
{
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(stories_dir())) {
        if (entry.path().extension() == ".tale") {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + p.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

taleweaver::markup::StoryDocument parse_ok(std::string_view source)
{
    auto parsed = taleweaver::markup::parse_story(source);
    if (auto* errors = std::get_if<std::vector<taleweaver::markup::ParseError>>(&parsed)) {
        throw std::runtime_error("parse failed: " + taleweaver::markup::format(errors->front()));
    }
    return std::get<taleweaver::markup::StoryDocument>(std::move(parsed));
}

std::shared_ptr<const taleweaver::story::StoryGraph> compile_ok(std::string_view source)
{
    auto out = taleweaver::story::compile(parse_ok(source));
    if (!out.ok()) {
        throw std::runtime_error("compile failed: " + taleweaver::story::format_line(out.diagnostics.front()));
    }
    return std::make_shared<const taleweaver::story::StoryGraph>(std::move(*out.graph));
}

RunningServer::RunningServer(std::shared_ptr<const taleweaver::story::StoryGraph> graph,
                             taleweaver::director::ServeConfig config)
    : server_(std::move(graph), std::move(config))
{
    server_.bind();
    thread_ = std::thread([this] {
        server_.run();
        done_ = true;
    });
}

RunningServer::~RunningServer()
{
    server_.stop();
    thread_.join();
}

bool RunningServer::wait_exit(std::chrono::milliseconds limit)
{
    const auto until = std::chrono::steady_clock::now() + limit;
    while (!done_) {
        if (std::chrono::steady_clock::now() > until) {
            return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return true;
}

taleweaver::director::ServeConfig RunningServer::loopback()
{
    taleweaver::director::ServeConfig c;
    c.port = 0;
    c.ws_port = 0;
    return c;
}

}  // namespace tw_test
