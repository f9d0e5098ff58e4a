#pragma once

#include "taleweaver/director/server.hpp"
#include "taleweaver/markup/ast.hpp"
#include "taleweaver/story/graph.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tw_test {

std::filesystem::path stories_dir();
std::filesystem::path fixtures_dir();
std::vector<std::filesystem::path> story_files();  // sorted

std::string read_file(const std::filesystem::path& p);

// Throw std::runtime_error carrying the first problem.
taleweaver::markup::StoryDocument parse_ok(std::string_view source);
std::shared_ptr<const taleweaver::story::StoryGraph> compile_ok(std::string_view source);

// A DirectorServer running on its own thread, on ephemeral ports.
class RunningServer {
public:
    explicit RunningServer(std::shared_ptr<const taleweaver::story::StoryGraph> graph,
                           taleweaver::director::ServeConfig config = loopback());
    ~RunningServer();

    std::uint16_t port() const { return server_.port(); }
    std::uint16_t ws_port() const { return server_.ws_port().value_or(0); }
    // Waits for run() to return (exit_on_end servers).
    bool wait_exit(std::chrono::milliseconds limit);

    static taleweaver::director::ServeConfig loopback();

private:
    taleweaver::director::DirectorServer server_;
    std::thread thread_;
    std::atomic<bool> done_{false};
};

}  // namespace tw_test
