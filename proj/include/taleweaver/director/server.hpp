#pragma once

// Director protocol server. One io_context thread owns the session and every
// connection, so protocol commands are applied strictly one after another.
//
// Line clients connect to the stream port and exchange LF-terminated frames.
// Browser clients upgrade to a WebSocket on the second port at /ws and get
// the same JSON objects, one per text message and without the LF. Plain HTTP
// GETs on that port serve files from console_dir when one is configured.

#include "taleweaver/director/protocol.hpp"
#include "taleweaver/runtime/session.hpp"
#include "taleweaver/story/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace taleweaver::director {

struct ServeConfig {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7707;                    // 0 picks a free port
    std::optional<std::uint16_t> ws_port = 7708;  // nullopt disables the browser endpoint
    runtime::Vars overrides;                      // reapplied on every restart
    runtime::SessionOptions session;
    std::size_t max_outbound = 256;  // queued frames before a peer is dropped
    // Stop once the story has ended, `end` reached at least one peer and every
    // peer has been closed. Peers are closed right after they receive `end`.
    bool exit_on_end = false;
    std::filesystem::path console_dir;
};

// Codes: bind_failed, unknown_override, override_type_mismatch.
class ServerError : public Error {
public:
    using Error::Error;
};

class DirectorServer {
public:
    DirectorServer(std::shared_ptr<const story::StoryGraph> graph, ServeConfig config);
    ~DirectorServer();
    DirectorServer(const DirectorServer&) = delete;
    DirectorServer& operator=(const DirectorServer&) = delete;

    // Opens the listening sockets and starts the session. Throws ServerError.
    void bind();
    std::uint16_t port() const;
    std::optional<std::uint16_t> ws_port() const;

    // Serves until stop() or, with exit_on_end, until the story is over.
    // Calls bind() first if needed.
    void run();

    // Safe to call from any thread, including signal-watching ones.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// bind() + run() in one call.
void serve_session(std::shared_ptr<const story::StoryGraph> graph, ServeConfig config);

}  // namespace taleweaver::director
