#pragma once

// Blocking line-protocol client and the automated director built on it.

#include "taleweaver/director/protocol.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace taleweaver::director {

// Codes: connection_lost, timeout, script_exhausted, invalid_scripted_id,
// claim_denied, server_error.
class ClientError : public Error {
public:
    using Error::Error;
};

class LineClient {
public:
    LineClient(const std::string& host, std::uint16_t port,
               std::chrono::milliseconds timeout = std::chrono::seconds(10));
    ~LineClient();
    LineClient(LineClient&&) noexcept;
    LineClient& operator=(LineClient&&) noexcept;

    void send(const Frame& frame);
    void send_raw(std::string_view bytes);
    // Next frame from the server. Throws ClientError connection_lost or
    // timeout; undecodable lines surface as ProtocolError.
    Frame receive();
    // Like receive(), but nullopt when nothing arrives within `wait`.
    std::optional<Frame> poll(std::chrono::milliseconds wait);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RandomPolicy {
    std::uint64_t seed = 0;
};

struct ScriptedPolicy {
    std::vector<std::uint64_t> ids;
};

using AutoDirectorPolicy = std::variant<RandomPolicy, ScriptedPolicy>;

struct Decision {
    std::uint64_t seq = 0;
    std::uint64_t id = 0;
    bool operator==(const Decision&) const = default;
};

struct AutoDirectorResult {
    std::vector<Decision> decisions;
    std::vector<WireParagraph> transcript;  // every paragraph seen, in order
    std::uint64_t end_seq = 0;
};

struct AutoDirectorOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7707;
    std::chrono::milliseconds timeout = std::chrono::seconds(10);  // per frame
};

// Claims the director role, answers every status that offers choices, and
// returns once the server sends `end`.
AutoDirectorResult run_auto_director(const AutoDirectorOptions& options, const AutoDirectorPolicy& policy);

}  // namespace taleweaver::director
