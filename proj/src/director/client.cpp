#include "taleweaver/director/client.hpp"

#include "taleweaver/util/splitmix64.hpp"

#include <boost/asio.hpp>
#include <spdlog/spdlog.h>

namespace taleweaver::director {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using boost::system::error_code;

struct LineClient::Impl {
    asio::io_context ioc;
    tcp::socket socket{ioc};
    asio::streambuf buf{kMaxFrameBytes};
    std::chrono::milliseconds timeout;

    // Runs one async operation to completion or until `wait` elapses.
    template <typename Start>
    bool run_for(std::chrono::milliseconds wait, Start&& start)
    {
        bool done = false;
        start(done);
        ioc.restart();
        ioc.run_for(wait);
        if (done) return true;
        // The cancelled handler still runs and sets the flag.
        error_code ignored;
        socket.cancel(ignored);
        ioc.restart();
        ioc.run();
        return false;
    }

    std::optional<std::string> read_line(std::chrono::milliseconds wait)
    {
        error_code result;
        std::size_t n = 0;
        const bool done = run_for(wait, [&](bool& flag) {
            asio::async_read_until(socket, buf, '\n', [&](error_code ec, std::size_t len) {
                flag = true;
                result = ec;
                n = len;
            });
        });
        if (!done) {
            return std::nullopt;
        }
        if (result) {
            throw ClientError("connection_lost", "connection lost: " + result.message());
        }
        std::string line(asio::buffers_begin(buf.data()), asio::buffers_begin(buf.data()) + n);
        buf.consume(n);
        return line;
    }
};

LineClient::LineClient(const std::string& host, std::uint16_t port, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>())
{
    impl_->timeout = timeout;
    error_code ec;
    tcp::resolver resolver(impl_->ioc);
    const auto endpoints = resolver.resolve(host, std::to_string(port), ec);
    if (ec) {
        throw ClientError("connection_lost", "cannot resolve " + host + ": " + ec.message());
    }
    error_code connect_ec = asio::error::timed_out;
    const bool done = impl_->run_for(timeout, [&](bool& flag) {
        asio::async_connect(impl_->socket, endpoints, [&](error_code e, const tcp::endpoint&) {
            flag = true;
            connect_ec = e;
        });
    });
    if (!done || connect_ec) {
        throw ClientError("connection_lost", "cannot connect to " + host + ":" + std::to_string(port) + ": " +
                                                 connect_ec.message());
    }
}

LineClient::~LineClient() = default;
LineClient::LineClient(LineClient&&) noexcept = default;
LineClient& LineClient::operator=(LineClient&&) noexcept = default;

void LineClient::send(const Frame& frame) { send_raw(encode_frame(frame)); }

void LineClient::send_raw(std::string_view bytes)
{
    error_code ec;
    asio::write(impl_->socket, asio::buffer(bytes.data(), bytes.size()), ec);
    if (ec) {
        throw ClientError("connection_lost", "write failed: " + ec.message());
    }
}

Frame LineClient::receive()
{
    auto line = impl_->read_line(impl_->timeout);
    if (!line) {
        throw ClientError("timeout", "no frame within " + std::to_string(impl_->timeout.count()) + " ms");
    }
    return decode_frame(*line);
}

std::optional<Frame> LineClient::poll(std::chrono::milliseconds wait)
{
    auto line = impl_->read_line(wait);
    if (!line) {
        return std::nullopt;
    }
    return decode_frame(*line);
}

void LineClient::close()
{
    error_code ignored;
    impl_->socket.shutdown(tcp::socket::shutdown_both, ignored);
    impl_->socket.close(ignored);
}

namespace {

class Picker {
public:
    explicit Picker(const AutoDirectorPolicy& policy) : policy_(policy)
    {
        if (const auto* r = std::get_if<RandomPolicy>(&policy_)) {
            rng_ = SplitMix64(r->seed);
        }
    }

    std::uint64_t pick(const std::vector<WireChoice>& choices)
    {
        if (std::holds_alternative<RandomPolicy>(policy_)) {
            return choices[rng_.pick(choices.size())].id;
        }
        const auto& ids = std::get<ScriptedPolicy>(policy_).ids;
        if (next_ >= ids.size()) {
            throw ClientError("script_exhausted", "the script has " + std::to_string(ids.size()) +
                                                      " choices but the story wants more");
        }
        const std::uint64_t id = ids[next_++];
        const bool offered =
            std::any_of(choices.begin(), choices.end(), [&](const WireChoice& c) { return c.id == id; });
        if (!offered) {
            throw ClientError("invalid_scripted_id", "scripted choice " + std::to_string(id) + " is not among the " +
                                                         std::to_string(choices.size()) + " offered");
        }
        return id;
    }

private:
    AutoDirectorPolicy policy_;
    SplitMix64 rng_{0};
    std::size_t next_ = 0;
};

}  // namespace

AutoDirectorResult run_auto_director(const AutoDirectorOptions& options, const AutoDirectorPolicy& policy)
{
    LineClient client(options.host, options.port, options.timeout);
    Picker picker(policy);
    AutoDirectorResult result;

    bool directing = false;
    std::optional<Status> latest;
    std::optional<std::uint64_t> answered;  // seq of the last status we chose for

    auto maybe_choose = [&] {
        if (!directing || !latest || latest->choices.empty() || answered == latest->seq) {
            return;
        }
        const std::uint64_t id = picker.pick(latest->choices);
        answered = latest->seq;
        result.decisions.push_back({latest->seq, id});
        spdlog::debug("auto-director picks {} at seq {}", id, latest->seq);
        client.send(Choose{id, latest->seq});
    };

    client.send(Claim{});
    for (;;) {
        const Frame frame = client.receive();
        if (const auto* h = std::get_if<Hello>(&frame)) {
            directing = h->role == "director";
            maybe_choose();
        } else if (const auto* st = std::get_if<Status>(&frame)) {
            result.transcript.insert(result.transcript.end(), st->paragraphs.begin(), st->paragraphs.end());
            latest = *st;
            maybe_choose();
        } else if (const auto* end = std::get_if<End>(&frame)) {
            result.end_seq = end->seq;
            client.close();
            return result;
        } else if (const auto* err = std::get_if<ErrorFrame>(&frame)) {
            if (err->code == "not_director_claim_denied") {
                throw ClientError("claim_denied", err->message);
            }
            if (err->code != "stale_seq") {
                throw ClientError("server_error", err->code + ": " + err->message);
            }
        } else if (std::holds_alternative<Ping>(frame)) {
            client.send(Pong{});
        }
    }
}

}  // namespace taleweaver::director
