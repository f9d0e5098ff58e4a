#include "taleweaver/director/server.hpp"

#include "taleweaver/util/hash.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace taleweaver::director {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using boost::system::error_code;

namespace {

class Peer;

// Everything the peers report back to. Lives on the io_context thread only.
class Hub {
public:
    virtual ~Hub() = default;
    virtual void on_open(const std::shared_ptr<Peer>& peer) = 0;
    virtual void on_line(Peer& peer, std::string_view line) = 0;
    virtual void on_closed(Peer& peer) = 0;
    virtual std::size_t max_outbound() const = 0;
};

class Peer : public std::enable_shared_from_this<Peer> {
public:
    Peer(Hub& hub, std::size_t id, std::string kind) : hub_(hub), id_(id), kind_(std::move(kind)) {}
    virtual ~Peer() = default;

    std::size_t id() const { return id_; }
    const std::string& kind() const { return kind_; }

    void send(const Frame& frame)
    {
        if (closed_ || closing_) {
            return;
        }
        if (outbox_.size() >= hub_.max_outbound()) {
            spdlog::warn("peer {} fell {} frames behind, dropping it", id_, outbox_.size());
            fail();
            return;
        }
        std::string line = encode_frame(frame);
        spdlog::debug("peer {} <- {}", id_, std::string_view(line).substr(0, line.size() - 1));
        outbox_.push_back(std::move(line));
        if (!writing_) {
            writing_ = true;
            write_front();
        }
    }

    // Stops reading and closes once everything queued has been written.
    void close_after_flush()
    {
        if (closed_ || closing_) {
            return;
        }
        closing_ = true;
        if (!writing_) {
            shut();
        }
    }

    void fail()
    {
        if (closed_) {
            return;
        }
        closed_ = true;
        outbox_.clear();
        abort();
        hub_.on_closed(*this);
    }

    bool closing() const { return closing_ || closed_; }
    bool closed() const { return closed_; }
    bool draining() const { return closing_ && !closed_; }

protected:
    virtual void write_front() = 0;
    virtual void shut() = 0;   // graceful close
    virtual void abort() = 0;  // immediate close

    void wrote(const error_code& ec)
    {
        if (ec) {
            fail();
            return;
        }
        outbox_.pop_front();
        if (!outbox_.empty()) {
            write_front();
            return;
        }
        writing_ = false;
        if (closing_) {
            shut();
        }
    }

    void finished()
    {
        if (!closed_) {
            closed_ = true;
            hub_.on_closed(*this);
        }
    }

    Hub& hub_;
    std::deque<std::string> outbox_;

private:
    std::size_t id_;
    std::string kind_;
    bool writing_ = false;
    bool closing_ = false;
    bool closed_ = false;
};

class TcpPeer : public Peer {
public:
    TcpPeer(Hub& hub, std::size_t id, tcp::socket socket)
        : Peer(hub, id, "tcp"), socket_(std::move(socket)), buf_(kMaxFrameBytes), linger_(socket_.get_executor())
    {
    }

    void start()
    {
        hub_.on_open(shared_from_this());
        read();
    }

private:
    void read()
    {
        asio::async_read_until(socket_, buf_, '\n', [self = shared_from_this(), this](error_code ec, std::size_t n) {
            if (closed()) {
                return;
            }
            if (draining()) {
                // Read and drop whatever the client still sends until it
                // closes its side, so it never sees a reset.
                if (ec && ec != asio::error::not_found) {
                    close_now();
                    return;
                }
                buf_.consume(buf_.size());
                read();
                return;
            }
            if (ec == asio::error::not_found) {
                send(ErrorFrame{"frame_too_large", "frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes"});
                close_after_flush();
                buf_.consume(buf_.size());
                read();
                return;
            }
            if (ec) {
                fail();
                return;
            }
            std::string line(asio::buffers_begin(buf_.data()), asio::buffers_begin(buf_.data()) + n);
            buf_.consume(n);
            hub_.on_line(*this, line);
            if (!closed()) {
                read();
            }
        });
    }

    void write_front() override
    {
        asio::async_write(socket_, asio::buffer(outbox_.front()),
                          [self = shared_from_this(), this](error_code ec, std::size_t) { wrote(ec); });
    }

    void shut() override
    {
        error_code ignored;
        socket_.shutdown(tcp::socket::shutdown_send, ignored);
        linger_.expires_after(std::chrono::seconds(5));
        linger_.async_wait([self = shared_from_this(), this](error_code ec) {
            if (!ec) {
                close_now();
            }
        });
    }

    void close_now()
    {
        error_code ignored;
        linger_.cancel();
        socket_.close(ignored);
        finished();
    }

    void abort() override
    {
        error_code ignored;
        linger_.cancel();
        socket_.close(ignored);
    }

    tcp::socket socket_;
    asio::streambuf buf_;
    asio::steady_timer linger_;
};

class WsPeer : public Peer {
public:
    WsPeer(Hub& hub, std::size_t id, tcp::socket socket) : Peer(hub, id, "ws"), ws_(std::move(socket))
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.read_message_max(kMaxFrameBytes);
        ws_.text(true);
    }

    void start(http::request<http::string_body> req)
    {
        ws_.async_accept(req, [self = shared_from_this(), this](error_code ec) {
            if (ec) {
                spdlog::debug("websocket handshake failed: {}", ec.message());
                return;
            }
            hub_.on_open(shared_from_this());
            read();
        });
    }

private:
    void read()
    {
        ws_.async_read(buf_, [self = shared_from_this(), this](error_code ec, std::size_t) {
            if (closing()) {
                return;
            }
            if (ec) {
                fail();
                return;
            }
            const std::string text = beast::buffers_to_string(buf_.data());
            buf_.consume(buf_.size());
            hub_.on_line(*this, text);
            if (!closing()) {
                read();
            }
        });
    }

    void write_front() override
    {
        std::string& line = outbox_.front();
        ws_.async_write(asio::buffer(line.data(), line.size() - 1),
                        [self = shared_from_this(), this](error_code ec, std::size_t) { wrote(ec); });
    }

    void shut() override
    {
        ws_.async_close(websocket::close_code::normal, [self = shared_from_this(), this](error_code) {
            beast::get_lowest_layer(ws_).close();
            finished();
        });
    }

    void abort() override { beast::get_lowest_layer(ws_).close(); }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buf_;
};

std::string_view mime_type(const std::filesystem::path& p)
{
    static const std::map<std::string, std::string_view> types = {
        {".html", "text/html; charset=utf-8"},  {".js", "text/javascript"}, {".mjs", "text/javascript"},
        {".css", "text/css"},                   {".json", "application/json"}, {".svg", "image/svg+xml"},
        {".png", "image/png"},                  {".ico", "image/x-icon"},     {".map", "application/json"},
    };
    const auto it = types.find(p.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
}

// Maps a request target onto a file below root, refusing anything that
// would climb out of it.
std::optional<std::filesystem::path> static_file(const std::filesystem::path& root, std::string_view target)
{
    if (root.empty()) {
        return std::nullopt;
    }
    target = target.substr(0, target.find_first_of("?#"));
    std::filesystem::path rel = std::filesystem::path(std::string(target)).relative_path().lexically_normal();
    if (rel.empty() || rel == ".") {
        rel = "index.html";
    }
    for (const auto& part : rel) {
        if (part == "..") {
            return std::nullopt;
        }
    }
    std::filesystem::path full = root / rel;
    std::error_code ec;
    if (std::filesystem::is_directory(full, ec)) {
        full /= "index.html";
    }
    if (!std::filesystem::is_regular_file(full, ec)) {
        return std::nullopt;
    }
    return full;
}

// First request on the browser port: either a WebSocket upgrade on /ws or a
// static file GET. One response per connection.
class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(Hub& hub, std::size_t id, tcp::socket socket, const std::filesystem::path& root)
        : hub_(hub), id_(id), stream_(std::move(socket)), root_(root)
    {
    }

    void start()
    {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buf_, req_, [self = shared_from_this()](error_code ec, std::size_t) {
            if (!ec) {
                self->handle();
            }
        });
    }

private:
    void handle()
    {
        stream_.expires_never();
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_)) {
            if (target.substr(0, target.find('?')) == "/ws") {
                auto peer = std::make_shared<WsPeer>(hub_, id_, stream_.release_socket());
                peer->start(std::move(req_));
                return;
            }
            respond(http::status::not_found, "text/plain", "no such endpoint\n");
            return;
        }
        if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
            respond(http::status::method_not_allowed, "text/plain", "GET only\n");
            return;
        }
        const auto file = static_file(root_, target);
        if (!file) {
            respond(http::status::not_found, "text/plain", "not found\n");
            return;
        }
        std::ifstream in(*file, std::ios::binary);
        std::ostringstream body;
        body << in.rdbuf();
        respond(http::status::ok, mime_type(*file), body.str());
    }

    void respond(http::status status, std::string_view type, std::string body)
    {
        auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res->set(http::field::server, "taleweaver");
        res->set(http::field::content_type, beast::string_view(type.data(), type.size()));
        res->keep_alive(false);
        if (req_.method() != http::verb::head) {
            res->body() = std::move(body);
        }
        res->prepare_payload();
        http::async_write(stream_, *res, [self = shared_from_this(), res](error_code, std::size_t) {
            error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    Hub& hub_;
    std::size_t id_;
    beast::tcp_stream stream_;
    const std::filesystem::path& root_;
    beast::flat_buffer buf_;
    http::request<http::string_body> req_;
};

Frame hello(const story::StoryGraph& g, const char* role)
{
    return Hello{kProtocolVersion, g.title, hash_to_hex(g.content_hash), role};
}

}  // namespace

struct DirectorServer::Impl final : Hub {
    Impl(std::shared_ptr<const story::StoryGraph> g, ServeConfig c) : graph(std::move(g)), config(std::move(c)) {}

    std::shared_ptr<const story::StoryGraph> graph;
    ServeConfig config;
    asio::io_context ioc;
    std::optional<tcp::acceptor> line_acceptor;
    std::optional<tcp::acceptor> ws_acceptor;

    std::optional<runtime::Session> session;
    std::uint64_t seq = 0;       // seq of the latest status
    std::size_t reported = 0;    // transcript paragraphs already broadcast
    std::map<std::size_t, std::shared_ptr<Peer>> peers;
    std::optional<std::size_t> director;
    std::size_t next_id = 0;
    bool bound = false;
    bool end_delivered = false;
    bool shutting_down = false;

    std::size_t max_outbound() const override { return config.max_outbound; }

    // ---- session ---------------------------------------------------------

    void fresh_session()
    {
        session = runtime::Session::create(graph, config.overrides, config.session);
        reported = 0;
    }

    // Runs the story up to the next choice point. Errors are returned, not
    // thrown, so the caller can still broadcast what changed.
    std::optional<runtime::RuntimeError> advance()
    {
        try {
            session->continue_story();
        } catch (const runtime::RuntimeError& e) {
            spdlog::warn("story stalled: {} ({})", e.what(), e.code());
            return e;
        }
        return std::nullopt;
    }

    Status status_since(std::size_t from) const
    {
        Status st;
        st.seq = seq;
        st.knot = session->current_knot_name();
        st.finished = session->finished();
        const auto transcript = session->transcript();
        for (std::size_t i = from; i < transcript.size(); ++i) {
            st.paragraphs.push_back(to_wire(transcript[i]));
        }
        if (session->pending()) {
            for (const runtime::PresentedChoice& c : *session->pending()) {
                st.choices.push_back({c.id, c.label});
            }
        }
        st.vars = session->vars();
        return st;
    }

    void send_status(Peer& peer, Status st)
    {
        // A status too large for one frame is split; only the last piece
        // carries the choices and the real finished flag.
        try {
            peer.send(st);
            return;
        } catch (const ProtocolError& e) {
            if (e.code() != "frame_too_large") {
                throw;
            }
        }
        if (st.paragraphs.size() < 2) {
            spdlog::warn("a paragraph does not fit in one frame; sending a placeholder");
            for (WireParagraph& p : st.paragraphs) {
                p.text = "[paragraph too large for one frame]";
                p.spans.clear();
            }
            peer.send(st);
            return;
        }
        const std::size_t half = st.paragraphs.size() / 2;
        Status head = st;
        head.paragraphs.resize(half);
        head.choices.clear();
        head.finished = false;
        st.paragraphs.erase(st.paragraphs.begin(), st.paragraphs.begin() + static_cast<std::ptrdiff_t>(half));
        send_status(peer, std::move(head));
        send_status(peer, std::move(st));
    }

    void publish()
    {
        ++seq;
        const Status st = status_since(reported);
        reported = session->transcript().size();
        for (auto& [id, peer] : snapshot_peers()) {
            send_status(*peer, st);
            if (session->finished()) {
                peer->send(End{seq});
            }
        }
        if (session->finished()) {
            spdlog::info("story ended at seq {}", seq);
            if (config.exit_on_end) {
                finish_peers();
            }
        }
    }

    std::map<std::size_t, std::shared_ptr<Peer>> snapshot_peers() const { return peers; }

    void finish_peers()
    {
        for (auto& [id, peer] : snapshot_peers()) {
            end_delivered = true;
            peer->close_after_flush();
        }
        maybe_exit();
    }

    void maybe_exit()
    {
        if (config.exit_on_end && session && session->finished() && end_delivered && peers.empty()) {
            shutdown();
        }
    }

    // ---- connections -----------------------------------------------------

    void on_open(const std::shared_ptr<Peer>& peer) override
    {
        if (shutting_down) {
            peer->fail();
            return;
        }
        peers.emplace(peer->id(), peer);
        spdlog::info("peer {} connected over {}", peer->id(), peer->kind());
        peer->send(hello(*graph, "observer"));
        send_status(*peer, status_since(0));
        if (session->finished()) {
            peer->send(End{seq});
            if (config.exit_on_end) {
                end_delivered = true;
                peer->close_after_flush();
            }
        }
    }

    void on_closed(Peer& peer) override
    {
        if (peers.erase(peer.id()) == 0) {
            return;
        }
        spdlog::info("peer {} disconnected", peer.id());
        if (director == peer.id()) {
            director.reset();
            spdlog::info("director released by disconnect; session paused");
        }
        maybe_exit();
    }

    void on_line(Peer& peer, std::string_view line) override
    {
        if (line == "\n" || line == "\r\n" || line.empty()) {
            return;
        }
        Frame frame;
        try {
            frame = decode_frame(line);
        } catch (const ProtocolError& e) {
            spdlog::debug("peer {} sent a bad frame: {}", peer.id(), e.what());
            peer.send(ErrorFrame{e.code(), e.what()});
            return;
        }
        spdlog::debug("peer {} -> {}", peer.id(), frame_type(frame));
        std::visit([&](const auto& f) { handle(peer, f); }, frame);
    }

    bool is_director(const Peer& peer) const { return director == peer.id(); }

    bool require_director(Peer& peer, const char* what)
    {
        if (is_director(peer)) {
            return true;
        }
        peer.send(ErrorFrame{"not_director", std::string("only the director may send ") + what});
        return false;
    }

    void handle(Peer& peer, const Claim&)
    {
        if (director && !is_director(peer)) {
            peer.send(ErrorFrame{"not_director_claim_denied", "another connection is directing this session"});
            return;
        }
        director = peer.id();
        spdlog::info("peer {} is now the director", peer.id());
        peer.send(hello(*graph, "director"));
    }

    void handle(Peer& peer, const Release&)
    {
        if (!require_director(peer, "release")) {
            return;
        }
        director.reset();
        peer.send(hello(*graph, "observer"));
    }

    void handle(Peer& peer, const Choose& c)
    {
        if (!require_director(peer, "choose")) {
            return;
        }
        if (session->finished()) {
            peer.send(ErrorFrame{"story_finished", "the story has already ended"});
            return;
        }
        if (c.seq != seq) {
            peer.send(ErrorFrame{"stale_seq", "choose answers seq " + std::to_string(c.seq) + " but the latest is " +
                                                  std::to_string(seq)});
            return;
        }
        try {
            session->choose(c.id);
        } catch (const runtime::RuntimeError& e) {
            peer.send(ErrorFrame{e.code(), e.what()});
            return;
        }
        const auto stalled = advance();
        publish();
        if (stalled) {
            peer.send(ErrorFrame{stalled->code(), stalled->what()});
        }
    }

    void handle(Peer& peer, const Set& s)
    {
        if (!require_director(peer, "set")) {
            return;
        }
        try {
            session->set_variable(s.name, s.value);
        } catch (const runtime::RuntimeError& e) {
            peer.send(ErrorFrame{e.code(), e.what()});
            return;
        }
        // A story stalled on an evaluation error gets another try with the
        // new value.
        std::optional<runtime::RuntimeError> stalled;
        if (!session->finished() && !session->pending()) {
            stalled = advance();
        }
        publish();
        if (stalled) {
            peer.send(ErrorFrame{stalled->code(), stalled->what()});
        }
    }

    void handle(Peer& peer, const Restart&)
    {
        if (!require_director(peer, "restart")) {
            return;
        }
        fresh_session();
        const auto stalled = advance();
        publish();
        if (stalled) {
            peer.send(ErrorFrame{stalled->code(), stalled->what()});
        }
    }

    void handle(Peer& peer, const Ping&) { peer.send(Pong{}); }
    void handle(Peer&, const Pong&) {}
    void handle(Peer& peer, const Sync&) { send_status(peer, status_since(0)); }

    template <typename ServerOnly>
    void handle(Peer& peer, const ServerOnly&)
    {
        peer.send(ErrorFrame{"unexpected_frame", std::string("clients may not send '") +
                                                     frame_type(Frame{ServerOnly{}}) + "' frames"});
    }

    // ---- sockets ---------------------------------------------------------

    tcp::endpoint resolve(std::uint16_t port)
    {
        error_code ec;
        tcp::resolver resolver(ioc);
        const auto results = resolver.resolve(config.host, std::to_string(port),
                                              tcp::resolver::passive | tcp::resolver::numeric_service, ec);
        if (ec || results.empty()) {
            throw ServerError("bind_failed", "cannot resolve host '" + config.host + "': " + ec.message());
        }
        return results.begin()->endpoint();
    }

    tcp::acceptor listen(std::uint16_t port)
    {
        const tcp::endpoint ep = resolve(port);
        tcp::acceptor acc(ioc);
        error_code ec;
        acc.open(ep.protocol(), ec);
        if (!ec) {
            acc.set_option(asio::socket_base::reuse_address(true), ec);
        }
        if (!ec) {
            acc.bind(ep, ec);
        }
        if (!ec) {
            acc.listen(asio::socket_base::max_listen_connections, ec);
        }
        if (ec) {
            throw ServerError("bind_failed", "cannot listen on " + config.host + ":" + std::to_string(port) + ": " +
                                                 ec.message());
        }
        return acc;
    }

    void accept_lines()
    {
        line_acceptor->async_accept([this](error_code ec, tcp::socket socket) {
            if (ec) {
                return;
            }
            std::make_shared<TcpPeer>(*this, next_id++, std::move(socket))->start();
            accept_lines();
        });
    }

    void accept_browsers()
    {
        ws_acceptor->async_accept([this](error_code ec, tcp::socket socket) {
            if (ec) {
                return;
            }
            std::make_shared<HttpSession>(*this, next_id++, std::move(socket), config.console_dir)->start();
            accept_browsers();
        });
    }

    void bind()
    {
        if (bound) {
            return;
        }
        try {
            fresh_session();
        } catch (const runtime::RuntimeError& e) {
            throw ServerError(e.code(), e.what());
        }
        line_acceptor.emplace(listen(config.port));
        if (config.ws_port) {
            ws_acceptor.emplace(listen(*config.ws_port));
        }
        advance();
        publish();
        accept_lines();
        if (ws_acceptor) {
            accept_browsers();
        }
        bound = true;
        spdlog::info("serving '{}' on {}:{}", graph->title, config.host, line_acceptor->local_endpoint().port());
    }

    void shutdown()
    {
        if (shutting_down) {
            return;
        }
        shutting_down = true;
        error_code ignored;
        if (line_acceptor) {
            line_acceptor->close(ignored);
        }
        if (ws_acceptor) {
            ws_acceptor->close(ignored);
        }
        for (auto& [id, peer] : snapshot_peers()) {
            peer->fail();
        }
        ioc.stop();
    }
};

DirectorServer::DirectorServer(std::shared_ptr<const story::StoryGraph> graph, ServeConfig config)
    : impl_(std::make_unique<Impl>(std::move(graph), std::move(config)))
{
}

DirectorServer::~DirectorServer() = default;

void DirectorServer::bind() { impl_->bind(); }

std::uint16_t DirectorServer::port() const
{
    return impl_->line_acceptor ? impl_->line_acceptor->local_endpoint().port() : impl_->config.port;
}

std::optional<std::uint16_t> DirectorServer::ws_port() const
{
    if (impl_->ws_acceptor) {
        return impl_->ws_acceptor->local_endpoint().port();
    }
    return impl_->config.ws_port;
}

void DirectorServer::run()
{
    impl_->bind();
    impl_->ioc.run();
}

void DirectorServer::stop()
{
    asio::post(impl_->ioc, [impl = impl_.get()] { impl->shutdown(); });
}

void serve_session(std::shared_ptr<const story::StoryGraph> graph, ServeConfig config)
{
    DirectorServer server(std::move(graph), std::move(config));
    server.run();
}

}  // namespace taleweaver::director
