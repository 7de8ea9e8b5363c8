#include "evgw/transport.hpp"

#include <filesystem>
#include <optional>

#include <boost/asio/co_spawn.hpp>
#include <boost/asio/detached.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/local/stream_protocol.hpp>
#include <boost/asio/read_until.hpp>
#include <boost/asio/ssl/stream.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/asio/use_awaitable.hpp>
#include <boost/asio/write.hpp>
#include <boost/beast/core/buffers_to_string.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "evgw/codec.hpp"

namespace evgw {

namespace {

using asio::use_awaitable;
using tcp = asio::ip::tcp;
using local_stream = asio::local::stream_protocol;
using Strand = asio::strand<asio::io_context::executor_type>;
namespace websocket = boost::beast::websocket;

constexpr std::chrono::seconds kHandshakeTimeout{10};

// Cancels pending I/O on `target` unless disarmed first. Lives on the
// connection's strand, so the cancel never races the coroutine.
template <class Socket>
class Deadline {
public:
    explicit Deadline(const typename Socket::executor_type& executor) : timer_(executor) {}

    void arm(std::chrono::milliseconds timeout, Socket& target) {
        expired_ = std::make_shared<bool>(false);
        if (timeout.count() <= 0) return;
        timer_.expires_after(timeout);
        timer_.async_wait([flag = expired_, &target](boost::system::error_code ec) {
            if (ec) return;
            *flag = true;
            boost::system::error_code ignored;
            target.cancel(ignored);
        });
    }

    bool disarm() {
        timer_.cancel();
        return expired_ && *expired_;
    }

private:
    asio::steady_timer timer_;
    std::shared_ptr<bool> expired_;
};

template <class Stream>
auto& lowest(Stream& stream) {
    if constexpr (requires { stream.lowest_layer(); }) {
        return stream.lowest_layer();
    } else {
        return stream;
    }
}

template <class Stream>
class LineStream final : public FramedStream {
public:
    using Socket = std::remove_reference_t<decltype(lowest(std::declval<Stream&>()))>;

    LineStream(Stream stream, std::string_view name)
        : stream_(std::move(stream)), deadline_(lowest(stream_).get_executor()), name_(name) {}

    asio::awaitable<FrameRead> read_frame(std::chrono::milliseconds timeout) override {
        if (auto frame = take_line()) co_return FrameRead{FrameRead::Status::Frame, std::move(*frame)};
        deadline_.arm(timeout, lowest(stream_));
        try {
            co_await asio::async_read_until(stream_, asio::dynamic_buffer(buffer_, kMaxFrameBytes + 1), '\n',
                                            use_awaitable);
            deadline_.disarm();
        } catch (const boost::system::system_error& e) {
            const bool expired = deadline_.disarm();
            if (expired) co_return FrameRead{FrameRead::Status::TimedOut, {}};
            if (e.code() == asio::error::not_found) co_return FrameRead{FrameRead::Status::TooLong, {}};
            // A final unterminated line before EOF is still a frame.
            if (e.code() == asio::error::eof && !buffer_.empty() && buffer_.size() <= kMaxFrameBytes) {
                std::string last = std::move(buffer_);
                buffer_.clear();
                strip_cr(last);
                co_return FrameRead{FrameRead::Status::Frame, std::move(last)};
            }
            co_return FrameRead{FrameRead::Status::Closed, {}};
        }
        auto frame = take_line();
        co_return FrameRead{FrameRead::Status::Frame, frame ? std::move(*frame) : std::string{}};
    }

    asio::awaitable<bool> write_frame(std::string_view frame) override {
        std::string out;
        out.reserve(frame.size() + 1);
        out.append(frame);
        out.push_back('\n');
        try {
            co_await asio::async_write(stream_, asio::buffer(out), use_awaitable);
            co_return true;
        } catch (const boost::system::system_error&) {
            co_return false;
        }
    }

    void close() override {
        boost::system::error_code ignored;
        lowest(stream_).shutdown(Socket::shutdown_both, ignored);
        lowest(stream_).close(ignored);
    }

    std::string_view transport_name() const override { return name_; }

    Stream& stream() { return stream_; }

private:
    static void strip_cr(std::string& line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }

    std::optional<std::string> take_line() {
        const auto newline = buffer_.find('\n');
        if (newline == std::string::npos) return std::nullopt;
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        strip_cr(line);
        return line;
    }

    Stream stream_;
    Deadline<Socket> deadline_;
    std::string buffer_;
    std::string_view name_;
};

class WebSocketStream final : public FramedStream {
public:
    explicit WebSocketStream(websocket::stream<tcp::socket> ws)
        : ws_(std::move(ws)), deadline_(ws_.next_layer().get_executor()) {
        ws_.read_message_max(kMaxFrameBytes);
        ws_.text(true);
    }

    asio::awaitable<FrameRead> read_frame(std::chrono::milliseconds timeout) override {
        boost::beast::flat_buffer buffer;
        deadline_.arm(timeout, ws_.next_layer());
        try {
            co_await ws_.async_read(buffer, use_awaitable);
            deadline_.disarm();
        } catch (const boost::system::system_error& e) {
            const bool expired = deadline_.disarm();
            if (expired) co_return FrameRead{FrameRead::Status::TimedOut, {}};
            if (e.code() == websocket::error::message_too_big) co_return FrameRead{FrameRead::Status::TooLong, {}};
            co_return FrameRead{FrameRead::Status::Closed, {}};
        }
        co_return FrameRead{FrameRead::Status::Frame, boost::beast::buffers_to_string(buffer.data())};
    }

    asio::awaitable<bool> write_frame(std::string_view frame) override {
        try {
            co_await ws_.async_write(asio::buffer(frame.data(), frame.size()), use_awaitable);
            co_return true;
        } catch (const boost::system::system_error&) {
            co_return false;
        }
    }

    void close() override {
        boost::system::error_code ignored;
        ws_.next_layer().shutdown(tcp::socket::shutdown_both, ignored);
        ws_.next_layer().close(ignored);
    }

    std::string_view transport_name() const override { return "websocket"; }

private:
    websocket::stream<tcp::socket> ws_;
    Deadline<tcp::socket> deadline_;
};

asio::awaitable<void> run_handler(ConnectionHandler handler, std::shared_ptr<FramedStream> stream) {
    try {
        co_await handler(stream);
    } catch (const std::exception& e) {
        spdlog::warn("{} connection handler failed: {}", stream->transport_name(), e.what());
    }
    stream->close();
}

asio::awaitable<void> serve_tcp(tcp::socket socket, Endpoint::Kind kind,
                                std::shared_ptr<asio::ssl::context> tls, ConnectionHandler handler) {
    boost::system::error_code ignored;
    socket.set_option(tcp::no_delay(true), ignored);
    switch (kind) {
        case Endpoint::Kind::Tls: {
            asio::ssl::stream<tcp::socket> ssl(std::move(socket), *tls);
            Deadline<tcp::socket> deadline(ssl.next_layer().get_executor());
            deadline.arm(kHandshakeTimeout, ssl.next_layer());
            try {
                co_await ssl.async_handshake(asio::ssl::stream_base::server, use_awaitable);
                deadline.disarm();
            } catch (const boost::system::system_error& e) {
                deadline.disarm();
                spdlog::debug("tls handshake failed: {}", e.what());
                ssl.next_layer().close(ignored);
                co_return;
            }
            co_await run_handler(handler, std::make_shared<LineStream<asio::ssl::stream<tcp::socket>>>(
                                              std::move(ssl), "tls"));
            co_return;
        }
        case Endpoint::Kind::WebSocket: {
            websocket::stream<tcp::socket> ws(std::move(socket));
            Deadline<tcp::socket> deadline(ws.next_layer().get_executor());
            deadline.arm(kHandshakeTimeout, ws.next_layer());
            try {
                co_await ws.async_accept(use_awaitable);
                deadline.disarm();
            } catch (const boost::system::system_error& e) {
                deadline.disarm();
                spdlog::debug("websocket upgrade failed: {}", e.what());
                ws.next_layer().close(ignored);
                co_return;
            }
            co_await run_handler(handler, std::make_shared<WebSocketStream>(std::move(ws)));
            co_return;
        }
        default:
            co_await run_handler(handler, std::make_shared<LineStream<tcp::socket>>(std::move(socket), "tcp"));
    }
}

}  // namespace

std::string_view to_string(Endpoint::Kind kind) {
    switch (kind) {
        case Endpoint::Kind::Tcp: return "tcp";
        case Endpoint::Kind::Tls: return "tls";
        case Endpoint::Kind::Local: return "local";
        case Endpoint::Kind::WebSocket: return "websocket";
    }
    return "tcp";
}

std::shared_ptr<asio::ssl::context> make_server_tls_context(const std::string& cert_file,
                                                            const std::string& key_file) {
    auto context = std::make_shared<asio::ssl::context>(asio::ssl::context::tls_server);
    context->set_options(asio::ssl::context::default_workarounds | asio::ssl::context::no_sslv2 |
                         asio::ssl::context::no_sslv3 | asio::ssl::context::no_tlsv1 |
                         asio::ssl::context::no_tlsv1_1);
    context->use_certificate_chain_file(cert_file);
    context->use_private_key_file(key_file, asio::ssl::context::pem);
    return context;
}

struct Listener::Impl : std::enable_shared_from_this<Impl> {
    asio::io_context& io;
    Endpoint endpoint;
    ConnectionHandler handler;
    std::optional<tcp::acceptor> tcp_acceptor;
    std::optional<local_stream::acceptor> local_acceptor;
    std::uint16_t bound_port = 0;

    Impl(asio::io_context& context, Endpoint ep, ConnectionHandler h)
        : io(context), endpoint(std::move(ep)), handler(std::move(h)) {}

    void open() {
        if (endpoint.kind == Endpoint::Kind::Local) {
            std::error_code ignored;
            std::filesystem::remove(endpoint.path, ignored);
            local_acceptor.emplace(io, local_stream::endpoint(endpoint.path));
            return;
        }
        if (endpoint.kind == Endpoint::Kind::Tls && !endpoint.tls) {
            throw std::invalid_argument("tls endpoint without a tls context");
        }
        const tcp::endpoint where(asio::ip::make_address(endpoint.bind), endpoint.port);
        tcp_acceptor.emplace(io);
        tcp_acceptor->open(where.protocol());
        tcp_acceptor->set_option(tcp::acceptor::reuse_address(true));
        tcp_acceptor->bind(where);
        tcp_acceptor->listen(asio::socket_base::max_listen_connections);
        bound_port = tcp_acceptor->local_endpoint().port();
    }

    asio::awaitable<void> accept_tcp() {
        auto self = shared_from_this();
        while (tcp_acceptor && tcp_acceptor->is_open()) {
            try {
                auto socket = co_await tcp_acceptor->async_accept(asio::make_strand(io), use_awaitable);
                auto executor = socket.get_executor();
                asio::co_spawn(executor, serve_tcp(std::move(socket), endpoint.kind, endpoint.tls, handler),
                               asio::detached);
            } catch (const boost::system::system_error& e) {
                if (e.code() == asio::error::operation_aborted || !tcp_acceptor->is_open()) co_return;
                spdlog::warn("{} accept failed: {}", to_string(endpoint.kind), e.what());
                asio::steady_timer pause(io, std::chrono::milliseconds(50));
                co_await pause.async_wait(use_awaitable);
            }
        }
    }

    asio::awaitable<void> accept_local() {
        auto self = shared_from_this();
        while (local_acceptor && local_acceptor->is_open()) {
            try {
                auto socket = co_await local_acceptor->async_accept(asio::make_strand(io), use_awaitable);
                auto executor = socket.get_executor();
                auto stream = std::make_shared<LineStream<local_stream::socket>>(std::move(socket), "local");
                asio::co_spawn(executor, run_handler(handler, std::move(stream)), asio::detached);
            } catch (const boost::system::system_error& e) {
                if (e.code() == asio::error::operation_aborted || !local_acceptor->is_open()) co_return;
                spdlog::warn("local accept failed: {}", e.what());
                asio::steady_timer pause(io, std::chrono::milliseconds(50));
                co_await pause.async_wait(use_awaitable);
            }
        }
    }

    void stop() {
        // Close on the io thread; acceptors are not thread-safe.
        asio::post(io, [self = shared_from_this()] {
            boost::system::error_code ignored;
            if (self->tcp_acceptor) self->tcp_acceptor->close(ignored);
            if (self->local_acceptor) self->local_acceptor->close(ignored);
        });
    }
};

Listener::Listener(asio::io_context& io, Endpoint endpoint, ConnectionHandler handler)
    : impl_(std::make_shared<Impl>(io, std::move(endpoint), std::move(handler))) {
    impl_->open();
    if (impl_->local_acceptor) {
        asio::co_spawn(io, impl_->accept_local(), asio::detached);
    } else {
        asio::co_spawn(io, impl_->accept_tcp(), asio::detached);
    }
}

Listener::~Listener() { stop(); }

std::uint16_t Listener::port() const noexcept { return impl_->bound_port; }

const Endpoint& Listener::endpoint() const noexcept { return impl_->endpoint; }

void Listener::stop() { impl_->stop(); }

}  // namespace evgw
