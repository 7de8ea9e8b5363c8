#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <boost/asio/awaitable.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ssl/context.hpp>

namespace evgw {

namespace asio = boost::asio;

struct FrameRead {
    enum class Status { Frame, Closed, TooLong, TimedOut };

    Status status = Status::Closed;
    std::string payload;
};

/// Whole-frame reader/writer over one client or sensor connection. On stream
/// sockets a frame is one newline-terminated line (a trailing CR is
/// stripped); on the WebSocket bridge it is one text message.
class FramedStream {
public:
    virtual ~FramedStream() = default;

    virtual asio::awaitable<FrameRead> read_frame(std::chrono::milliseconds timeout) = 0;
    /// Appends the frame terminator. False if the peer is gone.
    virtual asio::awaitable<bool> write_frame(std::string_view frame) = 0;
    virtual void close() = 0;
    virtual std::string_view transport_name() const = 0;
};

using ConnectionHandler = std::function<asio::awaitable<void>(std::shared_ptr<FramedStream>)>;

struct Endpoint {
    enum class Kind { Tcp, Tls, Local, WebSocket };

    Kind kind = Kind::Tcp;
    std::string bind = "0.0.0.0";
    std::uint16_t port = 0;
    std::string path;  // Local only
    std::shared_ptr<asio::ssl::context> tls;  // Tls only
};

std::string_view to_string(Endpoint::Kind kind);

/// Server-side TLS context from PEM certificate and key files; throws on error.
std::shared_ptr<asio::ssl::context> make_server_tls_context(const std::string& cert_file,
                                                            const std::string& key_file);

/// Accept loop for one endpoint. Every accepted connection is wrapped in a
/// FramedStream and handed to the handler on its own coroutine; TLS and
/// WebSocket handshakes finish first, and connections that fail them are
/// dropped without disturbing the listener.
class Listener {
public:
    /// Binds immediately; throws boost::system::system_error on failure.
    Listener(asio::io_context& io, Endpoint endpoint, ConnectionHandler handler);
    ~Listener();

    Listener(const Listener&) = delete;
    Listener& operator=(const Listener&) = delete;

    /// The bound port (useful when the endpoint asked for port 0).
    std::uint16_t port() const noexcept;
    const Endpoint& endpoint() const noexcept;

    void stop();

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

}  // namespace evgw
