#include "evgw/client.hpp"

#include <charconv>

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/local/stream_protocol.hpp>
#include <boost/asio/read_until.hpp>
#include <boost/asio/ssl.hpp>
#include <boost/asio/write.hpp>
#include <boost/beast/core/buffers_to_string.hpp>
#include <boost/beast/core/flat_buffer.hpp>
#include <boost/beast/websocket.hpp>

namespace evgw {

namespace {

namespace asio = boost::asio;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using boost::system::error_code;

std::uint16_t parse_port(std::string_view text, std::string_view whole) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value == 0 || value > 65535) {
        throw ClientError("bad port in endpoint '" + std::string(whole) + "'");
    }
    return static_cast<std::uint16_t>(value);
}

// Runs async operations on a private io_context with a deadline, after the
// blocking_tcp_client pattern: on timeout the socket is closed, which
// completes the pending operation with an error.
class Driver {
public:
    explicit Driver(std::chrono::milliseconds timeout) : timeout_(timeout) {}

    asio::io_context& io() { return io_; }

    template <class Closer>
    void run(Closer&& close_socket) {
        io_.restart();
        io_.run_for(timeout_);
        if (!io_.stopped()) {
            close_socket();
            io_.run();
        }
    }

private:
    asio::io_context io_;
    std::chrono::milliseconds timeout_;
};

template <class Stream>
class LineClient final : public ProtocolClient {
public:
    // `keep` holds anything the stream borrows (the TLS context).
    template <class... Args>
    LineClient(std::unique_ptr<Driver> driver, std::shared_ptr<void> keep, Args&&... args)
        : driver_(std::move(driver)), keep_(std::move(keep)), stream_(std::forward<Args>(args)...) {}

    Stream& stream() { return stream_; }
    Driver& driver() { return *driver_; }

    void send_frame(std::string_view frame) override {
        std::string out(frame);
        out.push_back('\n');
        error_code result = asio::error::would_block;
        asio::async_write(stream_, asio::buffer(out), [&](error_code ec, std::size_t) { result = ec; });
        driver_->run([this] { close(); });
        if (result) throw ClientError("send failed: " + result.message());
    }

    std::optional<std::string> read_frame() override {
        if (auto line = take_line()) return line;
        error_code result = asio::error::would_block;
        asio::async_read_until(stream_, asio::dynamic_buffer(buffer_), '\n',
                               [&](error_code ec, std::size_t) { result = ec; });
        driver_->run([this] { close(); });
        if (result) return std::nullopt;
        return take_line();
    }

    void close() override {
        error_code ignored;
        stream_.lowest_layer().close(ignored);
    }

private:
    std::optional<std::string> take_line() {
        const auto newline = buffer_.find('\n');
        if (newline == std::string::npos) return std::nullopt;
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    std::unique_ptr<Driver> driver_;
    std::shared_ptr<void> keep_;
    Stream stream_;
    std::string buffer_;
};

class WebSocketClient final : public ProtocolClient {
public:
    explicit WebSocketClient(std::unique_ptr<Driver> driver)
        : driver_(std::move(driver)), ws_(driver_->io()) {}

    websocket::stream<tcp::socket>& ws() { return ws_; }
    Driver& driver() { return *driver_; }

    void send_frame(std::string_view frame) override {
        error_code result = asio::error::would_block;
        ws_.text(true);
        ws_.async_write(asio::buffer(frame.data(), frame.size()), [&](error_code ec, std::size_t) { result = ec; });
        driver_->run([this] { close(); });
        if (result) throw ClientError("send failed: " + result.message());
    }

    std::optional<std::string> read_frame() override {
        boost::beast::flat_buffer buffer;
        error_code result = asio::error::would_block;
        ws_.async_read(buffer, [&](error_code ec, std::size_t) { result = ec; });
        driver_->run([this] { close(); });
        if (result) return std::nullopt;
        return boost::beast::buffers_to_string(buffer.data());
    }

    void close() override {
        error_code ignored;
        ws_.next_layer().close(ignored);
    }

private:
    std::unique_ptr<Driver> driver_;
    websocket::stream<tcp::socket> ws_;
};

void connect_tcp(Driver& driver, tcp::socket& socket, const ClientEndpoint& endpoint) {
    tcp::resolver resolver(driver.io());
    error_code ec;
    const auto results = resolver.resolve(endpoint.host, std::to_string(endpoint.port), ec);
    if (ec) throw ClientError("cannot resolve " + endpoint.host + ": " + ec.message());
    error_code result = asio::error::would_block;
    asio::async_connect(socket, results, [&](error_code e, const tcp::endpoint&) { result = e; });
    driver.run([&] { socket.close(ec); });
    if (result) throw ClientError("cannot connect to " + endpoint.to_string() + ": " + result.message());
    socket.set_option(tcp::no_delay(true), ec);
}

}  // namespace

ClientEndpoint ClientEndpoint::parse(std::string_view text) {
    ClientEndpoint out;
    std::string_view rest;
    if (text.starts_with("unix:")) {
        out.kind = Kind::Local;
        out.path = std::string(text.substr(text.starts_with("unix://") ? 7 : 5));
        if (out.path.empty()) throw ClientError("empty socket path in endpoint");
        return out;
    }
    if (text.starts_with("tcp://")) {
        out.kind = Kind::Tcp;
        rest = text.substr(6);
    } else if (text.starts_with("tls://")) {
        out.kind = Kind::Tls;
        rest = text.substr(6);
    } else if (text.starts_with("ws://")) {
        out.kind = Kind::WebSocket;
        rest = text.substr(5);
    } else {
        rest = text;
    }
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) throw ClientError("endpoint '" + std::string(text) + "' needs host:port");
    out.host = std::string(rest.substr(0, colon));
    out.port = parse_port(rest.substr(colon + 1), text);
    if (out.host.empty()) throw ClientError("endpoint '" + std::string(text) + "' needs a host");
    return out;
}

std::string ClientEndpoint::to_string() const {
    switch (kind) {
        case Kind::Local: return "unix:" + path;
        case Kind::Tls: return "tls://" + host + ":" + std::to_string(port);
        case Kind::WebSocket: return "ws://" + host + ":" + std::to_string(port);
        case Kind::Tcp: break;
    }
    return "tcp://" + host + ":" + std::to_string(port);
}

std::unique_ptr<ProtocolClient> ProtocolClient::connect(const ClientEndpoint& endpoint,
                                                        std::chrono::milliseconds timeout) {
    auto driver = std::make_unique<Driver>(timeout);
    switch (endpoint.kind) {
        case ClientEndpoint::Kind::Tcp: {
            auto client = std::make_unique<LineClient<tcp::socket>>(std::move(driver), nullptr, driver->io());
            connect_tcp(client->driver(), client->stream(), endpoint);
            return client;
        }
        case ClientEndpoint::Kind::Local: {
            using socket_type = asio::local::stream_protocol::socket;
            auto client = std::make_unique<LineClient<socket_type>>(std::move(driver), nullptr, driver->io());
            error_code ec;
            client->stream().connect(asio::local::stream_protocol::endpoint(endpoint.path), ec);
            if (ec) throw ClientError("cannot connect to " + endpoint.to_string() + ": " + ec.message());
            return client;
        }
        case ClientEndpoint::Kind::Tls: {
            auto context = std::make_shared<asio::ssl::context>(asio::ssl::context::tls_client);
            if (endpoint.ca_file.empty()) {
                context->set_verify_mode(asio::ssl::verify_none);
            } else {
                context->load_verify_file(endpoint.ca_file);
                context->set_verify_mode(asio::ssl::verify_peer);
            }
            using stream_type = asio::ssl::stream<tcp::socket>;
            auto client = std::make_unique<LineClient<stream_type>>(std::move(driver), context, driver->io(), *context);
            connect_tcp(client->driver(), client->stream().next_layer(), endpoint);
            SSL_set_tlsext_host_name(client->stream().native_handle(), endpoint.host.c_str());
            error_code result = asio::error::would_block;
            client->stream().async_handshake(asio::ssl::stream_base::client, [&](error_code ec) { result = ec; });
            client->driver().run([&] { client->close(); });
            if (result) throw ClientError("tls handshake with " + endpoint.to_string() + " failed: " + result.message());
            return client;
        }
        case ClientEndpoint::Kind::WebSocket: {
            auto client = std::make_unique<WebSocketClient>(std::move(driver));
            connect_tcp(client->driver(), client->ws().next_layer(), endpoint);
            error_code result = asio::error::would_block;
            client->ws().async_handshake(endpoint.host + ":" + std::to_string(endpoint.port), "/",
                                         [&](error_code ec) { result = ec; });
            client->driver().run([&] { client->close(); });
            if (result) throw ClientError("websocket handshake with " + endpoint.to_string() + " failed: " + result.message());
            return client;
        }
    }
    throw ClientError("unsupported endpoint");
}

std::string ProtocolClient::request(std::string_view frame) {
    send_frame(frame);
    auto reply = read_frame();
    if (!reply) throw ClientError("connection closed before a reply arrived");
    return *reply;
}

Response ProtocolClient::call(const Command& command) {
    const auto raw = request(encode_command(command));
    auto response = decode_response(raw);
    if (!response) throw ClientError("undecodable reply: " + raw);
    return *response;
}

}  // namespace evgw
