#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "evgw/codec.hpp"

namespace evgw {

class ClientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Where a protocol client connects. Text form: `tcp://host:port`,
/// `tls://host:port`, `ws://host:port` or `unix:<path>`.
struct ClientEndpoint {
    enum class Kind { Tcp, Tls, Local, WebSocket };

    Kind kind = Kind::Tcp;
    std::string host = "127.0.0.1";
    std::uint16_t port = 7002;
    std::string path;
    std::string ca_file;  // TLS: verify the server against this CA; empty = no verification

    static ClientEndpoint parse(std::string_view text);
    std::string to_string() const;
};

/// Blocking request/response client for the command protocol.
class ProtocolClient {
public:
    virtual ~ProtocolClient() = default;

    /// Throws ClientError if the connection cannot be set up.
    static std::unique_ptr<ProtocolClient> connect(const ClientEndpoint& endpoint,
                                                   std::chrono::milliseconds timeout = std::chrono::seconds(10));

    /// Throws ClientError on transport failure.
    virtual void send_frame(std::string_view frame) = 0;
    /// nullopt once the gateway has closed the connection.
    virtual std::optional<std::string> read_frame() = 0;
    virtual void close() = 0;

    /// One lockstep exchange; throws ClientError if no reply arrives.
    std::string request(std::string_view frame);
    Response call(const Command& command);
};

}  // namespace evgw
