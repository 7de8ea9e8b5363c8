#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evgw/codec.hpp"
#include "evgw/model.hpp"
#include "evgw/registry.hpp"

namespace evgw {

/// Startup configuration problem. The message names the offending field as a
/// JSON path (e.g. `channels[1].name`) or a line:column for syntax errors.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ListenerConfig {
    bool enabled = true;
    std::string bind = "0.0.0.0";
    std::uint16_t port = 0;
};

struct TlsConfig {
    bool enabled = false;
    std::string bind = "0.0.0.0";
    std::uint16_t port = 7004;
    std::string cert_file;
    std::string key_file;
};

struct SensorConfig {
    ListenerConfig listener{true, "0.0.0.0", 7001};
    std::chrono::milliseconds read_timeout{300'000};
};

struct ClientConfig {
    ListenerConfig tcp{true, "0.0.0.0", 7002};
    TlsConfig tls;
    ListenerConfig websocket{false, "0.0.0.0", 7003};
    // Local stream socket standing in for the Bluetooth link; empty = off.
    std::string local_path;
    std::chrono::milliseconds init_timeout{10'000};
    std::chrono::milliseconds idle_timeout{120'000};
};

struct PushConfig {
    std::string url;  // empty: push deliveries fail as "unconfigured"
    std::string auth_header;
    std::chrono::milliseconds timeout{10'000};
    std::size_t max_in_flight = 64;
};

struct ModemConfig {
    // "unix:<path>", "tcp:<host>:<port>" or a serial device path; empty = off.
    std::string endpoint;
    std::chrono::milliseconds step_timeout{30'000};
    std::chrono::milliseconds ring_duration{15'000};
    int baud = 115200;
};

enum class CallMode { Escalate, Always };

struct NotifyConfig {
    bool enabled = true;
    PushConfig push;
    ModemConfig modem;
    int retries = 0;
    std::chrono::milliseconds retry_backoff{1'000};
    CallMode call_mode = CallMode::Escalate;
    std::size_t queue_capacity = 1024;
    std::size_t workers = 4;
    std::size_t log_capacity = 1000;
};

struct GatewayConfig {
    SensorConfig sensor;
    ClientConfig client;
    NotifyConfig notify;
    std::string snapshot_path;  // empty: no persistence
    bool snapshot_fsync = true;
    int kdf_iterations = 10000;
    std::size_t io_threads = 0;  // 0: one per hardware thread
    std::vector<Channel> channels;
    std::vector<Account> accounts;
};

GatewayConfig parse_config(std::string_view text);
GatewayConfig load_config(const std::filesystem::path& path);
Json to_json(const GatewayConfig& config);

// Shared by the config file and the snapshot document. The `where` prefix is
// used in ConfigError messages.
Json channel_to_json(const Channel& channel);
Channel channel_from_json(const Json& doc, const std::string& where);
Json account_to_json(const Account& account);
Account account_from_json(const Json& doc, const std::string& where);

}  // namespace evgw
