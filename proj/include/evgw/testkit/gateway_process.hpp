#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "evgw/client.hpp"
#include "evgw/config.hpp"
#include "evgw/testkit/child_process.hpp"

namespace evgw::testkit {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "evgw");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct GatewayPorts {
    std::uint16_t sensor = 0;
    std::uint16_t client = 0;
    std::uint16_t tls = 0;
    std::uint16_t websocket = 0;
    std::string local;
};

/// A gatewayd child running the given config, written to `config_path`.
/// The constructor returns once the daemon printed its bound ports.
class GatewayProcess {
public:
    GatewayProcess(const std::filesystem::path& gatewayd, const GatewayConfig& config,
                   const std::filesystem::path& config_path,
                   std::chrono::milliseconds startup_timeout = std::chrono::seconds(20));

    const GatewayPorts& ports() const noexcept { return ports_; }
    ChildProcess& process() noexcept { return *child_; }

    ClientEndpoint client_endpoint() const;
    std::optional<long> rss_kb() const { return child_->rss_kb(); }

    /// SIGTERM and wait; returns the exit status.
    int stop();
    /// SIGKILL and wait.
    void kill();

private:
    std::unique_ptr<ChildProcess> child_;
    GatewayPorts ports_;
};

/// Directory holding the running executable; tools are built side by side.
std::filesystem::path self_directory();

/// Accounts used by the test configs: one admin, one subscriber.
inline constexpr const char* kAdminAccount = "admin";
inline constexpr const char* kAdminPassword = "admin-pass";
inline constexpr const char* kSubscriberAccount = "alice";
inline constexpr const char* kSubscriberPassword = "alice-pass";

/// Loopback-only config with ephemeral ports, cheap key derivation and the
/// two accounts above. Channels are left to the caller.
GatewayConfig loopback_config(int kdf_iterations = 1000);

}  // namespace evgw::testkit
