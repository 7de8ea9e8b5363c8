#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "evgw/config.hpp"
#include "evgw/ingest.hpp"
#include "evgw/metrics.hpp"
#include "evgw/notify.hpp"
#include "evgw/registry.hpp"

namespace evgw {

/// The broker process: sensor listener, client listeners on every enabled
/// transport, the registry, and the notifier, wired together.
class Gateway {
public:
    /// Builds the registry and adopts the snapshot if one exists. Throws
    /// ConfigError when the snapshot is unreadable.
    explicit Gateway(GatewayConfig config);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds every listener and starts the worker threads.
    void start();
    /// Stops listeners, drains the notifier and writes a final snapshot.
    void stop();

    std::uint16_t sensor_port() const;
    std::uint16_t client_port() const;
    std::uint16_t tls_port() const;
    std::uint16_t websocket_port() const;
    const std::string& local_path() const;

    Registry& registry();
    Metrics& metrics();
    Notifier& notifier();
    FiringQueue& queue();
    const GatewayConfig& config() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace evgw
