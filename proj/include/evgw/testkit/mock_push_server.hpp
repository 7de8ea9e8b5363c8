#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evgw/codec.hpp"
#include "evgw/model.hpp"

namespace evgw::testkit {

struct PushRecord {
    Json body;
    std::string authorization;
    SteadyClock::time_point received_at;
};

/// Loopback HTTP server that accepts push POSTs and records their bodies.
class MockPushServer {
public:
    MockPushServer();
    ~MockPushServer();

    MockPushServer(const MockPushServer&) = delete;
    MockPushServer& operator=(const MockPushServer&) = delete;

    /// Binds 127.0.0.1 on an ephemeral port and starts serving.
    std::uint16_t start();
    void stop();

    std::string url() const;
    std::uint16_t port() const;

    /// Status code returned to every request (default 200).
    void set_status(int status);
    void set_delay(std::chrono::milliseconds delay);

    std::vector<PushRecord> received() const;
    std::size_t count() const;
    bool wait_for(std::size_t count, std::chrono::milliseconds timeout) const;
    void clear();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace evgw::testkit
