#pragma once

#include <atomic>
#include <cstdint>

#include "evgw/codec.hpp"

namespace evgw {

/// Gateway-wide counters. Reported in Update replies and by the bench.
struct Metrics {
    std::atomic<std::uint64_t> readings_accepted{0};
    std::atomic<std::uint64_t> dropped_unknown_channel{0};
    std::atomic<std::uint64_t> malformed_frames{0};
    std::atomic<std::uint64_t> firings{0};
    std::atomic<std::uint64_t> queue_overflow{0};
    std::atomic<std::uint64_t> notifications_delivered{0};
    std::atomic<std::uint64_t> notifications_failed{0};
    std::atomic<std::int64_t> active_connections{0};
    std::atomic<std::int64_t> peak_connections{0};

    void connection_opened() noexcept {
        const auto now = active_connections.fetch_add(1) + 1;
        auto peak = peak_connections.load();
        while (now > peak && !peak_connections.compare_exchange_weak(peak, now)) {
        }
    }
    void connection_closed() noexcept { active_connections.fetch_sub(1); }

    Json to_json() const {
        return Json{
            {"readings_accepted", readings_accepted.load()},
            {"dropped_unknown_channel", dropped_unknown_channel.load()},
            {"malformed_frames", malformed_frames.load()},
            {"firings", firings.load()},
            {"queue_overflow", queue_overflow.load()},
            {"notifications_delivered", notifications_delivered.load()},
            {"notifications_failed", notifications_failed.load()},
            {"active_connections", active_connections.load()},
            {"peak_connections", peak_connections.load()},
        };
    }
};

}  // namespace evgw
