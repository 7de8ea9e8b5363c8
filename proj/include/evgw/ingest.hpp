#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <map>
#include <mutex>
#include <optional>

#include "evgw/metrics.hpp"
#include "evgw/model.hpp"
#include "evgw/registry.hpp"

namespace evgw {

/// Bounded hand-off between ingestion and the notifier. A push never blocks:
/// when full, the oldest firing is discarded to make room.
class FiringQueue {
public:
    explicit FiringQueue(std::size_t capacity = 1024);

    /// Returns false if an older firing had to be dropped.
    bool push(EventFiring firing);

    /// Blocks until a firing is available; nullopt once closed and drained.
    std::optional<EventFiring> pop();
    std::optional<EventFiring> try_pop();

    void close();
    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t overflow_count() const;

private:
    const std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<EventFiring> items_;
    std::uint64_t overflows_ = 0;
    bool closed_ = false;
};

/// Turns readings into firings. A firing is produced when a channel's
/// condition goes from unsatisfied (or never evaluated) to satisfied, and,
/// for channels with a retrigger interval, again each time the condition has
/// held for that long since the last firing.
class Ingest {
public:
    Ingest(Registry& registry, Metrics& metrics, FiringQueue* queue = nullptr);

    /// Unknown channels are counted and yield nullopt.
    std::optional<EventFiring> on_reading(const Reading& reading);

private:
    Registry& registry_;
    Metrics& metrics_;
    FiringQueue* queue_;
    std::mutex mutex_;
    std::map<ChannelId, SteadyClock::time_point> last_fired_;
};

}  // namespace evgw
