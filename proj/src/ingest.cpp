#include "evgw/ingest.hpp"

namespace evgw {

FiringQueue::FiringQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

bool FiringQueue::push(EventFiring firing) {
    bool dropped = false;
    {
        std::lock_guard lock(mutex_);
        if (closed_) return true;
        if (items_.size() >= capacity_) {
            items_.pop_front();
            ++overflows_;
            dropped = true;
        }
        items_.push_back(std::move(firing));
    }
    ready_.notify_one();
    return !dropped;
}

std::optional<EventFiring> FiringQueue::pop() {
    std::unique_lock lock(mutex_);
    ready_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    auto firing = std::move(items_.front());
    items_.pop_front();
    return firing;
}

std::optional<EventFiring> FiringQueue::try_pop() {
    std::lock_guard lock(mutex_);
    if (items_.empty()) return std::nullopt;
    auto firing = std::move(items_.front());
    items_.pop_front();
    return firing;
}

void FiringQueue::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

std::size_t FiringQueue::size() const {
    std::lock_guard lock(mutex_);
    return items_.size();
}

std::uint64_t FiringQueue::overflow_count() const {
    std::lock_guard lock(mutex_);
    return overflows_;
}

Ingest::Ingest(Registry& registry, Metrics& metrics, FiringQueue* queue)
    : registry_(registry), metrics_(metrics), queue_(queue) {}

std::optional<EventFiring> Ingest::on_reading(const Reading& reading) {
    std::optional<EventFiring> firing;
    {
        // One lock around record + edge test keeps each channel's
        // previous/current pair consistent under concurrent connections.
        std::lock_guard lock(mutex_);
        auto previous = registry_.record_reading(reading);
        if (!previous) {
            metrics_.dropped_unknown_channel.fetch_add(1);
            return std::nullopt;
        }
        metrics_.readings_accepted.fetch_add(1);

        const auto channel = registry_.channel(reading.channel);
        if (!channel || !evaluate(channel->condition, reading.value)) return std::nullopt;

        const auto& before = *previous;
        const bool rising = !before || !evaluate(channel->condition, *before);
        bool retrigger = false;
        if (!rising && channel->retrigger_interval) {
            auto it = last_fired_.find(reading.channel);
            retrigger = it != last_fired_.end() &&
                        reading.received_at - it->second >= *channel->retrigger_interval;
        }
        if (!rising && !retrigger) return std::nullopt;

        last_fired_[reading.channel] = reading.received_at;
        firing = EventFiring{reading.channel, channel->name, reading.value, SystemClock::now(),
                             reading.received_at};
    }
    metrics_.firings.fetch_add(1);
    if (queue_ && !queue_->push(*firing)) metrics_.queue_overflow.fetch_add(1);
    return firing;
}

}  // namespace evgw
