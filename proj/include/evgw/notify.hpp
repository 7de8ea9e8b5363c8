#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "evgw/config.hpp"
#include "evgw/ingest.hpp"
#include "evgw/metrics.hpp"
#include "evgw/modem.hpp"
#include "evgw/model.hpp"
#include "evgw/registry.hpp"

namespace evgw {

inline constexpr std::size_t kSmsMaxChars = 160;

/// "<event> triggered: value=<value> at <UTC ISO-8601>", cut to `max_chars`.
std::string render_message(const EventFiring& firing, std::size_t max_chars = kSmsMaxChars);

/// Seconds-resolution UTC timestamp, e.g. 2020-01-01T00:00:00Z.
std::string format_utc(SystemClock::time_point when);

enum class Transport { Push, Sms, Call };

std::string_view to_string(Transport transport);

struct Notification {
    EventFiring firing;
    SubscriberAddress target;
    Transport via = Transport::Push;
    Outcome outcome;
};

class PushSender {
public:
    virtual ~PushSender() = default;
    virtual Outcome send(const SubscriberAddress& target, const EventFiring& firing,
                         std::string_view message) = 0;
};

/// FCM-style HTTP push: POSTs `{"to": <token>, "data": {...}}` to the
/// configured URL. 2xx is Delivered, any other status is Failed("http_<code>"),
/// and a transport error or timeout is Failed("timeout").
class HttpPushSender final : public PushSender {
public:
    explicit HttpPushSender(PushConfig config);

    Outcome send(const SubscriberAddress& target, const EventFiring& firing,
                 std::string_view message) override;

    static Json body(const SubscriberAddress& target, const EventFiring& firing, std::string_view message);

private:
    PushConfig config_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

/// Fans each firing out to every subscriber of its channel over every
/// transport the channel's policy enables. Push sends run concurrently up to
/// the in-flight cap; SMS and calls go through the single modem lane.
class Notifier {
public:
    Notifier(Registry& registry, NotifyConfig config, Metrics& metrics,
             std::shared_ptr<PushSender> push, std::shared_ptr<ModemLane> modem);
    ~Notifier();

    Notifier(const Notifier&) = delete;
    Notifier& operator=(const Notifier&) = delete;

    /// Blocks until every attempt for this firing has an outcome. Never throws.
    std::vector<Notification> dispatch(const EventFiring& firing);

    /// Starts worker threads that drain `queue` into dispatch().
    void start(FiringQueue& queue);
    /// Joins the workers; the queue must have been closed first.
    void join();

    /// Most recent outcomes, oldest first.
    std::vector<Notification> delivery_log() const;

private:
    class PushPool;

    Outcome with_retries(const std::function<Outcome()>& attempt) const;
    Outcome push_once(const SubscriberAddress& target, const EventFiring& firing,
                      const std::string& message);
    void record(const std::vector<Notification>& notifications);

    Registry& registry_;
    NotifyConfig config_;
    Metrics& metrics_;
    std::shared_ptr<PushSender> push_;
    std::shared_ptr<ModemLane> modem_;
    std::unique_ptr<PushPool> pool_;
    std::vector<std::thread> workers_;
    mutable std::mutex log_mutex_;
    std::deque<Notification> log_;
};

}  // namespace evgw
