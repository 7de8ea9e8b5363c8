#include "evgw/notify.hpp"

#include <charconv>
#include <ctime>
#include <future>

#include <boost/asio/post.hpp>
#include <boost/asio/thread_pool.hpp>
#include <httplib.h>

namespace evgw {

namespace {

std::string format_value(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    if (ec != std::errc{}) return std::to_string(value);
    return std::string(buffer, end);
}

}  // namespace

std::string format_utc(SystemClock::time_point when) {
    const std::time_t seconds = SystemClock::to_time_t(when);
    std::tm utc{};
    ::gmtime_r(&seconds, &utc);
    char buffer[32];
    const auto n = std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return std::string(buffer, n);
}

std::string render_message(const EventFiring& firing, std::size_t max_chars) {
    std::string text = firing.event_name + " triggered: value=" + format_value(firing.value) + " at " +
                       format_utc(firing.fired_at);
    if (text.size() > max_chars) text.resize(max_chars);
    return text;
}

std::string_view to_string(Transport transport) {
    switch (transport) {
        case Transport::Push: return "push";
        case Transport::Sms: return "sms";
        case Transport::Call: return "call";
    }
    return "push";
}

HttpPushSender::HttpPushSender(PushConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    const auto path_start =
        scheme_end == std::string::npos ? std::string::npos : config_.url.find('/', scheme_end + 3);
    base_ = config_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

Json HttpPushSender::body(const SubscriberAddress& target, const EventFiring& firing,
                          std::string_view message) {
    return Json{{"to", target.push_token},
                {"data",
                 {{"event", firing.event_name},
                  {"channel", firing.channel.value},
                  {"value", firing.value},
                  {"timestamp", format_utc(firing.fired_at)},
                  {"message", std::string(message)}}}};
}

Outcome HttpPushSender::send(const SubscriberAddress& target, const EventFiring& firing,
                             std::string_view message) {
    if (base_.empty()) return Outcome::failed("unconfigured");
    httplib::Client client(base_);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!config_.auth_header.empty()) headers.emplace("Authorization", config_.auth_header);
    const auto result = client.Post(path_, headers, body(target, firing, message).dump(), "application/json");
    if (!result) return Outcome::failed("timeout");
    if (result->status >= 200 && result->status < 300) return Outcome::delivered();
    return Outcome::failed("http_" + std::to_string(result->status));
}

class Notifier::PushPool {
public:
    explicit PushPool(std::size_t threads) : pool_(threads) {}
    ~PushPool() { pool_.join(); }

    std::future<Outcome> submit(std::function<Outcome()> job) {
        auto task = std::make_shared<std::packaged_task<Outcome()>>(std::move(job));
        auto future = task->get_future();
        boost::asio::post(pool_, [task] { (*task)(); });
        return future;
    }

private:
    boost::asio::thread_pool pool_;
};

Notifier::Notifier(Registry& registry, NotifyConfig config, Metrics& metrics,
                   std::shared_ptr<PushSender> push, std::shared_ptr<ModemLane> modem)
    : registry_(registry),
      config_(std::move(config)),
      metrics_(metrics),
      push_(std::move(push)),
      modem_(std::move(modem)),
      pool_(std::make_unique<PushPool>(config_.push.max_in_flight)) {}

Notifier::~Notifier() { join(); }

Outcome Notifier::with_retries(const std::function<Outcome()>& attempt) const {
    Outcome outcome = attempt();
    for (int retry = 0; retry < config_.retries && outcome.kind == Outcome::Kind::Failed; ++retry) {
        std::this_thread::sleep_for(config_.retry_backoff);
        outcome = attempt();
    }
    return outcome;
}

Outcome Notifier::push_once(const SubscriberAddress& target, const EventFiring& firing,
                            const std::string& message) {
    if (!push_) return Outcome::failed("unconfigured");
    try {
        return push_->send(target, firing, message);
    } catch (const std::exception& e) {
        return Outcome::failed(e.what());
    }
}

std::vector<Notification> Notifier::dispatch(const EventFiring& firing) {
    std::vector<Notification> out;
    try {
        const auto channel = registry_.channel(firing.channel);
        if (!channel) return out;
        const auto policy = channel->policy;
        const auto subscribers = registry_.subscribers_of(firing.channel);
        const std::string message = render_message(firing);
        const auto ring = config_.modem.ring_duration;
        const bool escalate = config_.call_mode == CallMode::Escalate;

        struct Pending {
            std::size_t index;
            std::future<Outcome> future;
        };
        std::vector<Pending> pending;
        // Each modem job yields the SMS outcome and the call outcome, in that order.
        std::vector<std::pair<std::size_t, std::future<std::pair<Outcome, Outcome>>>> modem_jobs;

        for (const auto& target : subscribers) {
            if (policy.push) {
                out.push_back(Notification{firing, target, Transport::Push, {}});
                pending.push_back({out.size() - 1, pool_->submit([this, target, firing, message] {
                                       return with_retries([&] { return push_once(target, firing, message); });
                                   })});
            }
            if (!policy.sms && !policy.call) continue;

            const std::size_t first = out.size();
            if (policy.sms) out.push_back(Notification{firing, target, Transport::Sms, {}});
            if (policy.call) out.push_back(Notification{firing, target, Transport::Call, {}});
            if (!modem_) {
                for (std::size_t i = first; i < out.size(); ++i) out[i].outcome = Outcome::failed("unconfigured");
                continue;
            }

            auto result = std::make_shared<std::promise<std::pair<Outcome, Outcome>>>();
            modem_jobs.emplace_back(first, result->get_future());
            const bool sms = policy.sms;
            const bool call = policy.call;
            auto job = [this, result, target, message, sms, call, ring, escalate](AtModem& modem) {
                Outcome sms_outcome;
                Outcome call_outcome;
                if (sms) {
                    sms_outcome = with_retries([&] { return modem.send_sms(target.phone, message); });
                }
                if (call) {
                    if (sms && escalate && sms_outcome.ok()) {
                        call_outcome = Outcome::skipped("sms_delivered");
                    } else {
                        call_outcome = with_retries([&] { return modem.ring(target.phone, ring); });
                    }
                }
                result->set_value({sms_outcome, call_outcome});
                return sms ? sms_outcome : call_outcome;
            };
            modem_->submit(std::move(job));
        }

        for (auto& p : pending) out[p.index].outcome = p.future.get();
        for (auto& [first, future] : modem_jobs) {
            auto [sms_outcome, call_outcome] = future.get();
            std::size_t i = first;
            if (out[i].via == Transport::Sms) out[i++].outcome = sms_outcome;
            if (i < out.size() && out[i].via == Transport::Call && out[i].target == out[first].target) {
                out[i].outcome = call_outcome;
            }
        }
    } catch (const std::exception& e) {
        for (auto& n : out) {
            if (n.outcome.kind == Outcome::Kind::Pending) n.outcome = Outcome::failed(e.what());
        }
    }
    record(out);
    return out;
}

void Notifier::record(const std::vector<Notification>& notifications) {
    std::lock_guard lock(log_mutex_);
    for (const auto& n : notifications) {
        if (n.outcome.kind == Outcome::Kind::Delivered) metrics_.notifications_delivered.fetch_add(1);
        if (n.outcome.kind == Outcome::Kind::Failed) metrics_.notifications_failed.fetch_add(1);
        if (config_.log_capacity == 0) continue;
        if (log_.size() >= config_.log_capacity) log_.pop_front();
        log_.push_back(n);
    }
}

std::vector<Notification> Notifier::delivery_log() const {
    std::lock_guard lock(log_mutex_);
    return {log_.begin(), log_.end()};
}

void Notifier::start(FiringQueue& queue) {
    for (std::size_t i = 0; i < config_.workers; ++i) {
        workers_.emplace_back([this, &queue] {
            while (auto firing = queue.pop()) dispatch(*firing);
        });
    }
}

void Notifier::join() {
    for (auto& worker : workers_) {
        if (worker.joinable()) worker.join();
    }
    workers_.clear();
}

}  // namespace evgw
