#include <gtest/gtest.h>

#include <algorithm>

#include "evgw/notify.hpp"
#include "evgw/testkit/gateway_process.hpp"
#include "evgw/testkit/mock_modem.hpp"
#include "evgw/testkit/mock_push_server.hpp"
#include "support.hpp"

namespace evgw {
namespace {

using namespace std::chrono_literals;

EventFiring firing_at(std::string event, double value, ChannelId channel = ChannelId{0}) {
    using namespace std::chrono;
    return EventFiring{channel, std::move(event), value, sys_days{year{2020} / January / 1}, SteadyClock::now()};
}

TEST(RenderMessage, Template) {
    EXPECT_EQ(render_message(firing_at("power_outage", 1)), "power_outage triggered: value=1 at 2020-01-01T00:00:00Z");
    EXPECT_EQ(render_message(firing_at("high_temperature", 51.5)),
              "high_temperature triggered: value=51.5 at 2020-01-01T00:00:00Z");
}

TEST(RenderMessage, TruncatesToSmsLength) {
    EXPECT_EQ(render_message(firing_at(std::string(200, 'e'), 1)).size(), 160u);
}

TEST(RenderMessage, Deterministic) {
    const auto firing = firing_at("power_outage", 0.1);
    EXPECT_EQ(render_message(firing), render_message(firing));
}

TEST(FormatUtc, SecondsResolution) {
    using namespace std::chrono;
    EXPECT_EQ(format_utc(sys_days{year{2024} / March / 5} + 13h + 7min + 9s + 999ms), "2024-03-05T13:07:09Z");
}

class PushTest : public ::testing::Test {
protected:
    void SetUp() override { server.start(); }

    HttpPushSender sender(std::string url = {}) {
        PushConfig config;
        config.url = url.empty() ? server.url() : url;
        config.auth_header = "key=secret";
        config.timeout = 500ms;
        return HttpPushSender(config);
    }

    testkit::MockPushServer server;
    SubscriberAddress target{"+84900000001", "tokA"};
};

TEST_F(PushTest, Delivered) {
    const auto firing = firing_at("power_outage", 1);
    EXPECT_EQ(sender().send(target, firing, render_message(firing)), Outcome::delivered());
    ASSERT_EQ(server.count(), 1u);
    const auto record = server.received()[0];
    EXPECT_EQ(record.authorization, "key=secret");
    EXPECT_EQ(record.body, HttpPushSender::body(target, firing, render_message(firing)));
    EXPECT_EQ(record.body["to"], "tokA");
    EXPECT_EQ(record.body["data"]["event"], "power_outage");
}

TEST_F(PushTest, ServerError) {
    server.set_status(500);
    EXPECT_EQ(sender().send(target, firing_at("e", 1), "m"), Outcome::failed("http_500"));
}

TEST_F(PushTest, Unreachable) {
    const auto port = server.port();
    server.stop();
    EXPECT_EQ(sender("http://127.0.0.1:" + std::to_string(port) + "/fcm/send").send(target, firing_at("e", 1), "m"),
              Outcome::failed("timeout"));
}

TEST_F(PushTest, SlowServerTimesOut) {
    server.set_delay(1500ms);
    EXPECT_EQ(sender().send(target, firing_at("e", 1), "m"), Outcome::failed("timeout"));
}

TEST(PushSender, Unconfigured) {
    HttpPushSender sender(PushConfig{});
    EXPECT_EQ(sender.send({"+84900000001", "t"}, firing_at("e", 1), "m"), Outcome::failed("unconfigured"));
}

// Notifier wired to both mocks.
class NotifierTest : public ::testing::Test {
protected:
    void SetUp() override {
        push.start();
        modem.start();
        config.push.url = push.url();
        config.push.timeout = 1s;
        config.modem.ring_duration = 20ms;
        config.modem.step_timeout = 1s;
        config.retry_backoff = 1ms;
    }

    std::unique_ptr<Notifier> make(std::vector<Channel> channels) {
        registry = std::make_unique<Registry>(std::move(channels), test::test_accounts(), test::kFastKdf);
        auto lane = std::make_shared<ModemLane>(
            std::make_unique<AtModem>([this] { return open_modem_link(modem.endpoint()); }, config.modem.step_timeout));
        return std::make_unique<Notifier>(*registry, config, metrics, std::make_shared<HttpPushSender>(config.push), lane);
    }

    Channel channel(NotificationPolicy policy) {
        return Channel{ChannelId{0}, "power_outage", Condition::flag(), policy, std::nullopt};
    }

    testkit::TempDir dir;
    testkit::MockPushServer push;
    testkit::MockModem modem{dir / "modem.sock"};
    NotifyConfig config;
    Metrics metrics;
    std::unique_ptr<Registry> registry;
};

std::size_t count_via(const std::vector<Notification>& ns, Transport via, Outcome::Kind kind) {
    return std::count_if(ns.begin(), ns.end(), [&](auto& n) { return n.via == via && n.outcome.kind == kind; });
}

TEST_F(NotifierTest, FanOutIsSubscribersTimesTransports) {
    auto notifier = make({channel({true, true, false})});
    for (const char* phone : {"+84900000001", "+84900000002", "+84900000003"}) {
        ASSERT_TRUE(registry->subscribe("power_outage", {phone, std::string("tok") + phone}).has_value());
    }
    const auto ns = notifier->dispatch(firing_at("power_outage", 1));
    EXPECT_EQ(ns.size(), 6u);
    EXPECT_EQ(count_via(ns, Transport::Push, Outcome::Kind::Delivered), 3u);
    EXPECT_EQ(count_via(ns, Transport::Sms, Outcome::Kind::Delivered), 3u);
    EXPECT_EQ(push.count(), 3u);
    EXPECT_EQ(modem.messages().size(), 3u);
    EXPECT_EQ(metrics.notifications_delivered.load(), 6u);
}

TEST_F(NotifierTest, NoSubscribersNoNotifications) {
    auto notifier = make({channel({true, true, true})});
    EXPECT_TRUE(notifier->dispatch(firing_at("power_outage", 1)).empty());
}

TEST_F(NotifierTest, TransportsFailIndependently) {
    push.set_status(503);
    auto notifier = make({channel({true, true, false})});
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tokA"}).has_value());
    const auto ns = notifier->dispatch(firing_at("power_outage", 1));
    ASSERT_EQ(ns.size(), 2u);
    EXPECT_EQ(count_via(ns, Transport::Push, Outcome::Kind::Failed), 1u);
    EXPECT_EQ(count_via(ns, Transport::Sms, Outcome::Kind::Delivered), 1u);
}

TEST_F(NotifierTest, EscalationSkipsCallAfterDeliveredSms) {
    auto notifier = make({channel({false, true, true})});
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tokA"}).has_value());
    auto ns = notifier->dispatch(firing_at("power_outage", 1));
    ASSERT_EQ(ns.size(), 2u);
    EXPECT_EQ(ns[1].via, Transport::Call);
    EXPECT_EQ(ns[1].outcome, Outcome::skipped("sms_delivered"));
    EXPECT_TRUE(modem.calls().empty());

    testkit::MockModemScript broken;
    broken.cmgf_reply = "ERROR";
    modem.set_script(broken);
    ns = notifier->dispatch(firing_at("power_outage", 1));
    EXPECT_EQ(ns[0].outcome, Outcome::failed("cmgf"));
    EXPECT_EQ(ns[1].outcome, Outcome::delivered());
    EXPECT_EQ(modem.calls().size(), 1u);
}

TEST_F(NotifierTest, AlwaysModePlacesEveryCall) {
    config.call_mode = CallMode::Always;
    auto notifier = make({channel({false, true, true})});
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tokA"}).has_value());
    const auto ns = notifier->dispatch(firing_at("power_outage", 1));
    EXPECT_EQ(count_via(ns, Transport::Call, Outcome::Kind::Delivered), 1u);
    EXPECT_EQ(modem.calls().size(), 1u);
}

TEST_F(NotifierTest, ReportsLastFailureAfterRetries) {
    config.retries = 2;
    push.set_status(500);
    auto notifier = make({channel({true, false, false})});
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tokA"}).has_value());
    auto ns = notifier->dispatch(firing_at("power_outage", 1));
    EXPECT_EQ(ns[0].outcome, Outcome::failed("http_500"));
    EXPECT_EQ(push.count(), 0u);  // the mock records 2xx only
}

TEST_F(NotifierTest, OnlyTheFiringChannelsSubscribersAreNotified) {
    std::vector<Channel> channels{channel({true, false, false}),
                                  Channel{ChannelId{1}, "high_temperature", Condition::threshold_of(CompareOp::GT, 50),
                                          {true, false, false}, std::nullopt}};
    auto notifier = make(channels);
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tok-power"}).has_value());
    ASSERT_TRUE(registry->subscribe("high_temperature", {"+84900000002", "tok-heat"}).has_value());
    notifier->dispatch(firing_at("high_temperature", 60, ChannelId{1}));
    ASSERT_EQ(push.count(), 1u);
    EXPECT_EQ(push.received()[0].body["to"], "tok-heat");
}

TEST_F(NotifierTest, WorkersDrainTheQueue) {
    auto notifier = make({channel({true, false, false})});
    ASSERT_TRUE(registry->subscribe("power_outage", {"+84900000001", "tokA"}).has_value());
    FiringQueue queue;
    notifier->start(queue);
    for (int i = 0; i < 20; ++i) queue.push(firing_at("power_outage", i));
    EXPECT_TRUE(push.wait_for(20, 5s));
    queue.close();
    notifier->join();
    EXPECT_EQ(notifier->delivery_log().size(), 20u);
}

}  // namespace
}  // namespace evgw
