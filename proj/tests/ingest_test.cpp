#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "evgw/ingest.hpp"
#include "support.hpp"

namespace evgw {
namespace {

using namespace std::chrono_literals;

std::vector<std::size_t> firing_positions(const Condition& condition, const std::vector<double>& trace,
                                          std::optional<std::chrono::milliseconds> retrigger = std::nullopt,
                                          std::chrono::milliseconds spacing = 1ms) {
    Channel channel{ChannelId{1}, "c", condition, {}, retrigger};
    Registry registry({channel}, test::test_accounts(), test::kFastKdf);
    Metrics metrics;
    Ingest ingest(registry, metrics);
    std::vector<std::size_t> out;
    const auto t0 = SteadyClock::now();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (ingest.on_reading({ChannelId{1}, trace[i], t0 + spacing * static_cast<int>(i)})) out.push_back(i);
    }
    return out;
}

TEST(Ingest, EdgeTriggerExample) {
    const auto gt50 = Condition::threshold_of(CompareOp::GT, 50.0);
    EXPECT_EQ(firing_positions(gt50, {49, 51, 52, 49, 51}), (std::vector<std::size_t>{1, 4}));
}

TEST(Ingest, FirstReadingSatisfiedFires) {
    EXPECT_EQ(firing_positions(Condition::threshold_of(CompareOp::GT, 50.0), {51}).size(), 1u);
}

TEST(Ingest, HeldFlagFiresOnce) {
    EXPECT_EQ(firing_positions(Condition::flag(), {1, 1, 1}).size(), 1u);
}

TEST(Ingest, RetriggerWhileHeld) {
    // 10 ms spacing, 25 ms interval: fires at 0, then at 30 and 60 ms.
    const auto positions = firing_positions(Condition::flag(), {1, 1, 1, 1, 1, 1, 1}, 25ms, 10ms);
    EXPECT_EQ(positions, (std::vector<std::size_t>{0, 3, 6}));
}

TEST(Ingest, RandomTracesMatchBruteForce) {
    std::mt19937 rng(3);
    const Condition conditions[] = {
        Condition::threshold_of(CompareOp::GT, 5), Condition::threshold_of(CompareOp::GE, 5),
        Condition::threshold_of(CompareOp::LT, 5), Condition::threshold_of(CompareOp::LE, 5),
        Condition::threshold_of(CompareOp::EQ, 5), Condition::flag(),
    };
    for (const auto& condition : conditions) {
        for (int t = 0; t < 20; ++t) {
            std::vector<double> trace(50);
            for (auto& v : trace) v = static_cast<double>(rng() % 11) - (condition.kind == Condition::Kind::BooleanFlag ? 5 : 0);
            // Brute force: positions where the predicate, written out by hand,
            // turns true from false (or from no previous reading).
            auto holds = [&](double v) {
                if (condition.kind == Condition::Kind::BooleanFlag) return v != 0;
                switch (condition.op) {
                    case CompareOp::GT: return v > 5;
                    case CompareOp::GE: return v >= 5;
                    case CompareOp::LT: return v < 5;
                    case CompareOp::LE: return v <= 5;
                    case CompareOp::EQ: return v == 5;
                }
                return false;
            };
            std::vector<std::size_t> expected;
            for (std::size_t i = 0; i < trace.size(); ++i) {
                if (holds(trace[i]) && (i == 0 || !holds(trace[i - 1]))) expected.push_back(i);
            }
            ASSERT_EQ(firing_positions(condition, trace), expected);
        }
    }
}

TEST(Ingest, UnknownChannelCounted) {
    Registry registry(test::example_channels(), test::test_accounts(), test::kFastKdf);
    Metrics metrics;
    Ingest ingest(registry, metrics);
    EXPECT_FALSE(ingest.on_reading({ChannelId{99}, 1.0, SteadyClock::now()}));
    EXPECT_EQ(metrics.dropped_unknown_channel.load(), 1u);
    EXPECT_EQ(metrics.readings_accepted.load(), 0u);
}

TEST(Ingest, ConcurrentNodesOnDifferentChannels) {
    Registry registry(test::example_channels(), test::test_accounts(), test::kFastKdf);
    Metrics metrics;
    FiringQueue queue(10000);
    Ingest ingest(registry, metrics, &queue);
    // Node A: flag channel 0 toggling; node B: GT-50 channel 1 toggling.
    auto node = [&](ChannelId channel, double low, double high) {
        for (int i = 0; i < 1000; ++i) ingest.on_reading({channel, i % 2 ? high : low, SteadyClock::now()});
    };
    std::thread a(node, ChannelId{0}, 0.0, 1.0);
    std::thread b(node, ChannelId{1}, 10.0, 60.0);
    a.join();
    b.join();
    // Sequential replay oracle: each channel alternates low/high 1000 times,
    // ending on high, and fires on each of its 500 rising edges.
    EXPECT_EQ(registry.latest(ChannelId{0})->value, 1.0);
    EXPECT_EQ(registry.latest(ChannelId{1})->value, 60.0);
    EXPECT_EQ(metrics.firings.load(), 1000u);
    EXPECT_EQ(queue.size(), 1000u);
}

TEST(FiringQueue, DropsOldestWhenFull) {
    FiringQueue queue(2);
    auto firing = [](double v) { return EventFiring{ChannelId{1}, "c", v, SystemClock::now(), SteadyClock::now()}; };
    EXPECT_TRUE(queue.push(firing(1)));
    EXPECT_TRUE(queue.push(firing(2)));
    EXPECT_FALSE(queue.push(firing(3)));
    EXPECT_EQ(queue.overflow_count(), 1u);
    EXPECT_EQ(queue.try_pop()->value, 2);
    EXPECT_EQ(queue.try_pop()->value, 3);
    EXPECT_FALSE(queue.try_pop());
}

TEST(FiringQueue, CloseReleasesConsumers) {
    FiringQueue queue;
    std::thread consumer([&] { EXPECT_FALSE(queue.pop()); });
    std::this_thread::sleep_for(10ms);
    queue.close();
    consumer.join();
}

TEST(Ingest, OverflowIsCounted) {
    Registry registry(test::example_channels(), test::test_accounts(), test::kFastKdf);
    Metrics metrics;
    FiringQueue queue(1);
    Ingest ingest(registry, metrics, &queue);
    for (int i = 0; i < 6; ++i) ingest.on_reading({ChannelId{0}, static_cast<double>(i % 2), SteadyClock::now()});
    EXPECT_EQ(metrics.firings.load(), 3u);
    EXPECT_EQ(metrics.queue_overflow.load(), 2u);
}

}  // namespace
}  // namespace evgw
