#pragma once

#include <chrono>
#include <thread>
#include <vector>

#include "evgw/model.hpp"
#include "evgw/password.hpp"
#include "evgw/registry.hpp"

namespace evgw::test {

// The three example channels: power outage, temperature above 50 °C, light
// below 20 lux.
inline std::vector<Channel> example_channels() {
    Channel power{ChannelId{0}, "power_outage", Condition::flag(), {true, true, true}, std::nullopt};
    Channel heat{ChannelId{1}, "high_temperature", Condition::threshold_of(CompareOp::GT, 50.0, "C"),
                 {true, true, false}, std::nullopt};
    Channel dark{ChannelId{2}, "low_light", Condition::threshold_of(CompareOp::LT, 20.0, "lux"),
                 {true, false, false}, std::nullopt};
    return {power, heat, dark};
}

inline constexpr int kFastKdf = 1000;

inline std::vector<Account> test_accounts() {
    return {
        Account{Role::Admin, "admin", make_password_digest("admin-pass", kFastKdf)},
        Account{Role::Subscriber, "alice", make_password_digest("alice-pass", kFastKdf)},
    };
}

template <class Pred>
bool eventually(Pred pred, std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return pred();
}

}  // namespace evgw::test
