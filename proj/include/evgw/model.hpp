#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace evgw {

using SteadyClock = std::chrono::steady_clock;
using SystemClock = std::chrono::system_clock;

struct ChannelId {
    std::uint32_t value = 0;

    auto operator<=>(const ChannelId&) const = default;
};

enum class CompareOp { GT, GE, LT, LE, EQ };

std::string_view to_string(CompareOp op);
std::optional<CompareOp> compare_op_from_string(std::string_view text);

/// Trigger condition of a channel. A threshold condition compares the reading
/// against a fixed bound; a flag condition fires on any nonzero reading.
struct Condition {
    enum class Kind { Threshold, BooleanFlag };

    Kind kind = Kind::BooleanFlag;
    CompareOp op = CompareOp::GT;
    double threshold = 0.0;
    std::string unit;

    static Condition threshold_of(CompareOp op, double bound, std::string unit = {});
    static Condition flag();

    bool operator==(const Condition&) const = default;
};

/// Pure and total over finite values. EQ compares exactly.
bool evaluate(const Condition& condition, double value) noexcept;

struct NotificationPolicy {
    bool push = true;
    bool sms = false;
    bool call = false;

    bool any() const noexcept { return push || sms || call; }
    bool operator==(const NotificationPolicy&) const = default;
};

struct Channel {
    ChannelId id;
    std::string name;
    Condition condition;
    NotificationPolicy policy;
    // Re-fire while the condition holds continuously for longer than this.
    std::optional<std::chrono::milliseconds> retrigger_interval;

    bool operator==(const Channel&) const = default;
};

struct Reading {
    ChannelId channel;
    double value = 0.0;
    SteadyClock::time_point received_at{};
};

/// Leading '+' followed by 8 to 15 digits.
bool is_valid_phone(std::string_view phone) noexcept;

/// A notification target. The phone number is the identity key.
struct SubscriberAddress {
    std::string phone;
    std::string push_token;

    bool operator==(const SubscriberAddress&) const = default;
};

enum class Role { Admin, Subscriber };

std::string_view to_string(Role role);

enum class Action {
    SessionInitiation,
    ChangePassword,
    GetSubscriberList,
    DelSubscriber,
    AddSubscriber,
    Subscribe,
    Unsubscribe,
    Update,
};

inline constexpr std::array<Action, 8> kAllActions = {
    Action::SessionInitiation, Action::ChangePassword, Action::GetSubscriberList,
    Action::DelSubscriber,     Action::AddSubscriber,  Action::Subscribe,
    Action::Unsubscribe,       Action::Update,
};

/// Wire name of the action (the value of the "action" tag).
std::string_view to_string(Action action);
std::optional<Action> action_from_string(std::string_view text);

/// A false-to-true transition of a channel's condition.
struct EventFiring {
    ChannelId channel;
    std::string event_name;
    double value = 0.0;
    SystemClock::time_point fired_at{};
    SteadyClock::time_point detected_at{};
};

}  // namespace evgw
