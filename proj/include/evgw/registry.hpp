#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evgw/expected.hpp"
#include "evgw/model.hpp"

namespace evgw {

struct Account {
    Role role = Role::Subscriber;
    std::string name;
    std::string password_digest;

    bool operator==(const Account&) const = default;
};

enum class RegistryError {
    UnknownEvent,
    NotSubscribed,
    UnknownAccount,
    AuthFailed,
    UnknownChannel,
    CorruptSnapshot,
};

/// Stable machine code used as the response `desc`.
std::string_view to_code(RegistryError error);

/// The durable part of the gateway: everything except latest readings.
struct GatewayState {
    std::map<ChannelId, Channel> channels;
    // channel -> phone -> push token; the inner key keeps phones unique
    std::map<ChannelId, std::map<std::string, std::string>> subscriptions;
    std::map<std::string, Account> accounts;

    bool operator==(const GatewayState&) const = default;
};

struct LatestValue {
    double value = 0.0;
    SteadyClock::time_point received_at{};
};

struct ChannelStatus {
    Channel channel;
    std::optional<double> value;
    bool satisfied = false;
};

/// Owner of all gateway state: channels, latest values, subscriptions and
/// accounts. Every operation is serialized on one mutex, so each call is
/// linearizable. When a snapshot path is set, every successful mutation is
/// written through before the call returns.
class Registry {
public:
    /// Throws std::invalid_argument on duplicate channel ids or names, or
    /// unless exactly one Admin account is given.
    Registry(std::vector<Channel> channels, std::vector<Account> accounts,
             int kdf_iterations = 10000);

    Registry(const Registry&) = delete;
    Registry& operator=(const Registry&) = delete;

    Expected<Ok, RegistryError> subscribe(std::string_view event, SubscriberAddress address);
    Expected<Ok, RegistryError> unsubscribe(std::string_view event, std::string_view phone);
    Expected<Ok, RegistryError> admin_add_subscriber(std::string_view event, SubscriberAddress address);
    Expected<Ok, RegistryError> admin_del_subscriber(std::string_view event, std::string_view phone);

    /// Sorted by phone.
    Expected<std::vector<SubscriberAddress>, RegistryError> list_subscribers(std::string_view event) const;
    std::vector<SubscriberAddress> subscribers_of(ChannelId channel) const;

    Expected<Ok, RegistryError> change_password(std::string_view account, std::string_view new_password);

    /// Unknown accounts and wrong passwords yield the same AuthFailed.
    Expected<Role, RegistryError> verify_credentials(std::string_view account,
                                                     std::string_view password) const;

    /// Stores the reading and returns the value it replaced.
    Expected<std::optional<double>, RegistryError> record_reading(const Reading& reading);

    std::optional<Channel> channel(ChannelId id) const;
    std::optional<Channel> channel_by_name(std::string_view name) const;
    std::vector<Channel> channels() const;
    std::optional<LatestValue> latest(ChannelId id) const;
    std::vector<ChannelStatus> status() const;

    GatewayState state() const;
    std::size_t subscription_count() const;

    /// Number of successful state mutations since construction.
    std::uint64_t mutation_count() const;

    std::string snapshot() const;
    Expected<Ok, RegistryError> restore(std::string_view bytes);

    /// Takes accounts and subscriptions from a snapshot while keeping the
    /// configured channel set. Subscriptions are matched by event name;
    /// names that no longer exist are dropped and returned.
    Expected<std::vector<std::string>, RegistryError> adopt_persisted(std::string_view bytes);

    void set_snapshot_path(std::filesystem::path path, bool fsync = true);
    /// Writes the snapshot file now; false on I/O failure.
    bool persist() const;

private:
    const Channel* find_by_name_locked(std::string_view name) const;
    Expected<Ok, RegistryError> add_locked(std::string_view event, SubscriberAddress address);
    Expected<Ok, RegistryError> remove_locked(std::string_view event, std::string_view phone);
    void mutated_locked();
    bool persist_locked() const;

    mutable std::mutex mutex_;
    GatewayState state_;
    std::map<std::string, ChannelId, std::less<>> by_name_;
    std::map<ChannelId, LatestValue> latest_;
    int kdf_iterations_;
    std::uint64_t mutations_ = 0;
    std::optional<std::filesystem::path> snapshot_path_;
    bool fsync_ = true;
};

/// Parses a snapshot document into a state value, validating its invariants.
Expected<GatewayState, RegistryError> parse_snapshot(std::string_view bytes);
std::string serialize_snapshot(const GatewayState& state);

}  // namespace evgw
