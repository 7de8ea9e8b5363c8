#include "evgw/registry.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <set>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "evgw/config.hpp"
#include "evgw/password.hpp"

namespace evgw {

namespace {

constexpr std::string_view kSnapshotFormat = "evgw-snapshot/1";

using Failure = Unexpected<RegistryError>;

// Burned on unknown accounts so both AuthFailed paths cost one derivation.
const std::string& dummy_digest() {
    static const std::string digest = make_password_digest("", 1000);
    return digest;
}

bool write_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

bool write_atomically(const std::filesystem::path& path, std::string_view data, bool fsync) {
    auto temp = path;
    temp += ".tmp";
    const int fd = ::open(temp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (fd < 0) return false;
    bool ok = write_all(fd, data);
    if (ok && fsync) ok = ::fdatasync(fd) == 0;
    ok = (::close(fd) == 0) && ok;
    if (!ok) {
        ::unlink(temp.c_str());
        return false;
    }
    return ::rename(temp.c_str(), path.c_str()) == 0;
}

}  // namespace

std::string_view to_code(RegistryError error) {
    switch (error) {
        case RegistryError::UnknownEvent: return "unknown_event";
        case RegistryError::NotSubscribed: return "not_subscribed";
        case RegistryError::UnknownAccount: return "unknown_account";
        case RegistryError::AuthFailed: return "auth_failed";
        case RegistryError::UnknownChannel: return "unknown_channel";
        case RegistryError::CorruptSnapshot: return "corrupt_snapshot";
    }
    return "error";
}

Registry::Registry(std::vector<Channel> channels, std::vector<Account> accounts, int kdf_iterations)
    : kdf_iterations_(kdf_iterations) {
    for (auto& channel : channels) {
        if (channel.name.empty()) throw std::invalid_argument("channel name must not be empty");
        if (!by_name_.emplace(channel.name, channel.id).second) {
            throw std::invalid_argument("duplicate channel name '" + channel.name + "'");
        }
        const auto id = channel.id;
        if (!state_.channels.emplace(id, std::move(channel)).second) {
            throw std::invalid_argument("duplicate channel id " + std::to_string(id.value));
        }
        state_.subscriptions[id];
    }
    int admins = 0;
    for (auto& account : accounts) {
        if (account.role == Role::Admin) ++admins;
        const auto name = account.name;
        if (!state_.accounts.emplace(name, std::move(account)).second) {
            throw std::invalid_argument("duplicate account '" + name + "'");
        }
    }
    if (admins != 1) throw std::invalid_argument("exactly one admin account is required");
}

const Channel* Registry::find_by_name_locked(std::string_view name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return nullptr;
    return &state_.channels.at(it->second);
}

Expected<Ok, RegistryError> Registry::add_locked(std::string_view event, SubscriberAddress address) {
    const Channel* channel = find_by_name_locked(event);
    if (!channel) return Failure{RegistryError::UnknownEvent};
    state_.subscriptions[channel->id][address.phone] = std::move(address.push_token);
    mutated_locked();
    return Ok{};
}

Expected<Ok, RegistryError> Registry::remove_locked(std::string_view event, std::string_view phone) {
    const Channel* channel = find_by_name_locked(event);
    if (!channel) return Failure{RegistryError::UnknownEvent};
    auto& set = state_.subscriptions[channel->id];
    auto it = set.find(std::string(phone));
    if (it == set.end()) return Failure{RegistryError::NotSubscribed};
    set.erase(it);
    mutated_locked();
    return Ok{};
}

void Registry::mutated_locked() {
    ++mutations_;
    if (snapshot_path_ && !persist_locked()) {
        spdlog::error("failed to write snapshot {}", snapshot_path_->string());
    }
}

Expected<Ok, RegistryError> Registry::subscribe(std::string_view event, SubscriberAddress address) {
    std::lock_guard lock(mutex_);
    return add_locked(event, std::move(address));
}

Expected<Ok, RegistryError> Registry::unsubscribe(std::string_view event, std::string_view phone) {
    std::lock_guard lock(mutex_);
    return remove_locked(event, phone);
}

Expected<Ok, RegistryError> Registry::admin_add_subscriber(std::string_view event,
                                                           SubscriberAddress address) {
    std::lock_guard lock(mutex_);
    return add_locked(event, std::move(address));
}

Expected<Ok, RegistryError> Registry::admin_del_subscriber(std::string_view event,
                                                           std::string_view phone) {
    std::lock_guard lock(mutex_);
    return remove_locked(event, phone);
}

Expected<std::vector<SubscriberAddress>, RegistryError> Registry::list_subscribers(
    std::string_view event) const {
    std::lock_guard lock(mutex_);
    const Channel* channel = find_by_name_locked(event);
    if (!channel) return Failure{RegistryError::UnknownEvent};
    std::vector<SubscriberAddress> out;
    // std::map keeps phones ordered already.
    for (const auto& [phone, token] : state_.subscriptions.at(channel->id)) {
        out.push_back(SubscriberAddress{phone, token});
    }
    return out;
}

std::vector<SubscriberAddress> Registry::subscribers_of(ChannelId channel) const {
    std::lock_guard lock(mutex_);
    std::vector<SubscriberAddress> out;
    auto it = state_.subscriptions.find(channel);
    if (it == state_.subscriptions.end()) return out;
    for (const auto& [phone, token] : it->second) out.push_back(SubscriberAddress{phone, token});
    return out;
}

Expected<Ok, RegistryError> Registry::change_password(std::string_view account,
                                                      std::string_view new_password) {
    // Derive outside the lock; PBKDF2 is deliberately slow.
    auto digest = make_password_digest(new_password, kdf_iterations_);
    std::lock_guard lock(mutex_);
    auto it = state_.accounts.find(std::string(account));
    if (it == state_.accounts.end()) return Failure{RegistryError::UnknownAccount};
    it->second.password_digest = std::move(digest);
    mutated_locked();
    return Ok{};
}

Expected<Role, RegistryError> Registry::verify_credentials(std::string_view account,
                                                           std::string_view password) const {
    std::optional<Account> found;
    {
        std::lock_guard lock(mutex_);
        auto it = state_.accounts.find(std::string(account));
        if (it != state_.accounts.end()) found = it->second;
    }
    if (!found) {
        verify_password(dummy_digest(), password);
        return Failure{RegistryError::AuthFailed};
    }
    if (!verify_password(found->password_digest, password)) return Failure{RegistryError::AuthFailed};
    return found->role;
}

Expected<std::optional<double>, RegistryError> Registry::record_reading(const Reading& reading) {
    std::lock_guard lock(mutex_);
    if (!state_.channels.contains(reading.channel)) return Failure{RegistryError::UnknownChannel};
    std::optional<double> previous;
    auto [it, inserted] = latest_.try_emplace(reading.channel);
    if (!inserted) previous = it->second.value;
    it->second = LatestValue{reading.value, reading.received_at};
    return previous;
}

std::optional<Channel> Registry::channel(ChannelId id) const {
    std::lock_guard lock(mutex_);
    auto it = state_.channels.find(id);
    if (it == state_.channels.end()) return std::nullopt;
    return it->second;
}

std::optional<Channel> Registry::channel_by_name(std::string_view name) const {
    std::lock_guard lock(mutex_);
    const Channel* channel = find_by_name_locked(name);
    if (!channel) return std::nullopt;
    return *channel;
}

std::vector<Channel> Registry::channels() const {
    std::lock_guard lock(mutex_);
    std::vector<Channel> out;
    for (const auto& [id, channel] : state_.channels) out.push_back(channel);
    return out;
}

std::optional<LatestValue> Registry::latest(ChannelId id) const {
    std::lock_guard lock(mutex_);
    auto it = latest_.find(id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
}

std::vector<ChannelStatus> Registry::status() const {
    std::lock_guard lock(mutex_);
    std::vector<ChannelStatus> out;
    for (const auto& [id, channel] : state_.channels) {
        ChannelStatus entry{channel, std::nullopt, false};
        if (auto it = latest_.find(id); it != latest_.end()) {
            entry.value = it->second.value;
            entry.satisfied = evaluate(channel.condition, it->second.value);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

GatewayState Registry::state() const {
    std::lock_guard lock(mutex_);
    return state_;
}

std::size_t Registry::subscription_count() const {
    std::lock_guard lock(mutex_);
    std::size_t total = 0;
    for (const auto& [id, set] : state_.subscriptions) total += set.size();
    return total;
}

std::uint64_t Registry::mutation_count() const {
    std::lock_guard lock(mutex_);
    return mutations_;
}

std::string Registry::snapshot() const {
    std::lock_guard lock(mutex_);
    return serialize_snapshot(state_);
}

Expected<Ok, RegistryError> Registry::restore(std::string_view bytes) {
    auto parsed = parse_snapshot(bytes);
    if (!parsed) return Failure{parsed.error()};
    std::lock_guard lock(mutex_);
    state_ = std::move(*parsed);
    by_name_.clear();
    for (const auto& [id, channel] : state_.channels) {
        by_name_.emplace(channel.name, id);
        state_.subscriptions[id];
    }
    latest_.clear();
    mutated_locked();
    return Ok{};
}

Expected<std::vector<std::string>, RegistryError> Registry::adopt_persisted(std::string_view bytes) {
    auto parsed = parse_snapshot(bytes);
    if (!parsed) return Failure{parsed.error()};

    std::lock_guard lock(mutex_);
    std::vector<std::string> dropped;
    for (auto& [id, set] : state_.subscriptions) set.clear();
    for (auto& [old_id, set] : parsed->subscriptions) {
        const auto& name = parsed->channels.at(old_id).name;
        auto it = by_name_.find(name);
        if (it == by_name_.end()) {
            if (!set.empty()) dropped.push_back(name);
            continue;
        }
        state_.subscriptions[it->second] = std::move(set);
    }
    state_.accounts = std::move(parsed->accounts);
    mutated_locked();
    return dropped;
}

void Registry::set_snapshot_path(std::filesystem::path path, bool fsync) {
    std::lock_guard lock(mutex_);
    snapshot_path_ = std::move(path);
    fsync_ = fsync;
}

bool Registry::persist() const {
    std::lock_guard lock(mutex_);
    return persist_locked();
}

bool Registry::persist_locked() const {
    if (!snapshot_path_) return false;
    return write_atomically(*snapshot_path_, serialize_snapshot(state_), fsync_);
}

std::string serialize_snapshot(const GatewayState& state) {
    Json doc = Json::object();
    doc["format"] = std::string(kSnapshotFormat);
    doc["channels"] = Json::array();
    for (const auto& [id, channel] : state.channels) doc["channels"].push_back(channel_to_json(channel));
    doc["subscriptions"] = Json::object();
    for (const auto& [id, set] : state.subscriptions) {
        Json list = Json::array();
        for (const auto& [phone, token] : set) list.push_back({{"phone", phone}, {"fcm_id", token}});
        doc["subscriptions"][state.channels.at(id).name] = std::move(list);
    }
    doc["accounts"] = Json::array();
    for (const auto& [name, account] : state.accounts) doc["accounts"].push_back(account_to_json(account));
    return doc.dump();
}

Expected<GatewayState, RegistryError> parse_snapshot(std::string_view bytes) {
    const Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return Failure{RegistryError::CorruptSnapshot};
    try {
        if (doc.value("format", std::string{}) != kSnapshotFormat) {
            return Failure{RegistryError::CorruptSnapshot};
        }
        GatewayState state;
        std::map<std::string, ChannelId> by_name;
        for (const auto& entry : doc.at("channels")) {
            Channel channel = channel_from_json(entry, "channels");
            if (!by_name.emplace(channel.name, channel.id).second) return Failure{RegistryError::CorruptSnapshot};
            const auto id = channel.id;
            if (!state.channels.emplace(id, std::move(channel)).second) {
                return Failure{RegistryError::CorruptSnapshot};
            }
            state.subscriptions[id];
        }
        for (const auto& [name, list] : doc.at("subscriptions").items()) {
            auto it = by_name.find(name);
            if (it == by_name.end() || !list.is_array()) return Failure{RegistryError::CorruptSnapshot};
            auto& set = state.subscriptions[it->second];
            for (const auto& entry : list) {
                auto phone = entry.at("phone").get<std::string>();
                auto token = entry.at("fcm_id").get<std::string>();
                if (!is_valid_phone(phone) || token.empty()) return Failure{RegistryError::CorruptSnapshot};
                if (!set.emplace(std::move(phone), std::move(token)).second) {
                    return Failure{RegistryError::CorruptSnapshot};
                }
            }
        }
        int admins = 0;
        for (const auto& entry : doc.at("accounts")) {
            Account account = account_from_json(entry, "accounts");
            if (account.role == Role::Admin) ++admins;
            const auto name = account.name;
            if (!state.accounts.emplace(name, std::move(account)).second) {
                return Failure{RegistryError::CorruptSnapshot};
            }
        }
        if (admins != 1) return Failure{RegistryError::CorruptSnapshot};
        return state;
    } catch (const std::exception&) {
        return Failure{RegistryError::CorruptSnapshot};
    }
}

}  // namespace evgw
