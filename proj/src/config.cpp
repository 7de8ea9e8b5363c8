#include "evgw/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "evgw/password.hpp"

namespace evgw {

namespace {

[[noreturn]] void raise(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

std::string join(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

const Json* member(const Json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return nullptr;
    return &*it;
}

void require_object(const Json& doc, const std::string& where) {
    if (!doc.is_object()) raise(where.empty() ? "<root>" : where, "expected an object");
}

std::string get_string(const Json& doc, const char* key, const std::string& where,
                       std::optional<std::string> fallback = std::nullopt) {
    const Json* value = member(doc, key);
    if (!value) {
        if (fallback) return *fallback;
        raise(join(where, key), "required field missing");
    }
    if (!value->is_string()) raise(join(where, key), "expected a string");
    return value->get<std::string>();
}

bool get_bool(const Json& doc, const char* key, const std::string& where, bool fallback) {
    const Json* value = member(doc, key);
    if (!value) return fallback;
    if (!value->is_boolean()) raise(join(where, key), "expected true or false");
    return value->get<bool>();
}

double get_number(const Json& doc, const char* key, const std::string& where,
                  std::optional<double> fallback = std::nullopt) {
    const Json* value = member(doc, key);
    if (!value) {
        if (fallback) return *fallback;
        raise(join(where, key), "required field missing");
    }
    if (!value->is_number()) raise(join(where, key), "expected a number");
    const double number = value->get<double>();
    if (!std::isfinite(number)) raise(join(where, key), "must be finite");
    return number;
}

std::uint64_t get_unsigned(const Json& doc, const char* key, const std::string& where,
                           std::optional<std::uint64_t> fallback = std::nullopt,
                           std::uint64_t max = std::numeric_limits<std::uint32_t>::max()) {
    const Json* value = member(doc, key);
    if (!value) {
        if (fallback) return *fallback;
        raise(join(where, key), "required field missing");
    }
    if (!value->is_number_unsigned()) raise(join(where, key), "expected a non-negative integer");
    const auto number = value->get<std::uint64_t>();
    if (number > max) raise(join(where, key), "out of range");
    return number;
}

std::chrono::milliseconds get_ms(const Json& doc, const char* key, const std::string& where,
                                 std::chrono::milliseconds fallback) {
    return std::chrono::milliseconds(get_unsigned(doc, key, where, fallback.count(),
                                                  std::numeric_limits<std::int64_t>::max()));
}

const Json& section(const Json& doc, const char* key, const std::string& where) {
    static const Json empty = Json::object();
    const Json* value = member(doc, key);
    if (!value) return empty;
    require_object(*value, join(where, key));
    return *value;
}

ListenerConfig read_listener(const Json& doc, const std::string& where, ListenerConfig fallback) {
    ListenerConfig out;
    out.enabled = get_bool(doc, "enabled", where, fallback.enabled);
    out.bind = get_string(doc, "bind", where, fallback.bind);
    out.port = static_cast<std::uint16_t>(get_unsigned(doc, "port", where, fallback.port, 65535));
    return out;
}

Json listener_to_json(const ListenerConfig& listener) {
    return Json{{"enabled", listener.enabled}, {"bind", listener.bind}, {"port", listener.port}};
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

}  // namespace

Json channel_to_json(const Channel& channel) {
    Json condition = Json::object();
    if (channel.condition.kind == Condition::Kind::BooleanFlag) {
        condition["kind"] = "flag";
    } else {
        condition["kind"] = "threshold";
        condition["op"] = std::string(to_string(channel.condition.op));
        condition["threshold"] = channel.condition.threshold;
        if (!channel.condition.unit.empty()) condition["unit"] = channel.condition.unit;
    }
    Json out{{"id", channel.id.value},
             {"name", channel.name},
             {"condition", condition},
             {"policy",
              {{"push", channel.policy.push}, {"sms", channel.policy.sms}, {"call", channel.policy.call}}}};
    if (channel.retrigger_interval) out["retrigger_interval_ms"] = channel.retrigger_interval->count();
    return out;
}

Channel channel_from_json(const Json& doc, const std::string& where) {
    require_object(doc, where);
    Channel channel;
    channel.id = ChannelId{static_cast<std::uint32_t>(get_unsigned(doc, "id", where))};
    channel.name = get_string(doc, "name", where);
    if (channel.name.empty()) raise(join(where, "name"), "must not be empty");

    const std::string cond_where = join(where, "condition");
    const Json* condition = member(doc, "condition");
    if (!condition) raise(cond_where, "required field missing");
    require_object(*condition, cond_where);
    const auto kind = get_string(*condition, "kind", cond_where);
    if (kind == "flag") {
        channel.condition = Condition::flag();
    } else if (kind == "threshold") {
        const auto op_text = get_string(*condition, "op", cond_where);
        const auto op = compare_op_from_string(op_text);
        if (!op) raise(join(cond_where, "op"), "unknown operator '" + op_text + "'");
        channel.condition = Condition::threshold_of(*op, get_number(*condition, "threshold", cond_where),
                                                    get_string(*condition, "unit", cond_where, ""));
    } else {
        raise(join(cond_where, "kind"), "expected \"threshold\" or \"flag\"");
    }

    const std::string policy_where = join(where, "policy");
    const Json& policy = section(doc, "policy", where);
    channel.policy.push = get_bool(policy, "push", policy_where, true);
    channel.policy.sms = get_bool(policy, "sms", policy_where, false);
    channel.policy.call = get_bool(policy, "call", policy_where, false);
    if (!channel.policy.any()) raise(policy_where, "at least one transport must be enabled");

    if (member(doc, "retrigger_interval_ms")) {
        const auto ms = get_unsigned(doc, "retrigger_interval_ms", where, std::nullopt,
                                     std::numeric_limits<std::int64_t>::max());
        if (ms == 0) raise(join(where, "retrigger_interval_ms"), "must be positive");
        channel.retrigger_interval = std::chrono::milliseconds(ms);
    }
    return channel;
}

Json account_to_json(const Account& account) {
    return Json{{"name", account.name},
                {"role", std::string(to_string(account.role))},
                {"password_digest", account.password_digest}};
}

Account account_from_json(const Json& doc, const std::string& where) {
    require_object(doc, where);
    Account account;
    account.name = get_string(doc, "name", where);
    if (account.name.empty()) raise(join(where, "name"), "must not be empty");
    const auto role = get_string(doc, "role", where);
    if (role == "admin") {
        account.role = Role::Admin;
    } else if (role == "subscriber") {
        account.role = Role::Subscriber;
    } else {
        raise(join(where, "role"), "expected \"admin\" or \"subscriber\"");
    }
    account.password_digest = get_string(doc, "password_digest", where);
    if (!is_well_formed_digest(account.password_digest)) {
        raise(join(where, "password_digest"), "not a pbkdf2-sha256 digest");
    }
    return account;
}

GatewayConfig parse_config(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte);
        throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": invalid JSON");
    }
    require_object(doc, "");

    GatewayConfig config;
    config.kdf_iterations = static_cast<int>(
        get_unsigned(doc, "kdf_iterations", "", config.kdf_iterations, 10'000'000));
    if (config.kdf_iterations < 1) raise("kdf_iterations", "must be positive");
    config.io_threads = get_unsigned(doc, "io_threads", "", 0, 1024);

    const Json& snapshot = section(doc, "snapshot", "");
    config.snapshot_path = get_string(snapshot, "path", "snapshot", "");
    config.snapshot_fsync = get_bool(snapshot, "fsync", "snapshot", true);

    const Json& sensor = section(doc, "sensor", "");
    config.sensor.listener = read_listener(sensor, "sensor", config.sensor.listener);
    config.sensor.read_timeout = get_ms(sensor, "read_timeout_ms", "sensor", config.sensor.read_timeout);

    const Json& client = section(doc, "client", "");
    config.client.tcp = read_listener(client, "client", config.client.tcp);
    config.client.local_path = get_string(client, "local_path", "client", "");
    config.client.init_timeout = get_ms(client, "init_timeout_ms", "client", config.client.init_timeout);
    config.client.idle_timeout = get_ms(client, "idle_timeout_ms", "client", config.client.idle_timeout);
    const Json& tls = section(client, "tls", "client");
    config.client.tls.enabled = get_bool(tls, "enabled", "client.tls", false);
    config.client.tls.bind = get_string(tls, "bind", "client.tls", config.client.tls.bind);
    config.client.tls.port =
        static_cast<std::uint16_t>(get_unsigned(tls, "port", "client.tls", config.client.tls.port, 65535));
    if (config.client.tls.enabled) {
        config.client.tls.cert_file = get_string(tls, "cert_file", "client.tls");
        config.client.tls.key_file = get_string(tls, "key_file", "client.tls");
    }
    config.client.websocket =
        read_listener(section(client, "websocket", "client"), "client.websocket", config.client.websocket);

    const Json& notify = section(doc, "notify", "");
    auto& n = config.notify;
    n.enabled = get_bool(notify, "enabled", "notify", true);
    n.retries = static_cast<int>(get_unsigned(notify, "retries", "notify", 0, 100));
    n.retry_backoff = get_ms(notify, "retry_backoff_ms", "notify", n.retry_backoff);
    const auto call_mode = get_string(notify, "call_mode", "notify", "escalate");
    if (call_mode == "escalate") {
        n.call_mode = CallMode::Escalate;
    } else if (call_mode == "always") {
        n.call_mode = CallMode::Always;
    } else {
        raise("notify.call_mode", "expected \"escalate\" or \"always\"");
    }
    n.queue_capacity = get_unsigned(notify, "queue_capacity", "notify", n.queue_capacity);
    if (n.queue_capacity == 0) raise("notify.queue_capacity", "must be positive");
    n.workers = get_unsigned(notify, "workers", "notify", n.workers, 256);
    if (n.workers == 0) raise("notify.workers", "must be positive");
    n.log_capacity = get_unsigned(notify, "log_capacity", "notify", n.log_capacity);

    const Json& push = section(notify, "push", "notify");
    n.push.url = get_string(push, "url", "notify.push", "");
    n.push.auth_header = get_string(push, "auth_header", "notify.push", "");
    n.push.timeout = get_ms(push, "timeout_ms", "notify.push", n.push.timeout);
    n.push.max_in_flight = get_unsigned(push, "max_in_flight", "notify.push", n.push.max_in_flight, 4096);
    if (n.push.max_in_flight == 0) raise("notify.push.max_in_flight", "must be positive");
    if (!n.push.url.empty() && n.push.url.rfind("http://", 0) != 0 && n.push.url.rfind("https://", 0) != 0) {
        raise("notify.push.url", "expected an http:// or https:// URL");
    }

    const Json& modem = section(notify, "modem", "notify");
    n.modem.endpoint = get_string(modem, "endpoint", "notify.modem", "");
    n.modem.step_timeout = get_ms(modem, "step_timeout_ms", "notify.modem", n.modem.step_timeout);
    n.modem.ring_duration = get_ms(modem, "ring_ms", "notify.modem", n.modem.ring_duration);
    n.modem.baud = static_cast<int>(get_unsigned(modem, "baud", "notify.modem", 115200));

    const Json* accounts = member(doc, "accounts");
    if (!accounts) raise("accounts", "required field missing");
    if (!accounts->is_array()) raise("accounts", "expected an array");
    std::set<std::string> account_names;
    int admins = 0;
    for (std::size_t i = 0; i < accounts->size(); ++i) {
        const std::string where = "accounts[" + std::to_string(i) + "]";
        Account account = account_from_json((*accounts)[i], where);
        if (!account_names.insert(account.name).second) {
            raise(where + ".name", "duplicate account name '" + account.name + "'");
        }
        if (account.role == Role::Admin) ++admins;
        config.accounts.push_back(std::move(account));
    }
    if (admins != 1) raise("accounts", "exactly one admin account is required");

    const Json* channels = member(doc, "channels");
    if (!channels) raise("channels", "required field missing");
    if (!channels->is_array()) raise("channels", "expected an array");
    std::set<std::string> names;
    std::set<ChannelId> ids;
    for (std::size_t i = 0; i < channels->size(); ++i) {
        const std::string where = "channels[" + std::to_string(i) + "]";
        Channel channel = channel_from_json((*channels)[i], where);
        if (!names.insert(channel.name).second) {
            raise(where + ".name", "duplicate channel name '" + channel.name + "'");
        }
        if (!ids.insert(channel.id).second) {
            raise(where + ".id", "duplicate channel id " + std::to_string(channel.id.value));
        }
        config.channels.push_back(std::move(channel));
    }
    return config;
}

GatewayConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_config(buffer.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Json to_json(const GatewayConfig& config) {
    Json doc = Json::object();
    doc["kdf_iterations"] = config.kdf_iterations;
    doc["io_threads"] = config.io_threads;
    doc["snapshot"] = {{"path", config.snapshot_path}, {"fsync", config.snapshot_fsync}};

    Json sensor = listener_to_json(config.sensor.listener);
    sensor["read_timeout_ms"] = config.sensor.read_timeout.count();
    doc["sensor"] = sensor;

    const auto& c = config.client;
    Json client = listener_to_json(c.tcp);
    client["local_path"] = c.local_path;
    client["init_timeout_ms"] = c.init_timeout.count();
    client["idle_timeout_ms"] = c.idle_timeout.count();
    client["tls"] = {{"enabled", c.tls.enabled}, {"bind", c.tls.bind},       {"port", c.tls.port},
                     {"cert_file", c.tls.cert_file}, {"key_file", c.tls.key_file}};
    client["websocket"] = listener_to_json(c.websocket);
    doc["client"] = client;

    const auto& n = config.notify;
    doc["notify"] = {
        {"enabled", n.enabled},
        {"retries", n.retries},
        {"retry_backoff_ms", n.retry_backoff.count()},
        {"call_mode", n.call_mode == CallMode::Always ? "always" : "escalate"},
        {"queue_capacity", n.queue_capacity},
        {"workers", n.workers},
        {"log_capacity", n.log_capacity},
        {"push",
         {{"url", n.push.url},
          {"auth_header", n.push.auth_header},
          {"timeout_ms", n.push.timeout.count()},
          {"max_in_flight", n.push.max_in_flight}}},
        {"modem",
         {{"endpoint", n.modem.endpoint},
          {"step_timeout_ms", n.modem.step_timeout.count()},
          {"ring_ms", n.modem.ring_duration.count()},
          {"baud", n.modem.baud}}},
    };

    doc["accounts"] = Json::array();
    for (const auto& account : config.accounts) doc["accounts"].push_back(account_to_json(account));
    doc["channels"] = Json::array();
    for (const auto& channel : config.channels) doc["channels"].push_back(channel_to_json(channel));
    return doc;
}

}  // namespace evgw
