#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "evgw/expected.hpp"
#include "evgw/model.hpp"

namespace evgw {

using Json = nlohmann::json;

/// Longest accepted frame, excluding the terminating newline.
inline constexpr std::size_t kMaxFrameBytes = 64 * 1024;

namespace cmd {

struct SessionInitiation {
    std::string account;
    std::string password;
    bool operator==(const SessionInitiation&) const = default;
};

struct ChangePassword {
    std::string account;
    std::string new_password;
    bool operator==(const ChangePassword&) const = default;
};

struct GetSubscriberList {
    std::string event;
    bool operator==(const GetSubscriberList&) const = default;
};

struct DelSubscriber {
    std::string phone;
    std::string event;
    bool operator==(const DelSubscriber&) const = default;
};

struct AddSubscriber {
    std::string phone;
    std::string fcm_id;
    std::string event;
    bool operator==(const AddSubscriber&) const = default;
};

struct Subscribe {
    std::string phone;
    std::string fcm_id;
    std::string event;
    bool operator==(const Subscribe&) const = default;
};

struct Unsubscribe {
    std::string phone;
    std::string event;
    bool operator==(const Unsubscribe&) const = default;
};

// Without an event name the reply covers every channel.
struct Update {
    std::optional<std::string> event;
    bool operator==(const Update&) const = default;
};

}  // namespace cmd

// Alternative order follows the Action enum, so index() maps onto it.
using Command = std::variant<cmd::SessionInitiation, cmd::ChangePassword, cmd::GetSubscriberList,
                             cmd::DelSubscriber, cmd::AddSubscriber, cmd::Subscribe,
                             cmd::Unsubscribe, cmd::Update>;

inline Action action_of(const Command& command) {
    return static_cast<Action>(command.index());
}

enum class DecodeError {
    MalformedJson,   // not a JSON object, a type violation, or a framing violation
    UnknownAction,
    MissingField,
    InvalidField,    // present with the right type but an invalid value (e.g. phone format)
    NonFiniteValue,
};

std::string_view to_string(DecodeError error);

struct DecodeFailure {
    DecodeError code;
    std::string detail;
};

std::string encode_command(const Command& command);
Expected<Command, DecodeFailure> decode_command(std::string_view bytes);

std::string encode_reading(ChannelId channel, double value);
Expected<Reading, DecodeFailure> decode_reading(std::string_view bytes,
                                                SteadyClock::time_point now = SteadyClock::now());

enum class ResultTag { Ok, Error };

/// Gateway reply. `desc` is a stable machine code; action-specific payload
/// (subscriber list, channel status, human text) lives in `extras` and is
/// flattened into the same JSON object on the wire.
struct Response {
    ResultTag result = ResultTag::Ok;
    std::string desc = "ok";
    Json extras = Json::object();

    static Response ok(std::string desc = "ok", Json extras = Json::object());
    static Response error(std::string desc, std::string message = {});

    bool is_ok() const noexcept { return result == ResultTag::Ok; }
    bool operator==(const Response&) const = default;
};

std::string encode_response(const Response& response);
Expected<Response, DecodeFailure> decode_response(std::string_view bytes);

}  // namespace evgw
