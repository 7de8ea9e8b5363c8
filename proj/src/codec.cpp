#include "evgw/codec.hpp"

#include <cmath>
#include <limits>
#include <regex>

namespace evgw {

namespace {

using Failure = Unexpected<DecodeFailure>;

Failure fail(DecodeError code, std::string detail) {
    return Failure{DecodeFailure{code, std::move(detail)}};
}

// Parses one frame into a JSON object, rejecting anything else.
Expected<Json, DecodeFailure> parse_object(std::string_view bytes) {
    if (bytes.size() > kMaxFrameBytes) return fail(DecodeError::MalformedJson, "frame too long");
    Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (doc.is_discarded()) return fail(DecodeError::MalformedJson, "invalid json");
    if (!doc.is_object()) return fail(DecodeError::MalformedJson, "not a json object");
    return doc;
}

class FieldReader {
public:
    explicit FieldReader(const Json& doc) : doc_(doc) {}

    // Fetches a required string field; the first failure sticks.
    std::string text(const char* key) {
        if (failure_) return {};
        auto it = doc_.find(key);
        if (it == doc_.end() || it->is_null()) {
            failure_ = DecodeFailure{DecodeError::MissingField, key};
            return {};
        }
        if (!it->is_string()) {
            failure_ = DecodeFailure{DecodeError::MalformedJson, std::string(key) + " must be a string"};
            return {};
        }
        return it->get<std::string>();
    }

    std::optional<std::string> optional_text(const char* key) {
        if (failure_) return std::nullopt;
        auto it = doc_.find(key);
        if (it == doc_.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) {
            failure_ = DecodeFailure{DecodeError::MalformedJson, std::string(key) + " must be a string"};
            return std::nullopt;
        }
        return it->get<std::string>();
    }

    std::string nonempty(const char* key) {
        std::string value = text(key);
        if (!failure_ && value.empty()) {
            failure_ = DecodeFailure{DecodeError::InvalidField, std::string(key) + " is empty"};
        }
        return value;
    }

    std::string phone(const char* key) {
        std::string value = text(key);
        if (!failure_ && !is_valid_phone(value)) {
            failure_ = DecodeFailure{DecodeError::InvalidField, std::string(key) + " is not an E.164 number"};
        }
        return value;
    }

    const std::optional<DecodeFailure>& failure() const { return failure_; }

private:
    const Json& doc_;
    std::optional<DecodeFailure> failure_;
};

Command read_command(Action action, FieldReader& in) {
    switch (action) {
        case Action::SessionInitiation: {
            auto account = in.nonempty("account");
            auto password = in.text("password");
            return cmd::SessionInitiation{std::move(account), std::move(password)};
        }
        case Action::ChangePassword: {
            auto account = in.nonempty("account");
            auto password = in.nonempty("new_password");
            return cmd::ChangePassword{std::move(account), std::move(password)};
        }
        case Action::GetSubscriberList:
            return cmd::GetSubscriberList{in.nonempty("event")};
        case Action::DelSubscriber: {
            auto phone = in.phone("phone");
            auto event = in.nonempty("event");
            return cmd::DelSubscriber{std::move(phone), std::move(event)};
        }
        case Action::AddSubscriber: {
            auto phone = in.phone("phone");
            auto token = in.nonempty("fcm_id");
            auto event = in.nonempty("event");
            return cmd::AddSubscriber{std::move(phone), std::move(token), std::move(event)};
        }
        case Action::Subscribe: {
            auto phone = in.phone("phone");
            auto token = in.nonempty("fcm_id");
            auto event = in.nonempty("event");
            return cmd::Subscribe{std::move(phone), std::move(token), std::move(event)};
        }
        case Action::Unsubscribe: {
            auto phone = in.phone("phone");
            auto event = in.nonempty("event");
            return cmd::Unsubscribe{std::move(phone), std::move(event)};
        }
        case Action::Update:
            return cmd::Update{in.optional_text("event")};
    }
    return cmd::Update{};
}

struct CommandWriter {
    Json& out;

    void operator()(const cmd::SessionInitiation& c) {
        out["account"] = c.account;
        out["password"] = c.password;
    }
    void operator()(const cmd::ChangePassword& c) {
        out["account"] = c.account;
        out["new_password"] = c.new_password;
    }
    void operator()(const cmd::GetSubscriberList& c) { out["event"] = c.event; }
    void operator()(const cmd::DelSubscriber& c) {
        out["phone"] = c.phone;
        out["event"] = c.event;
    }
    void operator()(const cmd::AddSubscriber& c) {
        out["phone"] = c.phone;
        out["fcm_id"] = c.fcm_id;
        out["event"] = c.event;
    }
    void operator()(const cmd::Subscribe& c) {
        out["phone"] = c.phone;
        out["fcm_id"] = c.fcm_id;
        out["event"] = c.event;
    }
    void operator()(const cmd::Unsubscribe& c) {
        out["phone"] = c.phone;
        out["event"] = c.event;
    }
    void operator()(const cmd::Update& c) {
        if (c.event) out["event"] = *c.event;
    }
};

bool is_non_finite_token(const std::string& text) {
    return text == "NaN" || text == "nan" || text == "Infinity" || text == "-Infinity" ||
           text == "inf" || text == "-inf";
}

// Encoders such as Python's json emit bare NaN/Infinity, which is not JSON.
bool has_bare_non_finite_value(std::string_view bytes) {
    static const std::regex pattern(R"re("value"\s*:\s*[-+]?(NaN|nan|Infinity|inf)\b)re");
    return std::regex_search(bytes.begin(), bytes.end(), pattern);
}

}  // namespace

std::string_view to_string(DecodeError error) {
    switch (error) {
        case DecodeError::MalformedJson: return "malformed_json";
        case DecodeError::UnknownAction: return "unknown_action";
        case DecodeError::MissingField: return "missing_field";
        case DecodeError::InvalidField: return "invalid_field";
        case DecodeError::NonFiniteValue: return "non_finite_value";
    }
    return "malformed_json";
}

std::string encode_command(const Command& command) {
    Json out = Json::object();
    out["action"] = std::string(to_string(action_of(command)));
    std::visit(CommandWriter{out}, command);
    return out.dump();
}

Expected<Command, DecodeFailure> decode_command(std::string_view bytes) {
    auto doc = parse_object(bytes);
    if (!doc) return Failure{doc.error()};

    auto it = doc->find("action");
    if (it == doc->end()) return fail(DecodeError::MissingField, "action");
    if (!it->is_string()) return fail(DecodeError::MalformedJson, "action must be a string");
    auto action = action_from_string(it->get<std::string>());
    if (!action) return fail(DecodeError::UnknownAction, it->get<std::string>());

    FieldReader reader(*doc);
    Command command = read_command(*action, reader);
    if (reader.failure()) return Failure{*reader.failure()};
    return command;
}

std::string encode_reading(ChannelId channel, double value) {
    Json out = Json::object();
    out["channel"] = channel.value;
    out["value"] = value;
    return out.dump();
}

Expected<Reading, DecodeFailure> decode_reading(std::string_view bytes,
                                                SteadyClock::time_point now) {
    auto doc = parse_object(bytes);
    if (!doc) {
        if (bytes.size() <= kMaxFrameBytes && has_bare_non_finite_value(bytes)) {
            return fail(DecodeError::NonFiniteValue, "value");
        }
        return Failure{doc.error()};
    }

    auto channel = doc->find("channel");
    if (channel == doc->end()) return fail(DecodeError::MissingField, "channel");
    if (!channel->is_number_unsigned() ||
        channel->get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max()) {
        return fail(DecodeError::MalformedJson, "channel must be a non-negative integer");
    }

    auto value = doc->find("value");
    if (value == doc->end()) return fail(DecodeError::MissingField, "value");
    if (value->is_string() && is_non_finite_token(value->get<std::string>())) {
        return fail(DecodeError::NonFiniteValue, "value");
    }
    if (!value->is_number()) return fail(DecodeError::MalformedJson, "value must be a number");
    const double number = value->get<double>();
    if (!std::isfinite(number)) return fail(DecodeError::NonFiniteValue, "value");

    return Reading{ChannelId{static_cast<std::uint32_t>(channel->get<std::uint64_t>())}, number, now};
}

Response Response::ok(std::string desc, Json extras) {
    return Response{ResultTag::Ok, std::move(desc), std::move(extras)};
}

Response Response::error(std::string desc, std::string message) {
    Json extras = Json::object();
    if (!message.empty()) extras["message"] = std::move(message);
    return Response{ResultTag::Error, std::move(desc), std::move(extras)};
}

std::string encode_response(const Response& response) {
    Json out = Json::object();
    if (response.extras.is_object()) {
        for (const auto& [key, value] : response.extras.items()) out[key] = value;
    }
    out["result"] = response.is_ok() ? "ok" : "error";
    out["desc"] = response.desc;
    return out.dump();
}

Expected<Response, DecodeFailure> decode_response(std::string_view bytes) {
    auto doc = parse_object(bytes);
    if (!doc) return Failure{doc.error()};

    auto result = doc->find("result");
    auto desc = doc->find("desc");
    if (result == doc->end()) return fail(DecodeError::MissingField, "result");
    if (desc == doc->end()) return fail(DecodeError::MissingField, "desc");
    if (!result->is_string() || !desc->is_string()) {
        return fail(DecodeError::MalformedJson, "result and desc must be strings");
    }
    const auto tag = result->get<std::string>();
    if (tag != "ok" && tag != "error") return fail(DecodeError::InvalidField, "result");

    Response response{tag == "ok" ? ResultTag::Ok : ResultTag::Error, desc->get<std::string>(),
                      Json::object()};
    for (const auto& [key, value] : doc->items()) {
        if (key != "result" && key != "desc") response.extras[key] = value;
    }
    return response;
}

}  // namespace evgw
