#include "evgw/session.hpp"

namespace evgw {

namespace {

Response from_registry(const Expected<Ok, RegistryError>& result, std::string_view ok_desc = "ok") {
    if (result) return Response::ok(std::string(ok_desc));
    return Response::error(std::string(to_code(result.error())));
}

Json status_entry(const ChannelStatus& status) {
    Json entry{{"id", status.channel.id.value},
               {"name", status.channel.name},
               {"value", nullptr},
               {"satisfied", status.satisfied}};
    if (status.value) entry["value"] = *status.value;
    return entry;
}

struct Executor {
    Registry& registry;
    const MetricsSource& metrics;

    Response operator()(const cmd::SessionInitiation&) {
        return Response::error("bad_request", "session already established");
    }

    Response operator()(const cmd::ChangePassword& c) {
        return from_registry(registry.change_password(c.account, c.new_password));
    }

    Response operator()(const cmd::GetSubscriberList& c) {
        auto list = registry.list_subscribers(c.event);
        if (!list) return Response::error(std::string(to_code(list.error())));
        Json subscribers = Json::array();
        for (const auto& address : *list) {
            subscribers.push_back({{"phone", address.phone}, {"fcm_id", address.push_token}});
        }
        return Response::ok("ok", Json{{"event", c.event}, {"subscribers", std::move(subscribers)}});
    }

    Response operator()(const cmd::DelSubscriber& c) {
        return from_registry(registry.admin_del_subscriber(c.event, c.phone));
    }

    Response operator()(const cmd::AddSubscriber& c) {
        return from_registry(registry.admin_add_subscriber(c.event, SubscriberAddress{c.phone, c.fcm_id}));
    }

    Response operator()(const cmd::Subscribe& c) {
        return from_registry(registry.subscribe(c.event, SubscriberAddress{c.phone, c.fcm_id}));
    }

    Response operator()(const cmd::Unsubscribe& c) {
        return from_registry(registry.unsubscribe(c.event, c.phone));
    }

    Response operator()(const cmd::Update& c) {
        Json channels = Json::array();
        bool matched = false;
        for (const auto& status : registry.status()) {
            if (c.event && status.channel.name != *c.event) continue;
            matched = true;
            channels.push_back(status_entry(status));
        }
        if (c.event && !matched) return Response::error("unknown_event");
        Json extras{{"channels", std::move(channels)}};
        if (metrics) extras["metrics"] = metrics();
        return Response::ok("ok", std::move(extras));
    }
};

}  // namespace

bool authorize(Role role, Action action) noexcept {
    switch (action) {
        case Action::SessionInitiation:
        case Action::Update:
            return true;
        case Action::ChangePassword:
        case Action::GetSubscriberList:
        case Action::DelSubscriber:
        case Action::AddSubscriber:
            return role == Role::Admin;
        case Action::Subscribe:
        case Action::Unsubscribe:
            return role == Role::Subscriber;
    }
    return false;
}

Response execute(Registry& registry, Role role, const Command& command, const MetricsSource& metrics) {
    if (!authorize(role, action_of(command))) return Response::error("unauthorized");
    return std::visit(Executor{registry, metrics}, command);
}

Session::Session(Registry& registry, MetricsSource metrics)
    : registry_(registry), metrics_(std::move(metrics)) {}

Session::Step Session::reply(const Response& response, bool close) {
    if (close) phase_ = Phase::Terminated;
    return Step{encode_response(response), close};
}

Session::Step Session::handle_oversize_frame() {
    if (phase_ == Phase::Terminated) return Step{std::nullopt, true};
    return reply(Response::error("bad_request", "frame too long"), true);
}

Session::Step Session::handle_frame(std::string_view frame) {
    if (phase_ == Phase::Terminated) return Step{std::nullopt, true};

    auto decoded = decode_command(frame);
    if (!decoded) {
        const auto& failure = decoded.error();
        const bool framing = failure.code == DecodeError::MalformedJson;
        const std::string message = std::string(to_string(failure.code)) + ": " + failure.detail;
        return reply(Response::error("bad_request", message),
                     framing || phase_ == Phase::AwaitingInit);
    }

    const Command& command = *decoded;
    if (phase_ == Phase::AwaitingInit) {
        const auto* init = std::get_if<cmd::SessionInitiation>(&command);
        if (!init) return reply(Response::error("unauthorized", "session not established"), true);
        auto role = registry_.verify_credentials(init->account, init->password);
        if (!role) return reply(Response::error(std::string(to_code(role.error()))), true);
        role_ = *role;
        phase_ = Phase::Established;
        return reply(Response::ok("ok", Json{{"role", std::string(to_string(*role))}}), false);
    }

    return reply(execute(registry_, *role_, command, metrics_), false);
}

}  // namespace evgw
