// Command-line client: one session, one command, the raw reply on stdout.
//
// Credentials come from EVH_ACCOUNT / EVH_PASSWORD (and EVH_NEW_PASSWORD for
// change-password) or from a --credentials JSON file, never from argv.
//
// Exit codes: 0 result=ok, 2 protocol-level error, 1 transport/infra error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evgw/client.hpp"
#include "evgw/codec.hpp"

namespace {

struct Credentials {
    std::string account;
    std::string password;
    std::string new_password;
};

std::string env_or(const char* name, std::string fallback) {
    const char* value = std::getenv(name);
    return value ? std::string(value) : std::move(fallback);
}

// File: {"account": "...", "password": "...", "new_password": "..."}.
Credentials load_credentials(const std::string& path) {
    Credentials out;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open credentials file " + path);
        const auto doc = nlohmann::json::parse(in, nullptr, false);
        if (!doc.is_object()) throw std::runtime_error("credentials file " + path + " is not a JSON object");
        out.account = doc.value("account", "");
        out.password = doc.value("password", "");
        out.new_password = doc.value("new_password", "");
    }
    out.account = env_or("EVH_ACCOUNT", out.account);
    out.password = env_or("EVH_PASSWORD", out.password);
    out.new_password = env_or("EVH_NEW_PASSWORD", out.new_password);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event gateway client"};
    app.require_subcommand(1);

    std::string gateway = env_or("EVH_GATEWAY", "tcp://127.0.0.1:7002");
    std::string credentials_file;
    std::string ca_file;
    unsigned timeout_ms = 10000;
    app.add_option("-g,--gateway", gateway, "tcp://host:port, tls://host:port, ws://host:port or unix:<path> "
                                            "(env EVH_GATEWAY)");
    app.add_option("--credentials", credentials_file, "JSON file with account/password/new_password");
    app.add_option("--ca-file", ca_file, "Verify a tls:// gateway against this CA");
    app.add_option("--timeout-ms", timeout_ms, "Per-exchange timeout");

    std::string event, phone, token, target_account;

    auto* init = app.add_subcommand("init", "Authenticate only (SessionInitiation)");
    auto* change_password = app.add_subcommand("change-password", "ChangePassword (new password from EVH_NEW_PASSWORD)");
    change_password->add_option("--account", target_account, "Account to change (default: the session account)");
    auto* get_subscribers = app.add_subcommand("get-subscribers", "GetSubscriberList (admin)");
    get_subscribers->add_option("-e,--event", event)->required();
    auto* del_subscriber = app.add_subcommand("del-subscriber", "DelSubscriber (admin)");
    del_subscriber->add_option("-e,--event", event)->required();
    del_subscriber->add_option("-p,--phone", phone)->required();
    auto* add_subscriber = app.add_subcommand("add-subscriber", "AddSubscriber (admin)");
    add_subscriber->add_option("-e,--event", event)->required();
    add_subscriber->add_option("-p,--phone", phone)->required();
    add_subscriber->add_option("-t,--token", token, "Push token (fcm_id)")->required();
    auto* subscribe = app.add_subcommand("subscribe", "Subscribe (subscriber)");
    subscribe->add_option("-e,--event", event)->required();
    subscribe->add_option("-p,--phone", phone)->required();
    subscribe->add_option("-t,--token", token, "Push token (fcm_id)")->required();
    auto* unsubscribe = app.add_subcommand("unsubscribe", "Unsubscribe (subscriber)");
    unsubscribe->add_option("-e,--event", event)->required();
    unsubscribe->add_option("-p,--phone", phone)->required();
    auto* update = app.add_subcommand("update", "Update: status of one or all channels");
    update->add_option("-e,--event", event, "Limit to one event");

    CLI11_PARSE(app, argc, argv);

    Credentials credentials;
    evgw::ClientEndpoint endpoint;
    try {
        credentials = load_credentials(credentials_file);
        endpoint = evgw::ClientEndpoint::parse(gateway);
        endpoint.ca_file = ca_file;
    } catch (const std::exception& e) {
        std::cerr << "evhctl: " << e.what() << '\n';
        return 1;
    }
    if (credentials.account.empty()) {
        std::cerr << "evhctl: no account; set EVH_ACCOUNT or use --credentials\n";
        return 1;
    }

    std::optional<evgw::Command> command;
    if (*change_password) {
        if (credentials.new_password.empty()) {
            std::cerr << "evhctl: no new password; set EVH_NEW_PASSWORD or new_password in --credentials\n";
            return 1;
        }
        command = evgw::cmd::ChangePassword{target_account.empty() ? credentials.account : target_account,
                                            credentials.new_password};
    } else if (*get_subscribers) {
        command = evgw::cmd::GetSubscriberList{event};
    } else if (*del_subscriber) {
        command = evgw::cmd::DelSubscriber{phone, event};
    } else if (*add_subscriber) {
        command = evgw::cmd::AddSubscriber{phone, token, event};
    } else if (*subscribe) {
        command = evgw::cmd::Subscribe{phone, token, event};
    } else if (*unsubscribe) {
        command = evgw::cmd::Unsubscribe{phone, event};
    } else if (*update) {
        command = evgw::cmd::Update{event.empty() ? std::nullopt : std::optional<std::string>(event)};
    }
    (void)init;

    try {
        auto client = evgw::ProtocolClient::connect(endpoint, std::chrono::milliseconds(timeout_ms));
        std::string reply =
            client->request(evgw::encode_command(evgw::cmd::SessionInitiation{credentials.account, credentials.password}));
        auto decoded = evgw::decode_response(reply);
        if (decoded && decoded->is_ok() && command) {
            reply = client->request(evgw::encode_command(*command));
            decoded = evgw::decode_response(reply);
        }
        client->close();
        std::cout << reply << '\n';
        if (!decoded) {
            std::cerr << "evhctl: undecodable reply\n";
            return 1;
        }
        return decoded->is_ok() ? 0 : 2;
    } catch (const evgw::ClientError& e) {
        std::cerr << "evhctl: " << e.what() << '\n';
        return 1;
    }
}
