#include <gtest/gtest.h>

#include "evgw/config.hpp"
#include "evgw/password.hpp"
#include "support.hpp"

namespace evgw {
namespace {

Json minimal() {
    return Json{
        {"accounts", Json::array({account_to_json(test::test_accounts()[0]), account_to_json(test::test_accounts()[1])})},
        {"channels", Json::array({channel_to_json(test::example_channels()[0]), channel_to_json(test::example_channels()[1])})},
    };
}

std::string error_of(const Json& doc) {
    try {
        parse_config(doc.dump());
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

TEST(Config, Defaults) {
    const auto config = parse_config(minimal().dump());
    EXPECT_EQ(config.sensor.listener.port, 7001);
    EXPECT_EQ(config.client.tcp.port, 7002);
    EXPECT_EQ(config.client.websocket.port, 7003);
    EXPECT_FALSE(config.client.websocket.enabled);
    EXPECT_FALSE(config.client.tls.enabled);
    EXPECT_EQ(config.client.init_timeout, std::chrono::seconds(10));
    EXPECT_EQ(config.notify.queue_capacity, 1024u);
    EXPECT_EQ(config.notify.call_mode, CallMode::Escalate);
    EXPECT_EQ(config.channels.size(), 2u);
    EXPECT_TRUE(config.snapshot_path.empty());
}

TEST(Config, RoundTripsThroughJson) {
    auto config = parse_config(minimal().dump());
    config.notify.push.url = "http://127.0.0.1:9/fcm/send";
    config.notify.call_mode = CallMode::Always;
    config.client.local_path = "/tmp/x.sock";
    config.channels[1].retrigger_interval = std::chrono::milliseconds(1500);
    const auto again = parse_config(to_json(config).dump());
    EXPECT_EQ(to_json(again), to_json(config));
    EXPECT_EQ(again.channels, config.channels);
    EXPECT_EQ(again.accounts, config.accounts);
}

TEST(Config, DuplicateChannelNameIsNamed) {
    auto doc = minimal();
    doc["channels"][1]["name"] = doc["channels"][0]["name"];
    const auto error = error_of(doc);
    EXPECT_NE(error.find("channels[1].name"), std::string::npos) << error;
    EXPECT_NE(error.find("power_outage"), std::string::npos) << error;
}

TEST(Config, FieldPathsInErrors) {
    auto doc = minimal();
    doc["channels"][0]["condition"] = {{"kind", "threshold"}, {"op", "ne"}, {"threshold", 1}};
    EXPECT_NE(error_of(doc).find("channels[0].condition.op"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc["channels"][1]["id"] = doc["channels"][0]["id"];
    EXPECT_NE(error_of(doc).find("channels[1].id"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc["accounts"][1]["role"] = "admin";
    EXPECT_NE(error_of(doc).find("exactly one admin"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc["accounts"][0]["password_digest"] = "plaintext";
    EXPECT_NE(error_of(doc).find("accounts[0].password_digest"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc["client"] = {{"port", 70000}};
    EXPECT_NE(error_of(doc).find("client.port"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc["notify"] = {{"call_mode", "sometimes"}};
    EXPECT_NE(error_of(doc).find("notify.call_mode"), std::string::npos) << error_of(doc);

    doc = minimal();
    doc.erase("channels");
    EXPECT_NE(error_of(doc).find("channels"), std::string::npos) << error_of(doc);
}

TEST(Config, SyntaxErrorsCarryLineAndColumn) {
    try {
        parse_config("{\n  \"channels\": [\n    oops\n  ]\n}");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Config, MissingFileIsAConfigError) {
    EXPECT_THROW(load_config("/nonexistent/gateway.json"), ConfigError);
}

TEST(Config, ShippedExampleLoads) {
    const auto config = load_config(EVGW_FIXTURE_DIR "/../../config/gateway.example.json");
    auto expected = test::example_channels();
    expected[2].retrigger_interval = std::chrono::minutes(10);
    EXPECT_EQ(config.channels, expected);
    EXPECT_TRUE(config.client.websocket.enabled);
    EXPECT_EQ(config.accounts.size(), 2u);
}

TEST(Password, DigestVerifies) {
    const auto digest = make_password_digest("s3cret", 1000);
    EXPECT_TRUE(is_well_formed_digest(digest));
    EXPECT_TRUE(verify_password(digest, "s3cret"));
    EXPECT_FALSE(verify_password(digest, "s3cret "));
    EXPECT_FALSE(verify_password("pbkdf2-sha256$x$00$00", "s3cret"));
    EXPECT_NE(make_password_digest("s3cret", 1000), digest);  // salted
    EXPECT_EQ(digest.rfind("pbkdf2-sha256$1000$", 0), 0u);
}

}  // namespace
}  // namespace evgw
