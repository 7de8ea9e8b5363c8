#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evgw/sensor_script.hpp"
#include "evgw/testkit/mock_push_server.hpp"
#include "harness.hpp"

namespace evgw {
namespace {

using namespace std::chrono_literals;
using test::RunningGateway;

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return out + "'";
}

// Runs argv with stderr folded into stdout.
int run_merged(const std::vector<std::string>& argv, std::string* out) {
    std::string command;
    for (const auto& a : argv) command += shell_quote(a) + " ";
    return testkit::run_process({"/bin/sh", "-c", command + "2>&1"}, out);
}

std::string strip_newline(std::string s) {
    while (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

class ToolsTest : public ::testing::Test {
protected:
    testkit::TempDir dir{"evgw-tools"};

    std::string credentials(const std::string& account, const std::string& password) {
        const auto path = dir / (account + ".json");
        std::ofstream(path) << Json{{"account", account}, {"password", password}}.dump();
        return path.string();
    }

    int evhctl(const std::string& gateway, const std::string& account, const std::string& password,
               std::vector<std::string> args, std::string* out) {
        std::vector<std::string> argv{EVGW_EVHCTL, "-g", gateway, "--credentials", credentials(account, password)};
        argv.insert(argv.end(), args.begin(), args.end());
        return testkit::run_process(argv, out);
    }
};

TEST_F(ToolsTest, GatewaydRejectsDuplicateChannelName) {
    auto config = test::harness_config(dir);
    auto doc = to_json(config);
    doc["channels"][2]["name"] = "power_outage";
    const auto path = dir / "bad.json";
    std::ofstream(path) << doc.dump(2);
    std::string out;
    EXPECT_EQ(run_merged({EVGW_GATEWAYD, "--config", path.string()}, &out), 1);
    EXPECT_NE(out.find("power_outage"), std::string::npos) << out;
    EXPECT_NE(out.find("channels[2].name"), std::string::npos) << out;
}

TEST_F(ToolsTest, GatewaydStartsEmptyWithoutSnapshot) {
    auto config = test::harness_config(dir);
    config.snapshot_path = (dir / "missing" / "state.json").string();
    std::filesystem::create_directories(dir / "missing");
    testkit::GatewayProcess gw(EVGW_GATEWAYD, config, dir / "gw.json");
    auto admin = test::login(gw.client_endpoint(), "admin", "admin-pass");
    for (const auto& channel : config.channels) {
        const auto reply = admin->call(cmd::GetSubscriberList{channel.name});
        ASSERT_TRUE(reply.is_ok());
        EXPECT_TRUE(reply.extras["subscribers"].empty());
    }
    EXPECT_TRUE(admin->call(cmd::Update{}).is_ok());
    EXPECT_EQ(gw.stop(), 0);
}

TEST_F(ToolsTest, EvhctlSubscribe) {
    RunningGateway gw(test::harness_config(dir));
    const auto endpoint = gw.endpoint(ClientEndpoint::Kind::Tcp).to_string();
    std::string out;
    EXPECT_EQ(evhctl(endpoint, "alice", "alice-pass",
                     {"subscribe", "--event", "power_outage", "--phone", "+84900000001", "--token", "T"}, &out),
              0);
    EXPECT_EQ(Json::parse(out)["result"], "ok");
    EXPECT_EQ(gw->registry().list_subscribers("power_outage")->at(0).push_token, "T");
}

TEST_F(ToolsTest, EvhctlSubscriberCannotListSubscribers) {
    RunningGateway gw(test::harness_config(dir));
    std::string out;
    EXPECT_EQ(evhctl(gw.endpoint(ClientEndpoint::Kind::Tcp).to_string(), "alice", "alice-pass",
                     {"get-subscribers", "--event", "power_outage"}, &out),
              2);
    EXPECT_EQ(Json::parse(out)["desc"], "unauthorized");
}

TEST_F(ToolsTest, EvhctlUpdatePrintsTheRawFrame) {
    RunningGateway gw(test::harness_config(dir));
    const auto endpoint = gw.endpoint(ClientEndpoint::Kind::Tcp);
    std::string out;
    ASSERT_EQ(evhctl(endpoint.to_string(), "admin", "admin-pass", {"update"}, &out), 0);
    // Same request from a protocol client: the reply bytes must be identical.
    auto admin = test::login(endpoint, "admin", "admin-pass");
    EXPECT_EQ(strip_newline(out), admin->request(encode_command(cmd::Update{})));
    const auto doc = Json::parse(out);
    ASSERT_EQ(doc["channels"].size(), 3u);
    EXPECT_EQ(doc["channels"][1]["name"], "high_temperature");
}

TEST_F(ToolsTest, EvhctlTransportErrorExitsOne) {
    std::string out;
    EXPECT_EQ(evhctl("tcp://127.0.0.1:1", "admin", "admin-pass", {"update"}, &out), 1);
}

TEST_F(ToolsTest, SensorSimThresholdCrossingNotifiesOnce) {
    testkit::MockPushServer push;
    push.start();
    auto config = test::harness_config(dir);
    config.notify.enabled = true;
    config.notify.push.url = push.url();
    RunningGateway gw(std::move(config));
    ASSERT_TRUE(gw->registry().subscribe("high_temperature", {"+84900000001", "tok-1"}));

    const auto script = dir / "cross.json";
    std::ofstream(script) << R"([{"delay_ms":0,"channel":1,"value":40},
                                 {"delay_ms":10,"channel":1,"value":55},
                                 {"delay_ms":10,"channel":1,"value":60},
                                 {"delay_ms":10,"channel":1,"value":70}])";
    std::string out;
    EXPECT_EQ(testkit::run_process({EVGW_SENSOR_SIM, "-g", "127.0.0.1:" + std::to_string(gw->sensor_port()), "-s",
                                    script.string(), "-n", "1"},
                                   &out),
              0)
        << out;
    EXPECT_NE(out.find("total: sent 4/4"), std::string::npos) << out;
    ASSERT_TRUE(test::eventually([&] { return gw->metrics().readings_accepted.load() == 4; }));
    ASSERT_TRUE(push.wait_for(1, 5s));
    std::this_thread::sleep_for(200ms);
    EXPECT_EQ(push.count(), 1u);
    EXPECT_EQ(gw->metrics().firings.load(), 1u);
}

TEST_F(ToolsTest, SensorSimUnreachableGatewayFails) {
    std::string out;
    const int status = run_merged({EVGW_SENSOR_SIM, "-g", "127.0.0.1:1", "--generate", "ramp", "--steps", "2",
                                   "--connect-timeout-ms", "500"},
                                  &out);
    EXPECT_NE(status, 0);
    EXPECT_NE(out.find("could not connect"), std::string::npos) << out;
}

TEST_F(ToolsTest, SensorSimJitterWithinTolerance) {
    RunningGateway gw(test::harness_config(dir));
    std::string out;
    ASSERT_EQ(testkit::run_process({EVGW_SENSOR_SIM, "-g", "127.0.0.1:" + std::to_string(gw->sensor_port()),
                                    "--generate", "square", "--channel", "2", "--steps", "20", "--period-ms", "25",
                                    "--json"},
                                   &out),
              0);
    const auto doc = Json::parse(out);
    EXPECT_EQ(doc["sent"], 20);
    EXPECT_LE(doc["max_jitter_ms"].get<double>(), 20.0);
}

TEST_F(ToolsTest, EvbenchRejectsZeroRuns) {
    std::string out;
    EXPECT_NE(run_merged({EVGW_EVBENCH, "latency", "--runs", "0"}, &out), 0);
    EXPECT_NE(out.find("runs must be"), std::string::npos) << out;
}

TEST_F(ToolsTest, EvbenchDisabledNotifierReportsFailures) {
    std::string out;
    EXPECT_NE(testkit::run_process({EVGW_EVBENCH, "latency", "--runs", "2", "--timeout-ms", "300",
                                    "--disable-notifier", "--json"},
                                   &out),
              0);
    const auto doc = Json::parse(out);
    EXPECT_EQ(doc["failures"], 2);
    EXPECT_EQ(doc["ok"], 0);
}

TEST_F(ToolsTest, EvbenchEmptyCountsPrintsHeaderOnly) {
    std::string out;
    EXPECT_EQ(testkit::run_process({EVGW_EVBENCH, "memory", "--counts", ""}, &out), 0);
    EXPECT_EQ(strip_newline(out), "subscribers,rss_kb");
}

TEST(SensorScript, ScheduleUnrollsRepeats) {
    const auto script = parse_script(R"({"repeat":2,"steps":[{"delay_ms":5,"channel":1,"value":1},
                                                             {"delay_ms":10,"channel":1,"value":2}]})");
    EXPECT_EQ(script.frame_count(), 4u);
    const auto schedule = script.schedule();
    ASSERT_EQ(schedule.size(), 4u);
    EXPECT_EQ(schedule[3].count(), 30);
    EXPECT_THROW(parse_script(R"([{"delay_ms":-1,"channel":1,"value":1}])"), ScriptError);
}

TEST(SensorScript, ShippedScriptsParse) {
    std::size_t parsed = 0;
    for (const auto& entry : std::filesystem::directory_iterator(EVGW_FIXTURE_DIR "/../../scripts")) {
        std::ifstream in(entry.path());
        std::stringstream text;
        text << in.rdbuf();
        EXPECT_NO_THROW(parse_script(text.str())) << entry.path();
        ++parsed;
    }
    EXPECT_GE(parsed, 2u);
}

}  // namespace
}  // namespace evgw
