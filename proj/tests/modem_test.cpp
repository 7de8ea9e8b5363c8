#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "evgw/modem.hpp"
#include "evgw/testkit/gateway_process.hpp"
#include "evgw/testkit/mock_modem.hpp"
#include "support.hpp"

namespace evgw {
namespace {

using namespace std::chrono_literals;
using testkit::MockModem;
using testkit::MockModemScript;

MockModemScript script_from(const nlohmann::json& doc) {
    MockModemScript s;
    s.cmgf_reply = doc.value("cmgf_reply", s.cmgf_reply);
    s.send_prompt = doc.value("send_prompt", s.send_prompt);
    s.cmgs_reply = doc.value("cmgs_reply", s.cmgs_reply);
    s.body_reply = doc.value("body_reply", s.body_reply);
    s.atd_reply = doc.value("atd_reply", s.atd_reply);
    s.ring_event = doc.value("ring_event", s.ring_event);
    s.ath_reply = doc.value("ath_reply", s.ath_reply);
    s.close_on_command = doc.value("close_on_command", s.close_on_command);
    return s;
}

std::vector<std::filesystem::path> transcript_fixtures() {
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(EVGW_FIXTURE_DIR "/modem")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

class Transcript : public ::testing::TestWithParam<std::filesystem::path> {};

// Each fixture pins the exact bytes of one dialogue in both directions.
TEST_P(Transcript, ByteExact) {
    std::ifstream in(GetParam());
    const auto fixture = nlohmann::json::parse(in);
    testkit::TempDir dir;
    MockModem modem(dir / "modem.sock", script_from(fixture["script"]));
    modem.start();
    AtModem at([&] { return open_modem_link(modem.endpoint()); },
               std::chrono::milliseconds(fixture.value("step_timeout_ms", 2000)));

    Outcome outcome;
    if (fixture["dialogue"] == "sms") {
        outcome = at.send_sms(fixture["phone"].get<std::string>(), fixture["text"].get<std::string>());
    } else {
        outcome = at.ring(fixture["phone"].get<std::string>(), std::chrono::milliseconds(fixture["ring_ms"].get<int>()));
    }
    EXPECT_EQ(to_string(outcome), fixture["outcome"].get<std::string>());

    const auto host = fixture["host"].get<std::string>();
    const auto sent = fixture["modem"].get<std::string>();
    // The mock reads asynchronously; give trailing bytes (ESC) time to land.
    test::eventually([&] { return modem.host_bytes() == host; }, 1s);
    EXPECT_EQ(modem.host_bytes(), host);
    EXPECT_EQ(modem.modem_bytes(), sent);
}

INSTANTIATE_TEST_SUITE_P(Modem, Transcript, ::testing::ValuesIn(transcript_fixtures()),
                         [](const auto& info) { return info.param.stem().string(); });

TEST(AtModem, UnreachableModemIsIo) {
    AtModem at([] { return open_modem_link("unix:/nonexistent/modem.sock"); }, 200ms);
    EXPECT_EQ(at.send_sms("+84900000001", "x"), Outcome::failed("io"));
    EXPECT_EQ(at.ring("+84900000001", 10ms), Outcome::failed("io"));
}

TEST(AtModem, ReconnectsAfterModemRestart) {
    testkit::TempDir dir;
    auto modem = std::make_unique<MockModem>(dir / "modem.sock");
    modem->start();
    AtModem at([&] { return open_modem_link(modem->endpoint()); }, 1s);
    ASSERT_TRUE(at.send_sms("+84900000001", "one").ok());

    modem = std::make_unique<MockModem>(dir / "modem.sock");
    modem->start();
    EXPECT_TRUE(at.send_sms("+84900000001", "two").ok());
    ASSERT_EQ(modem->messages().size(), 1u);
    EXPECT_EQ(modem->messages()[0].text, "two");
}

TEST(AtModem, RecoversAfterTimeout) {
    testkit::TempDir dir;
    MockModemScript silent;
    silent.send_prompt = false;
    MockModem modem(dir / "modem.sock", silent);
    modem.start();
    AtModem at([&] { return open_modem_link(modem.endpoint()); }, 150ms);
    EXPECT_EQ(at.send_sms("+84900000001", "x"), Outcome::failed("timeout@cmgs"));
    modem.set_script({});
    EXPECT_TRUE(at.send_sms("+84900000001", "y").ok());
    EXPECT_EQ(modem.messages().back().text, "y");
}

TEST(ModemLane, RunsJobsInSubmissionOrder) {
    testkit::TempDir dir;
    MockModem modem(dir / "modem.sock");
    modem.start();
    ModemLane lane(std::make_unique<AtModem>([&] { return open_modem_link(modem.endpoint()); }, 1s));
    std::vector<std::future<Outcome>> results;
    for (int i = 0; i < 10; ++i) {
        results.push_back(lane.submit([i](AtModem& at) { return at.send_sms("+84900000001", "msg " + std::to_string(i)); }));
    }
    for (auto& r : results) EXPECT_TRUE(r.get().ok());
    const auto messages = modem.messages();
    ASSERT_EQ(messages.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(messages[i].text, "msg " + std::to_string(i));
}

}  // namespace
}  // namespace evgw
