#include <gtest/gtest.h>

#include <random>

#include <boost/asio.hpp>

#include "harness.hpp"

namespace evgw {
namespace {

namespace asio = boost::asio;
using asio::ip::tcp;
using namespace std::chrono_literals;
using test::RunningGateway;

// Blocking raw socket, for bytes the protocol client would never send.
struct RawSocket {
    asio::io_context io;
    tcp::socket socket{io};

    explicit RawSocket(std::uint16_t port) { socket.connect({asio::ip::make_address("127.0.0.1"), port}); }

    void write(std::string_view bytes) { asio::write(socket, asio::buffer(bytes.data(), bytes.size())); }

    // Everything until the peer closes (or the 5 s receive timeout hits).
    std::string read_to_eof() {
        timeval tv{5, 0};
        ::setsockopt(socket.native_handle(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        std::string out;
        char buf[4096];
        for (;;) {
            const auto n = ::recv(socket.native_handle(), buf, sizeof buf, 0);
            if (n <= 0) return n == 0 ? out : out + "<timeout>";
            out.append(buf, static_cast<std::size_t>(n));
        }
    }
};

class TransportTest : public ::testing::Test {
protected:
    testkit::TempDir dir{"evgw-transport"};
};

TEST_F(TransportTest, TcpSessionRoundTrip) {
    RunningGateway gw(test::harness_config(dir));
    auto alice = test::login(gw.endpoint(ClientEndpoint::Kind::Tcp), "alice", "alice-pass");
    EXPECT_TRUE(alice->call(cmd::Subscribe{"+84900000001", "tok", "power_outage"}).is_ok());
    EXPECT_EQ(gw->registry().subscription_count(), 1u);
}

TEST_F(TransportTest, EveryTransportAnswersTheSameTranscript) {
    std::vector<std::string> reference;
    for (auto kind : {ClientEndpoint::Kind::Tcp, ClientEndpoint::Kind::Tls, ClientEndpoint::Kind::WebSocket,
                      ClientEndpoint::Kind::Local}) {
        testkit::TempDir fresh{"evgw-transcript"};
        RunningGateway gw(test::harness_config(fresh, {true, true, true}));
        const auto endpoint = gw.endpoint(kind);
        SCOPED_TRACE(endpoint.to_string());
        const auto run = test::run_transcript(endpoint);
        EXPECT_TRUE(run.all_open);
        if (reference.empty()) {
            reference = run.replies;
        } else {
            EXPECT_EQ(run.replies, reference);
        }
    }
}

TEST_F(TransportTest, PlaintextClientOnTlsPortIsDropped) {
    RunningGateway gw(test::harness_config(dir, {.tls = true}));
    {
        RawSocket raw(gw->tls_port());
        raw.write(encode_command(cmd::SessionInitiation{"admin", "admin-pass"}) + "\n");
        const auto got = raw.read_to_eof();
        EXPECT_EQ(got.find("\"result\""), std::string::npos) << got;
    }
    // The listener keeps serving real TLS clients.
    auto admin = test::login(gw.endpoint(ClientEndpoint::Kind::Tls), "admin", "admin-pass");
    EXPECT_TRUE(admin->call(cmd::Update{}).is_ok());
}

TEST_F(TransportTest, FrameAtLimitAcceptedOneMoreRejected) {
    RunningGateway gw(test::harness_config(dir));
    auto admin = test::login(gw.endpoint(ClientEndpoint::Kind::Tcp), "admin", "admin-pass");

    auto padded = [](std::size_t size) {
        std::string frame = R"({"action":"Update")";
        frame.append(size - frame.size() - 1, ' ');
        frame.push_back('}');
        return frame;
    };
    auto at_limit = padded(kMaxFrameBytes);
    ASSERT_EQ(at_limit.size(), kMaxFrameBytes);
    EXPECT_TRUE(decode_response(admin->request(at_limit))->is_ok());

    admin->send_frame(padded(kMaxFrameBytes + 1));
    auto reply = admin->read_frame();
    ASSERT_TRUE(reply);
    EXPECT_EQ(decode_response(*reply)->desc, "bad_request");
    EXPECT_FALSE(admin->read_frame());
}

TEST_F(TransportTest, SensorGarbageClosesOnlyThatConnection) {
    RunningGateway gw(test::harness_config(dir));
    RawSocket good(gw->sensor_port());
    RawSocket bad(gw->sensor_port());
    good.write(encode_reading(ChannelId{1}, 10) + "\n");
    bad.write("this is not json\n");
    EXPECT_EQ(bad.read_to_eof(), "");
    good.write(encode_reading(ChannelId{1}, 60) + "\n");
    ASSERT_TRUE(test::eventually([&] { return gw->metrics().readings_accepted.load() == 2; }));
    EXPECT_EQ(gw->registry().latest(ChannelId{1})->value, 60.0);
    EXPECT_EQ(gw->metrics().malformed_frames.load(), 1u);
    EXPECT_EQ(gw->metrics().firings.load(), 1u);
}

TEST_F(TransportTest, IdleConnectionWithoutInitIsClosed) {
    auto config = test::harness_config(dir);
    config.client.init_timeout = 200ms;
    RunningGateway gw(std::move(config));
    RawSocket raw(gw->client_port());
    const auto started = std::chrono::steady_clock::now();
    EXPECT_EQ(raw.read_to_eof(), "");
    EXPECT_LT(std::chrono::steady_clock::now() - started, 3s);
}

TEST_F(TransportTest, LocalSocketSession) {
    RunningGateway gw(test::harness_config(dir, {.local = true}));
    auto admin = test::login(gw.endpoint(ClientEndpoint::Kind::Local), "admin", "admin-pass");
    auto reply = admin->call(cmd::AddSubscriber{"+84900000001", "tok", "low_light"});
    EXPECT_TRUE(reply.is_ok());
    EXPECT_EQ(gw->registry().list_subscribers("low_light")->size(), 1u);
}

TEST_F(TransportTest, PreAuthFuzzNeverMutates) {
    RunningGateway gw(test::harness_config(dir));
    const auto before = gw->registry().mutation_count();
    std::mt19937 rng(11);
    for (int i = 0; i < 200; ++i) {
        auto client = ProtocolClient::connect(gw.endpoint(ClientEndpoint::Kind::Tcp));
        const auto action = kAllActions[rng() % kAllActions.size()];
        Json frame{{"action", std::string(to_string(action))}, {"event", "power_outage"},
                   {"phone", "+84900000001"}, {"fcm_id", "x"}};
        if (action == Action::SessionInitiation) frame["password"] = "wrong";
        client->send_frame(frame.dump());
        EXPECT_TRUE(client->read_frame());
        EXPECT_FALSE(client->read_frame());
    }
    EXPECT_EQ(gw->registry().mutation_count(), before);
}

}  // namespace
}  // namespace evgw
