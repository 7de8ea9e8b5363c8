// Desk-scale experiments against a gatewayd child process:
//   latency  reading injected on loopback -> first SMS at a mock modem
//   memory   gateway resident set size versus subscriber count
//
// The mocks run in this process so both ends of a latency sample are read
// from the same monotonic clock.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/connect.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/write.hpp>
#include <CLI11.hpp>

#include "evgw/client.hpp"
#include "evgw/codec.hpp"
#include "evgw/testkit/gateway_process.hpp"
#include "evgw/testkit/mock_modem.hpp"
#include "evgw/testkit/mock_push_server.hpp"

namespace asio = boost::asio;
using namespace std::chrono_literals;
using evgw::testkit::GatewayProcess;
using evgw::testkit::TempDir;

namespace {

constexpr const char* kLatencyNote =
    "latency is gateway-internal only: reading written on loopback -> first SMS accepted by a mock modem "
    "(push arrivals reported separately); it excludes GSM/FCM delivery and is not comparable to field measurements";
constexpr const char* kMemoryNote =
    "rss_kb is VmRSS from /proc/<pid>/status; absolute values are platform-dependent, only the trend is meaningful";

struct Stats {
    double mean = 0, p50 = 0, p99 = 0, max = 0;
};

// Nearest-rank percentiles.
Stats summarize(std::vector<double> samples) {
    Stats s;
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    auto rank = [&](double p) {
        const auto k = static_cast<std::size_t>(std::ceil(p * samples.size()));
        return samples[std::clamp<std::size_t>(k, 1, samples.size()) - 1];
    };
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    s.p50 = rank(0.50);
    s.p99 = rank(0.99);
    s.max = samples.back();
    return s;
}

std::filesystem::path default_gatewayd() { return evgw::testkit::self_directory() / "gatewayd"; }

void expect_ok(evgw::ProtocolClient& client, const evgw::Command& command) {
    const auto reply = client.call(command);
    if (!reply.is_ok()) {
        throw std::runtime_error(std::string(evgw::to_string(evgw::action_of(command))) + " failed: " + reply.desc);
    }
}

std::unique_ptr<evgw::ProtocolClient> login(const GatewayProcess& gateway, const char* account, const char* password) {
    auto client = evgw::ProtocolClient::connect(gateway.client_endpoint());
    expect_ok(*client, evgw::cmd::SessionInitiation{account, password});
    return client;
}

struct LatencyOptions {
    unsigned runs = 100;
    bool json = false;
    bool disable_notifier = false;
    unsigned timeout_ms = 2000;
    std::string gatewayd;
};

int run_latency(const LatencyOptions& options) {
    if (options.runs < 1) {
        std::cerr << "evbench: runs must be ≥ 1\n";
        return 1;
    }
    TempDir dir("evbench");
    evgw::testkit::MockPushServer push;
    push.start();
    evgw::testkit::MockModem modem(dir / "modem.sock");
    modem.start();

    auto config = evgw::testkit::loopback_config();
    config.notify.enabled = !options.disable_notifier;
    config.notify.push.url = push.url();
    config.notify.modem.endpoint = modem.endpoint();
    config.notify.modem.step_timeout = 2s;
    evgw::Channel channel;
    channel.id = evgw::ChannelId{1};
    channel.name = "bench_threshold";
    channel.condition = evgw::Condition::threshold_of(evgw::CompareOp::GT, 50.0);
    channel.policy = {true, true, false};
    config.channels = {channel};

    GatewayProcess gateway(options.gatewayd, config, dir / "gateway.json");
    {
        auto client = login(gateway, evgw::testkit::kSubscriberAccount, evgw::testkit::kSubscriberPassword);
        expect_ok(*client, evgw::cmd::Subscribe{"+84900000001", "bench-token", channel.name});
    }

    asio::io_context io;
    asio::ip::tcp::socket sensor(io);
    sensor.connect({asio::ip::make_address("127.0.0.1"), gateway.ports().sensor});
    sensor.set_option(asio::ip::tcp::no_delay(true));
    auto send = [&](double value) {
        const auto frame = evgw::encode_reading(channel.id, value) + "\n";
        asio::write(sensor, asio::buffer(frame));
    };

    // A sample is the first SMS reaching the modem; push arrivals are
    // reported alongside.
    std::vector<double> samples, push_samples;
    unsigned failures = 0;
    auto ms_since = [](evgw::SteadyClock::time_point from, evgw::SteadyClock::time_point to) {
        return std::chrono::duration<double, std::milli>(to - from).count();
    };
    for (unsigned run = 0; run < options.runs; ++run) {
        const std::size_t pushes = push.count();
        const std::size_t texts = modem.messages().size();
        send(0.0);  // re-arm
        const auto injected = evgw::SteadyClock::now();
        send(51.0 + run);

        // Wait for both so the next run starts from a quiet pipeline.
        const auto deadline = injected + std::chrono::milliseconds(options.timeout_ms);
        std::optional<evgw::SteadyClock::time_point> sms_at, push_at;
        while (evgw::SteadyClock::now() < deadline && !(sms_at && push_at)) {
            if (!push_at && push.count() > pushes) push_at = push.received()[pushes].received_at;
            if (!sms_at) {
                const auto messages = modem.messages();
                if (messages.size() > texts) sms_at = messages[texts].at;
            }
            std::this_thread::sleep_for(200us);
        }
        if (sms_at) {
            samples.push_back(ms_since(injected, *sms_at));
        } else {
            ++failures;
        }
        if (push_at) push_samples.push_back(ms_since(injected, *push_at));
    }
    sensor.close();
    gateway.stop();

    const auto stats = summarize(samples);
    const auto push_stats = summarize(push_samples);
    if (options.json) {
        std::cout << evgw::Json{{"note", kLatencyNote},
                                {"runs", options.runs},
                                {"ok", samples.size()},
                                {"failures", failures},
                                {"mean_ms", stats.mean},
                                {"p50_ms", stats.p50},
                                {"p99_ms", stats.p99},
                                {"max_ms", stats.max},
                                {"samples_ms", samples},
                                {"push", {{"ok", push_samples.size()},
                                          {"mean_ms", push_stats.mean},
                                          {"p99_ms", push_stats.p99},
                                          {"samples_ms", push_samples}}}}
                         .dump()
                  << '\n';
    } else {
        std::cout << "# " << kLatencyNote << '\n' << "run,sms_latency_ms\n" << std::fixed << std::setprecision(3);
        for (std::size_t i = 0; i < samples.size(); ++i) std::cout << i << ',' << samples[i] << '\n';
        std::cout << "# runs=" << options.runs << " ok=" << samples.size() << " failures=" << failures
                  << " mean_ms=" << stats.mean << " p50_ms=" << stats.p50 << " p99_ms=" << stats.p99
                  << " push_mean_ms=" << push_stats.mean << " push_p99_ms=" << push_stats.p99 << '\n';
    }
    return failures == 0 ? 0 : 3;
}

std::vector<unsigned> parse_counts(const std::string& text) {
    std::vector<unsigned> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const unsigned long value = std::stoul(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad count '" + item + "'");
        out.push_back(static_cast<unsigned>(value));
    }
    return out;
}

// FCM registration tokens are ~150 characters; keep subscribers realistic.
std::string synthetic_token(unsigned index) {
    std::string token = "bench-" + std::to_string(index) + ":";
    token.resize(152, 'x');
    return token;
}

std::string synthetic_phone(unsigned index) {
    std::string digits = std::to_string(index);
    return "+8490" + std::string(7 - std::min<std::size_t>(7, digits.size()), '0') + digits;
}

int run_memory(const std::string& counts_text, bool json, const std::string& gatewayd) {
    std::vector<unsigned> counts;
    try {
        counts = parse_counts(counts_text);
    } catch (const std::exception& e) {
        std::cerr << "evbench: --counts: " << e.what() << '\n';
        return 1;
    }

    std::vector<std::pair<unsigned, long>> rows;
    if (!counts.empty()) {
        TempDir dir("evbench");
        auto config = evgw::testkit::loopback_config();
        config.io_threads = 1;
        config.notify.enabled = false;
        evgw::Channel channel;
        channel.id = evgw::ChannelId{1};
        channel.name = "power_outage";
        channel.condition = evgw::Condition::flag();
        config.channels = {channel};

        GatewayProcess gateway(gatewayd, config, dir / "gateway.json");
        auto client = login(gateway, evgw::testkit::kSubscriberAccount, evgw::testkit::kSubscriberPassword);
        unsigned current = 0;
        for (const unsigned target : counts) {
            for (; current < target; ++current) {
                expect_ok(*client, evgw::cmd::Subscribe{synthetic_phone(current), synthetic_token(current), channel.name});
            }
            for (; current > target; --current) {
                expect_ok(*client, evgw::cmd::Unsubscribe{synthetic_phone(current - 1), channel.name});
            }
            // One more round trip so the gateway is idle when sampled.
            expect_ok(*client, evgw::cmd::Update{});
            const auto rss = gateway.rss_kb();
            if (!rss) throw std::runtime_error("cannot read gateway RSS");
            rows.emplace_back(target, *rss);
        }
        client->close();
        gateway.stop();
    }

    if (json) {
        evgw::Json out = evgw::Json::array();
        for (const auto& [count, rss] : rows) out.push_back({{"subscribers", count}, {"rss_kb", rss}});
        std::cout << evgw::Json{{"note", kMemoryNote}, {"rows", out}}.dump() << '\n';
    } else {
        std::cout << "subscribers,rss_kb\n";
        for (const auto& [count, rss] : rows) std::cout << count << ',' << rss << '\n';
        std::cerr << "# " << kMemoryNote << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gateway latency and memory experiments"};
    app.require_subcommand(1);
    std::string gatewayd = default_gatewayd().string();
    app.add_option("--gatewayd", gatewayd, "gatewayd executable");

    LatencyOptions latency;
    auto* latency_cmd = app.add_subcommand("latency", "Event-to-first-SMS latency over mock transports");
    latency_cmd->add_option("-r,--runs", latency.runs, "Threshold crossings to inject");
    latency_cmd->add_option("--timeout-ms", latency.timeout_ms, "Per-run wait before counting a failure");
    latency_cmd->add_flag("--disable-notifier", latency.disable_notifier, "Run with the notifier off");
    latency_cmd->add_flag("--json", latency.json, "Machine-readable stats");

    std::string counts = "0,30,100,1000,2000,5000";
    bool memory_json = false;
    auto* memory_cmd = app.add_subcommand("memory", "Gateway RSS versus subscriber count (CSV)");
    memory_cmd->add_option("-c,--counts", counts, "Comma-separated subscriber counts");
    memory_cmd->add_flag("--json", memory_json, "Machine-readable rows");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*latency_cmd) {
            latency.gatewayd = gatewayd;
            return run_latency(latency);
        }
        return run_memory(counts, memory_json, gatewayd);
    } catch (const std::exception& e) {
        std::cerr << "evbench: " << e.what() << '\n';
        return 1;
    }
}
