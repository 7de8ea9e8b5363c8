// Sensor fleet simulator: opens one connection per node, then every node
// replays the same script on a shared absolute schedule.

#include <sys/resource.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/co_spawn.hpp>
#include <boost/asio/connect.hpp>
#include <boost/asio/detached.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/redirect_error.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/use_awaitable.hpp>
#include <boost/asio/write.hpp>
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evgw/client.hpp"
#include "evgw/codec.hpp"
#include "evgw/sensor_script.hpp"

namespace asio = boost::asio;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

struct Node {
    tcp::socket socket;
    std::size_t sent = 0;
    std::string error;
    long long max_jitter_us = 0;
};

void raise_fd_limit() {
    rlimit limit{};
    if (::getrlimit(RLIMIT_NOFILE, &limit) == 0 && limit.rlim_cur < limit.rlim_max) {
        limit.rlim_cur = limit.rlim_max;
        ::setrlimit(RLIMIT_NOFILE, &limit);
    }
}

asio::awaitable<void> replay(Node& node, const evgw::SensorScript& script,
                             const std::vector<std::chrono::milliseconds>& schedule, Clock::time_point start) {
    asio::steady_timer timer(node.socket.get_executor());
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto due = start + schedule[i];
        timer.expires_at(due);
        co_await timer.async_wait(asio::use_awaitable);
        const auto late = std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - due).count();
        node.max_jitter_us = std::max<long long>(node.max_jitter_us, std::abs(late));

        const auto& step = script.frame(i);
        std::string frame = evgw::encode_reading(step.channel, step.value);
        frame.push_back('\n');
        boost::system::error_code ec;
        co_await asio::async_write(node.socket, asio::buffer(frame), asio::redirect_error(asio::use_awaitable, ec));
        if (ec) {
            node.error = ec.message();
            co_return;
        }
        ++node.sent;
    }
    boost::system::error_code ignored;
    node.socket.shutdown(tcp::socket::shutdown_send, ignored);
}

evgw::SensorScript load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw evgw::ScriptError("cannot open script " + path);
    std::stringstream text;
    text << in.rdbuf();
    return evgw::parse_script(text.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensor fleet simulator"};
    std::string gateway = "127.0.0.1:7001";
    std::string script_path;
    std::string generate;
    unsigned nodes = 1;
    unsigned repeat = 0;
    unsigned channel = 1;
    double low = 0, high = 100;
    unsigned steps = 10;
    unsigned period_ms = 100;
    unsigned threads = 0;
    unsigned connect_timeout_ms = 10000;
    bool json = false;
    bool quiet = false;

    app.add_option("-g,--gateway", gateway, "Sensor listener, host:port");
    app.add_option("-s,--script", script_path, "Script file (JSON)");
    app.add_option("--generate", generate, "Synthetic script instead of a file")->check(CLI::IsMember({"ramp", "square"}));
    app.add_option("-n,--nodes", nodes, "Simulated sensor nodes")->check(CLI::PositiveNumber);
    app.add_option("--repeat", repeat, "Override the script's repeat count");
    app.add_option("--channel", channel, "Generator: channel id");
    app.add_option("--low", low, "Generator: low value");
    app.add_option("--high", high, "Generator: high value");
    app.add_option("--steps", steps, "Generator: number of readings")->check(CLI::PositiveNumber);
    app.add_option("--period-ms", period_ms, "Generator: delay between readings");
    app.add_option("--threads", threads, "I/O threads (default: hardware)");
    app.add_option("--connect-timeout-ms", connect_timeout_ms, "Give up connecting after this long");
    app.add_flag("--json", json, "One JSON summary line instead of the table");
    app.add_flag("-q,--quiet", quiet, "Only print the total line");
    CLI11_PARSE(app, argc, argv);

    evgw::SensorScript script;
    try {
        if (!generate.empty()) {
            script = evgw::generate_script(generate == "ramp" ? evgw::Waveform::Ramp : evgw::Waveform::Square,
                                           evgw::ChannelId{channel}, low, high, steps,
                                           std::chrono::milliseconds(period_ms));
        } else if (!script_path.empty()) {
            script = load_script(script_path);
        } else {
            std::cerr << "sensor-sim: one of --script or --generate is required\n";
            return 1;
        }
    } catch (const evgw::ScriptError& e) {
        std::cerr << "sensor-sim: " << e.what() << '\n';
        return 1;
    }
    if (repeat > 0) script.repeat = repeat;

    std::string host;
    std::uint16_t port = 0;
    try {
        auto endpoint = evgw::ClientEndpoint::parse(gateway);
        host = endpoint.host;
        port = endpoint.port;
    } catch (const evgw::ClientError& e) {
        std::cerr << "sensor-sim: " << e.what() << '\n';
        return 1;
    }

    raise_fd_limit();
    asio::io_context io;
    boost::system::error_code ec;
    tcp::resolver resolver(io);
    const auto targets = resolver.resolve(host, std::to_string(port), ec);
    if (ec) {
        std::cerr << "sensor-sim: cannot resolve " << host << ": " << ec.message() << '\n';
        return 1;
    }

    // Connect everyone first so the replay is not skewed by connection setup.
    std::vector<std::unique_ptr<Node>> fleet;
    fleet.reserve(nodes);
    std::atomic<unsigned> failed{0};
    for (unsigned i = 0; i < nodes; ++i) {
        fleet.push_back(std::make_unique<Node>(Node{tcp::socket(io)}));
        asio::async_connect(fleet.back()->socket, targets,
                            [&, node = fleet.back().get()](boost::system::error_code e, const tcp::endpoint&) {
                                if (e) {
                                    node->error = e.message();
                                    ++failed;
                                } else {
                                    node->socket.set_option(tcp::no_delay(true), e);
                                }
                            });
    }
    io.run_for(std::chrono::milliseconds(connect_timeout_ms));
    if (!io.stopped()) {
        std::cerr << "sensor-sim: connecting timed out\n";
        return 1;
    }
    if (failed > 0) {
        std::cerr << "sensor-sim: " << failed << " of " << nodes << " nodes could not connect to " << gateway
                  << ": " << std::find_if(fleet.begin(), fleet.end(), [](auto& n) { return !n->error.empty(); })
                                 ->get()
                                 ->error
                  << '\n';
        return 1;
    }

    io.restart();
    const auto schedule = script.schedule();
    const auto start = Clock::now() + std::chrono::milliseconds(20);
    for (auto& node : fleet) asio::co_spawn(io, replay(*node, script, schedule, start), asio::detached);

    const unsigned pool_size = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < pool_size; ++i) pool.emplace_back([&io] { io.run(); });
    io.run();
    for (auto& t : pool) t.join();

    std::size_t total = 0;
    long long jitter_us = 0;
    bool all_sent = true;
    for (const auto& node : fleet) {
        total += node->sent;
        jitter_us = std::max(jitter_us, node->max_jitter_us);
        all_sent = all_sent && node->sent == script.frame_count();
    }
    const std::size_t expected = script.frame_count() * nodes;
    const double jitter_ms = jitter_us / 1000.0;

    if (json) {
        nlohmann::json sent = nlohmann::json::array();
        for (const auto& node : fleet) sent.push_back(node->sent);
        std::cout << nlohmann::json{{"nodes", nodes},
                                    {"sent", total},
                                    {"expected", expected},
                                    {"per_node", sent},
                                    {"max_jitter_ms", jitter_ms}}
                         .dump()
                  << '\n';
    } else {
        if (!quiet) {
            for (std::size_t i = 0; i < fleet.size(); ++i) {
                std::cout << "node " << i << ": sent " << fleet[i]->sent << '/' << script.frame_count();
                if (!fleet[i]->error.empty()) std::cout << " (" << fleet[i]->error << ')';
                std::cout << '\n';
            }
        }
        std::cout << "total: sent " << total << '/' << expected << ", max jitter " << jitter_ms << " ms\n";
    }
    for (const auto& node : fleet) {
        if (!node->error.empty()) {
            std::cerr << "sensor-sim: " << node->error << '\n';
            break;
        }
    }
    return all_sent ? 0 : 1;
}
