#include "evgw/gateway.hpp"

#include <fstream>
#include <optional>
#include <sstream>

#include <boost/asio/executor_work_guard.hpp>
#include <spdlog/spdlog.h>

#include "evgw/session.hpp"
#include "evgw/transport.hpp"

namespace evgw {

namespace {

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

struct Gateway::Impl {
    GatewayConfig config;
    Metrics metrics;
    Registry registry;
    FiringQueue queue;
    Ingest ingest;
    std::unique_ptr<Notifier> notifier;

    asio::io_context io;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    std::vector<std::thread> io_threads;
    std::unique_ptr<Listener> sensor;
    std::unique_ptr<Listener> client_tcp;
    std::unique_ptr<Listener> client_tls;
    std::unique_ptr<Listener> client_ws;
    std::unique_ptr<Listener> client_local;
    bool running = false;

    explicit Impl(GatewayConfig cfg)
        : config(std::move(cfg)),
          registry(config.channels, config.accounts, config.kdf_iterations),
          queue(config.notify.queue_capacity),
          ingest(registry, metrics, &queue) {
        if (!config.snapshot_path.empty()) {
            if (auto bytes = read_file(config.snapshot_path)) {
                auto dropped = registry.adopt_persisted(*bytes);
                if (!dropped) throw ConfigError(config.snapshot_path + ": corrupt snapshot");
                for (const auto& name : *dropped) {
                    spdlog::warn("snapshot subscriptions for unknown event '{}' dropped", name);
                }
            } else {
                spdlog::info("no snapshot at {}, starting empty", config.snapshot_path);
            }
            registry.set_snapshot_path(config.snapshot_path, config.snapshot_fsync);
        }

        std::shared_ptr<PushSender> push;
        if (!config.notify.push.url.empty()) push = std::make_shared<HttpPushSender>(config.notify.push);
        std::shared_ptr<ModemLane> modem;
        if (!config.notify.modem.endpoint.empty()) {
            const auto endpoint = config.notify.modem.endpoint;
            const auto baud = config.notify.modem.baud;
            modem = std::make_shared<ModemLane>(std::make_unique<AtModem>(
                [endpoint, baud] { return open_modem_link(endpoint, baud); }, config.notify.modem.step_timeout));
        }
        notifier = std::make_unique<Notifier>(registry, config.notify, metrics, std::move(push), std::move(modem));
    }

    Json metrics_json() const { return metrics.to_json(); }

    asio::awaitable<void> serve_sensor(std::shared_ptr<FramedStream> stream) {
        metrics.connection_opened();
        struct Closed {
            Metrics& m;
            ~Closed() { m.connection_closed(); }
        } closed{metrics};

        for (;;) {
            auto read = co_await stream->read_frame(config.sensor.read_timeout);
            if (read.status == FrameRead::Status::TooLong) metrics.malformed_frames.fetch_add(1);
            if (read.status != FrameRead::Status::Frame) co_return;
            if (read.payload.empty()) continue;
            auto reading = decode_reading(read.payload);
            if (!reading) {
                metrics.malformed_frames.fetch_add(1);
                spdlog::debug("sensor frame rejected: {}", to_string(reading.error().code));
                co_return;
            }
            ingest.on_reading(*reading);
        }
    }

    asio::awaitable<void> serve_client(std::shared_ptr<FramedStream> stream) {
        Session session(registry, [this] { return metrics_json(); });
        for (;;) {
            const auto timeout = session.phase() == Session::Phase::AwaitingInit ? config.client.init_timeout
                                                                                 : config.client.idle_timeout;
            auto read = co_await stream->read_frame(timeout);
            Session::Step step;
            if (read.status == FrameRead::Status::Frame) {
                step = session.handle_frame(read.payload);
            } else if (read.status == FrameRead::Status::TooLong) {
                step = session.handle_oversize_frame();
            } else {
                co_return;
            }
            if (step.reply && !co_await stream->write_frame(*step.reply)) co_return;
            if (step.close) co_return;
        }
    }

    std::unique_ptr<Listener> listen(Endpoint endpoint, bool sensor_side) {
        ConnectionHandler handler = sensor_side
            ? ConnectionHandler([this](std::shared_ptr<FramedStream> s) { return serve_sensor(std::move(s)); })
            : ConnectionHandler([this](std::shared_ptr<FramedStream> s) { return serve_client(std::move(s)); });
        return std::make_unique<Listener>(io, std::move(endpoint), std::move(handler));
    }

    void start() {
        if (running) return;
        work.emplace(io.get_executor());

        const auto& s = config.sensor.listener;
        if (s.enabled) sensor = listen(Endpoint{Endpoint::Kind::Tcp, s.bind, s.port, {}, {}}, true);

        const auto& c = config.client;
        if (c.tcp.enabled) client_tcp = listen(Endpoint{Endpoint::Kind::Tcp, c.tcp.bind, c.tcp.port, {}, {}}, false);
        if (c.tls.enabled) {
            auto context = make_server_tls_context(c.tls.cert_file, c.tls.key_file);
            client_tls = listen(Endpoint{Endpoint::Kind::Tls, c.tls.bind, c.tls.port, {}, std::move(context)}, false);
        }
        if (c.websocket.enabled) {
            client_ws = listen(Endpoint{Endpoint::Kind::WebSocket, c.websocket.bind, c.websocket.port, {}, {}}, false);
        }
        if (!c.local_path.empty()) {
            client_local = listen(Endpoint{Endpoint::Kind::Local, {}, 0, c.local_path, {}}, false);
        }

        std::size_t threads = config.io_threads;
        if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
        for (std::size_t i = 0; i < threads; ++i) io_threads.emplace_back([this] { io.run(); });
        if (config.notify.enabled) notifier->start(queue);
        running = true;
    }

    void stop() {
        if (!running) return;
        running = false;
        for (auto* listener : {&sensor, &client_tcp, &client_tls, &client_ws, &client_local}) {
            if (*listener) (*listener)->stop();
        }
        work.reset();
        io.stop();
        for (auto& thread : io_threads) thread.join();
        io_threads.clear();
        queue.close();
        notifier->join();
        if (!config.snapshot_path.empty() && !registry.persist()) {
            spdlog::error("final snapshot write to {} failed", config.snapshot_path);
        }
        if (!config.client.local_path.empty()) {
            std::error_code ignored;
            std::filesystem::remove(config.client.local_path, ignored);
        }
    }
};

Gateway::Gateway(GatewayConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() { impl_->start(); }
void Gateway::stop() { impl_->stop(); }

std::uint16_t Gateway::sensor_port() const { return impl_->sensor ? impl_->sensor->port() : 0; }
std::uint16_t Gateway::client_port() const { return impl_->client_tcp ? impl_->client_tcp->port() : 0; }
std::uint16_t Gateway::tls_port() const { return impl_->client_tls ? impl_->client_tls->port() : 0; }
std::uint16_t Gateway::websocket_port() const { return impl_->client_ws ? impl_->client_ws->port() : 0; }
const std::string& Gateway::local_path() const { return impl_->config.client.local_path; }

Registry& Gateway::registry() { return impl_->registry; }
Metrics& Gateway::metrics() { return impl_->metrics; }
Notifier& Gateway::notifier() { return *impl_->notifier; }
FiringQueue& Gateway::queue() { return impl_->queue; }
const GatewayConfig& Gateway::config() const { return impl_->config; }

}  // namespace evgw
