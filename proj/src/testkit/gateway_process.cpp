#include "evgw/testkit/gateway_process.hpp"

#include <signal.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "evgw/password.hpp"

namespace evgw::testkit {

TempDir::TempDir(const std::string& prefix) {
    std::string pattern = (std::filesystem::temp_directory_path() / (prefix + "-XXXXXX")).string();
    std::vector<char> buffer(pattern.begin(), pattern.end());
    buffer.push_back('\0');
    if (!::mkdtemp(buffer.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buffer.data();
}

TempDir::~TempDir() {
    std::error_code ignored;
    std::filesystem::remove_all(path_, ignored);
}

GatewayProcess::GatewayProcess(const std::filesystem::path& gatewayd, const GatewayConfig& config,
                               const std::filesystem::path& config_path,
                               std::chrono::milliseconds startup_timeout) {
    {
        std::ofstream out(config_path);
        out << to_json(config).dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write " + config_path.string());
    }
    child_ = std::make_unique<ChildProcess>(std::vector<std::string>{
        gatewayd.string(), "--config", config_path.string(), "--print-ports", "--log-level", "warn"});
    const auto line = child_->read_line(startup_timeout);
    if (!line) {
        child_->signal(SIGKILL);
        throw std::runtime_error("gatewayd did not report its ports (exit " + std::to_string(child_->wait()) + ")");
    }
    const auto doc = Json::parse(*line, nullptr, false);
    if (!doc.is_object()) throw std::runtime_error("gatewayd printed an unexpected line: " + *line);
    ports_.sensor = doc.value("sensor", 0);
    ports_.client = doc.value("client", 0);
    ports_.tls = doc.value("tls", 0);
    ports_.websocket = doc.value("websocket", 0);
    ports_.local = doc.value("local", "");
}

ClientEndpoint GatewayProcess::client_endpoint() const {
    ClientEndpoint endpoint;
    endpoint.port = ports_.client;
    return endpoint;
}

int GatewayProcess::stop() {
    child_->signal(SIGTERM);
    return child_->wait();
}

void GatewayProcess::kill() {
    child_->signal(SIGKILL);
    child_->wait();
}

std::filesystem::path self_directory() {
    return std::filesystem::read_symlink("/proc/self/exe").parent_path();
}

GatewayConfig loopback_config(int kdf_iterations) {
    GatewayConfig config;
    config.kdf_iterations = kdf_iterations;
    config.io_threads = 2;
    config.sensor.listener = {true, "127.0.0.1", 0};
    config.client.tcp = {true, "127.0.0.1", 0};
    config.client.websocket = {false, "127.0.0.1", 0};
    config.client.tls.enabled = false;
    config.client.tls.bind = "127.0.0.1";
    config.client.tls.port = 0;
    config.accounts = {
        Account{Role::Admin, kAdminAccount, make_password_digest(kAdminPassword, kdf_iterations)},
        Account{Role::Subscriber, kSubscriberAccount, make_password_digest(kSubscriberPassword, kdf_iterations)},
    };
    return config;
}

}  // namespace evgw::testkit
