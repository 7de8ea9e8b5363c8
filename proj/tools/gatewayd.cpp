// Gateway daemon: loads the config and snapshot, serves sensors and clients
// until SIGINT/SIGTERM.

#include <sys/resource.h>

#include <csignal>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "evgw/config.hpp"
#include "evgw/gateway.hpp"
#include "evgw/password.hpp"

namespace {

int hash_password(int iterations) {
    std::string password;
    std::getline(std::cin, password);
    std::cout << evgw::make_password_digest(password, iterations) << '\n';
    return 0;
}

// Every sensor node holds a socket open; the default soft limit is too low.
void raise_fd_limit() {
    rlimit limit{};
    if (::getrlimit(RLIMIT_NOFILE, &limit) == 0 && limit.rlim_cur < limit.rlim_max) {
        limit.rlim_cur = limit.rlim_max;
        ::setrlimit(RLIMIT_NOFILE, &limit);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IoT event gateway daemon"};
    std::string config_path;
    std::string log_level = "info";
    bool print_ports = false;
    bool hash = false;
    int iterations = evgw::kDefaultKdfIterations;

    app.add_option("-c,--config", config_path, "Gateway config file (JSON)");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
    app.add_flag("--print-ports", print_ports, "Print bound ports as one JSON line on stdout once listening");
    app.add_flag("--hash-password", hash, "Read a password from stdin and print its digest");
    app.add_option("--iterations", iterations, "PBKDF2 iterations for --hash-password")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    spdlog::set_default_logger(spdlog::stderr_color_mt("gatewayd"));
    spdlog::set_level(spdlog::level::from_str(log_level));

    if (hash) return hash_password(iterations);
    if (config_path.empty()) {
        std::cerr << "gatewayd: --config is required\n";
        return 2;
    }

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    // Block before any thread starts so only sigwait sees them.
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);
    raise_fd_limit();

    try {
        evgw::Gateway gateway(evgw::load_config(config_path));
        gateway.start();
        spdlog::info("listening: sensors {}, clients {}", gateway.sensor_port(), gateway.client_port());
        if (print_ports) {
            std::cout << evgw::Json{{"sensor", gateway.sensor_port()},
                                    {"client", gateway.client_port()},
                                    {"tls", gateway.tls_port()},
                                    {"websocket", gateway.websocket_port()},
                                    {"local", gateway.local_path()}}
                             .dump()
                      << std::endl;
        }

        int received = 0;
        sigwait(&signals, &received);
        spdlog::info("signal {} received, shutting down", received);
        gateway.stop();
    } catch (const evgw::ConfigError& e) {
        std::cerr << "gatewayd: config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "gatewayd: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
