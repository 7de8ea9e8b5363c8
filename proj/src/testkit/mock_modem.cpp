#include "evgw/testkit/mock_modem.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace evgw::testkit {

namespace {

constexpr char kCtrlZ = '\x1a';
constexpr char kEsc = '\x1b';

}  // namespace

struct MockModem::Impl {
    std::filesystem::path path;
    int listen_fd = -1;
    int wake[2] = {-1, -1};
    std::thread thread;

    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    MockModemScript script;
    std::vector<ModemSms> messages;
    std::vector<ModemCall> calls;
    std::vector<std::string> commands;
    std::string host_bytes;
    std::string modem_bytes;
    std::size_t connections = 0;
    int next_reference = 1;

    // Per-connection parser state; touched only by the server thread.
    std::string pending;
    bool body_mode = false;
    std::string body_phone;

    void send(int fd, const std::string& bytes) {
        {
            std::lock_guard lock(mutex);
            modem_bytes += bytes;
        }
        std::size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n <= 0) return;
            off += static_cast<std::size_t>(n);
        }
    }

    void reply(int fd, const std::string& line) { send(fd, "\r\n" + line + "\r\n"); }

    // Returns false to drop the connection.
    bool on_command(int fd, const std::string& command) {
        MockModemScript s;
        {
            std::lock_guard lock(mutex);
            commands.push_back(command);
            s = script;
        }
        if (s.close_on_command) return false;

        if (command == "AT") {
            reply(fd, "OK");
        } else if (command == "AT+CMGF=1") {
            reply(fd, s.cmgf_reply);
        } else if (command.rfind("AT+CMGS=\"", 0) == 0 && command.size() > 10 && command.back() == '"') {
            body_phone = command.substr(9, command.size() - 10);
            if (!s.cmgs_reply.empty()) {
                reply(fd, s.cmgs_reply);
            } else if (s.send_prompt) {
                send(fd, "\r\n> ");
                body_mode = true;
            }
        } else if (command.rfind("ATD", 0) == 0 && command.size() > 4 && command.back() == ';') {
            reply(fd, s.atd_reply);
            if (s.atd_reply == "OK") {
                {
                    std::lock_guard lock(mutex);
                    calls.push_back(ModemCall{command.substr(3, command.size() - 4), SteadyClock::now()});
                }
                changed.notify_all();
                if (!s.ring_event.empty()) reply(fd, s.ring_event);
            }
        } else if (command == "ATH") {
            reply(fd, s.ath_reply);
        } else {
            reply(fd, "ERROR");
        }
        return true;
    }

    void on_body(int fd, const std::string& text) {
        MockModemScript s;
        int reference = 0;
        {
            std::lock_guard lock(mutex);
            commands.push_back(text);
            s = script;
            if (s.body_reply == "OK") {
                messages.push_back(ModemSms{body_phone, text, SteadyClock::now()});
                reference = next_reference++;
            }
        }
        changed.notify_all();
        if (s.body_reply == "OK") {
            send(fd, "\r\n+CMGS: " + std::to_string(reference) + "\r\n\r\nOK\r\n");
        } else {
            reply(fd, s.body_reply);
        }
    }

    bool consume(int fd, const char* data, std::size_t size) {
        {
            std::lock_guard lock(mutex);
            host_bytes.append(data, size);
        }
        for (std::size_t i = 0; i < size; ++i) {
            const char c = data[i];
            if (body_mode) {
                if (c == kCtrlZ) {
                    body_mode = false;
                    on_body(fd, pending);
                    pending.clear();
                } else if (c == kEsc) {
                    body_mode = false;
                    pending.clear();
                } else {
                    pending.push_back(c);
                }
                continue;
            }
            if (c == '\r') {
                std::string command;
                command.swap(pending);
                if (!command.empty() && !on_command(fd, command)) return false;
            } else if (c != '\n' && c != kEsc) {
                pending.push_back(c);
            }
        }
        return true;
    }

    void serve() {
        int client = -1;
        for (;;) {
            pollfd fds[3] = {{wake[0], POLLIN, 0}, {listen_fd, POLLIN, 0}, {client, POLLIN, 0}};
            const int count = client >= 0 ? 3 : 2;
            if (::poll(fds, count, -1) < 0) continue;
            if (fds[0].revents) break;
            if (fds[1].revents & POLLIN) {
                const int fd = ::accept4(listen_fd, nullptr, nullptr, SOCK_CLOEXEC);
                if (fd >= 0) {
                    // A single serial line: a new opener replaces the old one.
                    if (client >= 0) ::close(client);
                    client = fd;
                    pending.clear();
                    body_mode = false;
                    std::lock_guard lock(mutex);
                    ++connections;
                }
                continue;
            }
            if (count == 3 && fds[2].revents) {
                char buffer[1024];
                const ssize_t n = ::read(client, buffer, sizeof buffer);
                if (n <= 0 || !consume(client, buffer, static_cast<std::size_t>(n))) {
                    ::close(client);
                    client = -1;
                }
            }
        }
        if (client >= 0) ::close(client);
    }
};

MockModem::MockModem(std::filesystem::path socket_path, MockModemScript script)
    : impl_(std::make_unique<Impl>()) {
    impl_->path = std::move(socket_path);
    impl_->script = std::move(script);
}

MockModem::~MockModem() { stop(); }

void MockModem::start() {
    if (impl_->thread.joinable()) return;
    std::error_code ignored;
    std::filesystem::remove(impl_->path, ignored);

    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    const auto path = impl_->path.string();
    if (path.size() >= sizeof addr.sun_path) throw std::runtime_error("modem socket path too long");
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);

    impl_->listen_fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (impl_->listen_fd < 0 || ::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(impl_->listen_fd, 8) != 0) {
        throw std::runtime_error("mock modem cannot listen on " + path);
    }
    if (::pipe2(impl_->wake, O_CLOEXEC) != 0) throw std::runtime_error("pipe2 failed");
    impl_->thread = std::thread([impl = impl_.get()] { impl->serve(); });
}

void MockModem::stop() {
    if (!impl_->thread.joinable()) return;
    const char byte = 1;
    [[maybe_unused]] auto n = ::write(impl_->wake[1], &byte, 1);
    impl_->thread.join();
    ::close(impl_->listen_fd);
    ::close(impl_->wake[0]);
    ::close(impl_->wake[1]);
    impl_->listen_fd = -1;
    std::error_code ignored;
    std::filesystem::remove(impl_->path, ignored);
}

std::string MockModem::endpoint() const { return "unix:" + impl_->path.string(); }

void MockModem::set_script(MockModemScript script) {
    std::lock_guard lock(impl_->mutex);
    impl_->script = std::move(script);
}

std::vector<ModemSms> MockModem::messages() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->messages;
}

std::vector<ModemCall> MockModem::calls() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->calls;
}

std::string MockModem::host_bytes() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->host_bytes;
}

std::string MockModem::modem_bytes() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->modem_bytes;
}

std::vector<std::string> MockModem::commands() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->commands;
}

std::size_t MockModem::connections() const {
    std::lock_guard lock(impl_->mutex);
    return impl_->connections;
}

bool MockModem::wait_for_messages(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->mutex);
    return impl_->changed.wait_for(lock, timeout, [&] { return impl_->messages.size() >= count; });
}

bool MockModem::wait_for_calls(std::size_t count, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(impl_->mutex);
    return impl_->changed.wait_for(lock, timeout, [&] { return impl_->calls.size() >= count; });
}

void MockModem::clear() {
    std::lock_guard lock(impl_->mutex);
    impl_->messages.clear();
    impl_->calls.clear();
    impl_->commands.clear();
    impl_->host_bytes.clear();
    impl_->modem_bytes.clear();
}

}  // namespace evgw::testkit
