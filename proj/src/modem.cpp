#include "evgw/modem.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <termios.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>

namespace evgw {

namespace {

using Clock = std::chrono::steady_clock;

class FdModemLink final : public ModemLink {
public:
    explicit FdModemLink(int fd) : fd_(fd) {}
    ~FdModemLink() override { ::close(fd_); }

    bool write(std::string_view bytes) override {
        while (!bytes.empty()) {
            const ssize_t n = send_or_write(fd_, bytes);
            if (n < 0) {
                if (errno == EINTR) continue;
                if (errno == EAGAIN || errno == EWOULDBLOCK) {
                    pollfd p{fd_, POLLOUT, 0};
                    ::poll(&p, 1, 1000);
                    continue;
                }
                return false;
            }
            bytes.remove_prefix(static_cast<std::size_t>(n));
        }
        return true;
    }

    ReadStatus read_some(std::string& out, Clock::time_point deadline) override {
        for (;;) {
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            pollfd p{fd_, POLLIN, 0};
            const int ready = ::poll(&p, 1, remaining > 0 ? static_cast<int>(remaining) : 0);
            if (ready < 0) {
                if (errno == EINTR) continue;
                return ReadStatus::Closed;
            }
            if (ready == 0) return ReadStatus::Timeout;
            char chunk[512];
            const ssize_t n = ::read(fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                return ReadStatus::Closed;
            }
            if (n == 0) return ReadStatus::Closed;
            out.append(chunk, static_cast<std::size_t>(n));
            return ReadStatus::Data;
        }
    }

private:
    static ssize_t send_or_write(int fd, std::string_view bytes) {
        // MSG_NOSIGNAL on sockets; plain write for tty devices.
        const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == ENOTSOCK) return ::write(fd, bytes.data(), bytes.size());
        return n;
    }

    int fd_;
};

int connect_unix(const std::string& path) {
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (path.size() >= sizeof addr.sun_path) return -1;
    std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) return -1;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(fd);
        return -1;
    }
    return fd;
}

int connect_tcp(const std::string& host_port) {
    const auto colon = host_port.rfind(':');
    if (colon == std::string::npos) return -1;
    const auto host = host_port.substr(0, colon);
    const auto port = host_port.substr(colon + 1);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0) return -1;
    int fd = -1;
    for (auto* ai = found; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(found);
    return fd;
}

speed_t baud_constant(int baud) {
    switch (baud) {
        case 9600: return B9600;
        case 19200: return B19200;
        case 38400: return B38400;
        case 57600: return B57600;
        case 230400: return B230400;
        default: return B115200;
    }
}

int open_serial(const std::string& device, int baud) {
    const int fd = ::open(device.c_str(), O_RDWR | O_NOCTTY | O_CLOEXEC);
    if (fd < 0) return -1;
    termios tio{};
    if (::tcgetattr(fd, &tio) == 0) {
        ::cfmakeraw(&tio);
        tio.c_cflag |= CLOCAL | CREAD;
        tio.c_cflag &= ~(CSTOPB | PARENB | CRTSCTS);
        ::cfsetispeed(&tio, baud_constant(baud));
        ::cfsetospeed(&tio, baud_constant(baud));
        ::tcsetattr(fd, TCSANOW, &tio);
    }
    return fd;
}

std::string_view trim(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == '\r' || line.front() == ' ')) line.remove_prefix(1);
    return line;
}

bool starts_with(std::string_view text, std::string_view prefix) {
    return text.substr(0, prefix.size()) == prefix;
}

enum class Reply { Ok, Error, Busy, NoCarrier, NoAnswer, Timeout, Io };

struct LineClass {
    bool terminal = false;
    Reply reply = Reply::Ok;
};

LineClass classify(std::string_view line) {
    if (line == "OK") return {true, Reply::Ok};
    if (line == "ERROR" || starts_with(line, "+CMS ERROR") || starts_with(line, "+CME ERROR")) {
        return {true, Reply::Error};
    }
    if (line == "BUSY") return {true, Reply::Busy};
    if (line == "NO CARRIER" || line == "NO DIALTONE") return {true, Reply::NoCarrier};
    if (line == "NO ANSWER") return {true, Reply::NoAnswer};
    return {};
}

}  // namespace

std::string to_string(const Outcome& outcome) {
    switch (outcome.kind) {
        case Outcome::Kind::Delivered: return "delivered";
        case Outcome::Kind::Pending: return "pending";
        case Outcome::Kind::Failed: return "failed(" + outcome.reason + ")";
        case Outcome::Kind::Skipped: return "skipped(" + outcome.reason + ")";
    }
    return "pending";
}

std::unique_ptr<ModemLink> open_modem_link(const std::string& endpoint, int baud) {
    int fd = -1;
    if (starts_with(endpoint, "unix:")) {
        fd = connect_unix(endpoint.substr(5));
    } else if (starts_with(endpoint, "tcp:")) {
        fd = connect_tcp(endpoint.substr(4));
    } else if (!endpoint.empty()) {
        fd = open_serial(endpoint, baud);
    }
    if (fd < 0) return nullptr;
    return std::make_unique<FdModemLink>(fd);
}

AtModem::AtModem(Connector connector, std::chrono::milliseconds step_timeout)
    : connector_(std::move(connector)), step_timeout_(step_timeout) {}

bool AtModem::ensure_link() {
    if (!link_) {
        link_ = connector_ ? connector_() : nullptr;
        buffer_.clear();
    }
    return link_ != nullptr;
}

void AtModem::drop_link() {
    link_.reset();
    buffer_.clear();
}

// Discards stale input. A link the peer closed since the last dialogue is
// replaced once, so a modem restart costs no failed delivery.
bool AtModem::drain() {
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (!ensure_link()) return false;
        buffer_.clear();
        std::string discard;
        ModemLink::ReadStatus status;
        while ((status = link_->read_some(discard, Clock::now())) == ModemLink::ReadStatus::Data) discard.clear();
        if (status != ModemLink::ReadStatus::Closed) return true;
        drop_link();
    }
    return false;
}

// Sends one command and waits for the reply the step expects. Unsolicited
// lines (RING, +CREG, echoes) are skipped.
Outcome AtModem::exchange(std::string_view command, Expect expect, std::string_view step) {
    auto failure = [&](Reply reply) {
        switch (reply) {
            case Reply::Timeout: return Outcome::failed("timeout@" + std::string(step));
            case Reply::Io: drop_link(); return Outcome::failed("io");
            case Reply::Busy: return Outcome::failed("busy");
            case Reply::NoCarrier: return Outcome::failed("no_carrier");
            case Reply::NoAnswer: return Outcome::failed("no_answer");
            default: return Outcome::failed(std::string(step));
        }
    };

    if (!link_->write(command)) return failure(Reply::Io);

    const auto echo = trim(command);
    const auto deadline = Clock::now() + step_timeout_;
    bool saw_cmgs = false;
    for (;;) {
        for (auto newline = buffer_.find('\n'); newline != std::string::npos;
             newline = buffer_.find('\n')) {
            const std::string line(trim(std::string_view(buffer_).substr(0, newline)));
            buffer_.erase(0, newline + 1);
            if (line.empty() || line == echo) continue;
            if (starts_with(line, "+CMGS:")) {
                saw_cmgs = true;
                continue;
            }
            const auto cls = classify(line);
            if (!cls.terminal) continue;
            if (cls.reply != Reply::Ok) return failure(cls.reply);
            if (expect == Expect::Ok || (expect == Expect::CmgsThenOk && saw_cmgs)) {
                return Outcome::delivered();
            }
            return failure(Reply::Error);
        }
        if (expect == Expect::Prompt) {
            if (auto prompt = buffer_.find("> "); prompt != std::string::npos) {
                buffer_.erase(0, prompt + 2);
                return Outcome::delivered();
            }
        }
        switch (link_->read_some(buffer_, deadline)) {
            case ModemLink::ReadStatus::Data: break;
            case ModemLink::ReadStatus::Timeout: return failure(Reply::Timeout);
            case ModemLink::ReadStatus::Closed: return failure(Reply::Io);
        }
    }
}

Outcome AtModem::send_sms(std::string_view phone, std::string_view text) {
    if (!drain()) return Outcome::failed("io");

    auto outcome = exchange("AT+CMGF=1\r", Expect::Ok, "cmgf");
    if (!outcome.ok()) return outcome;

    outcome = exchange("AT+CMGS=\"" + std::string(phone) + "\"\r", Expect::Prompt, "cmgs");
    if (!outcome.ok()) {
        // Leave text-entry mode so the next dialogue starts clean.
        if (link_) link_->write("\x1b");
        if (outcome.reason.starts_with("timeout")) drop_link();
        return outcome;
    }

    std::string body(text);
    body.push_back('\x1a');
    outcome = exchange(body, Expect::CmgsThenOk, "body");
    if (outcome.reason.starts_with("timeout")) drop_link();
    return outcome;
}

Outcome AtModem::ring(std::string_view phone, std::chrono::milliseconds ring) {
    if (!drain()) return Outcome::failed("io");

    auto outcome = exchange("ATD" + std::string(phone) + ";\r", Expect::Ok, "atd");
    if (!outcome.ok()) {
        if (outcome.reason == "atd") return Outcome::failed("error");
        if (outcome.reason.starts_with("timeout")) drop_link();
        return outcome;
    }

    // Ringing. The callee may reject or the network may drop the call.
    std::optional<Outcome> early;
    const auto hold_until = Clock::now() + ring;
    while (!early) {
        for (auto newline = buffer_.find('\n'); newline != std::string::npos && !early;
             newline = buffer_.find('\n')) {
            const auto line = std::string(trim(std::string_view(buffer_).substr(0, newline)));
            buffer_.erase(0, newline + 1);
            const auto cls = classify(line);
            if (!cls.terminal || cls.reply == Reply::Ok) continue;
            switch (cls.reply) {
                case Reply::Busy: early = Outcome::failed("busy"); break;
                case Reply::NoAnswer: early = Outcome::failed("no_answer"); break;
                case Reply::NoCarrier: early = Outcome::failed("no_carrier"); break;
                default: early = Outcome::failed("error"); break;
            }
        }
        if (early || Clock::now() >= hold_until) break;
        const auto status = link_->read_some(buffer_, hold_until);
        if (status == ModemLink::ReadStatus::Timeout) break;
        if (status == ModemLink::ReadStatus::Closed) {
            drop_link();
            return Outcome::failed("io");
        }
    }

    auto hangup = exchange("ATH\r", Expect::Ok, "ath");
    if (early) return *early;
    if (!hangup.ok() && hangup.reason == "ath") return Outcome::failed("error");
    if (hangup.reason.starts_with("timeout")) drop_link();
    return hangup;
}

ModemLane::ModemLane(std::unique_ptr<AtModem> modem)
    : modem_(std::move(modem)), worker_([this] { run(); }) {}

ModemLane::~ModemLane() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    ready_.notify_all();
    worker_.join();
}

std::future<Outcome> ModemLane::submit(std::function<Outcome(AtModem&)> job) {
    std::packaged_task<Outcome(AtModem&)> task(std::move(job));
    auto future = task.get_future();
    {
        std::lock_guard lock(mutex_);
        if (stopping_) {
            std::promise<Outcome> cancelled;
            cancelled.set_value(Outcome::failed("shutdown"));
            return cancelled.get_future();
        }
        jobs_.push_back(std::move(task));
    }
    ready_.notify_one();
    return future;
}

void ModemLane::run() {
    for (;;) {
        std::packaged_task<Outcome(AtModem&)> task;
        {
            std::unique_lock lock(mutex_);
            ready_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
            if (jobs_.empty()) return;
            task = std::move(jobs_.front());
            jobs_.pop_front();
        }
        task(*modem_);
    }
}

}  // namespace evgw
