#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

namespace evgw {

/// Result of one delivery attempt. `reason` is empty unless failed/skipped.
struct Outcome {
    enum class Kind { Delivered, Failed, Pending, Skipped };

    Kind kind = Kind::Pending;
    std::string reason;

    static Outcome delivered() { return {Kind::Delivered, {}}; }
    static Outcome failed(std::string reason) { return {Kind::Failed, std::move(reason)}; }
    static Outcome skipped(std::string reason) { return {Kind::Skipped, std::move(reason)}; }

    bool ok() const noexcept { return kind == Kind::Delivered; }
    bool operator==(const Outcome&) const = default;
};

std::string to_string(const Outcome& outcome);

/// Byte stream to a GSM modem.
class ModemLink {
public:
    enum class ReadStatus { Data, Timeout, Closed };

    virtual ~ModemLink() = default;
    virtual bool write(std::string_view bytes) = 0;
    /// Appends whatever arrives before the deadline.
    virtual ReadStatus read_some(std::string& out, std::chrono::steady_clock::time_point deadline) = 0;
};

/// Opens "unix:<path>", "tcp:<host>:<port>", or a serial device path (raw
/// 8N1 at `baud`). Returns nullptr if the endpoint cannot be opened.
std::unique_ptr<ModemLink> open_modem_link(const std::string& endpoint, int baud = 115200);

/// SIM800-style AT dialogues: text-mode SMS and ring-only voice calls.
/// Commands end in CR; replies are CR/LF framed. Not thread-safe; see ModemLane.
class AtModem {
public:
    using Connector = std::function<std::unique_ptr<ModemLink>()>;

    AtModem(Connector connector, std::chrono::milliseconds step_timeout);

    /// AT+CMGF=1 -> OK; AT+CMGS="<phone>" -> "> "; body + Ctrl-Z -> +CMGS: <n>, OK.
    /// Failure reasons: the step name ("cmgf", "cmgs", "body") on an error
    /// reply, "timeout@<step>" on a timeout, "io" if the link is lost.
    Outcome send_sms(std::string_view phone, std::string_view text);

    /// ATD<phone>; -> OK; hold for `ring`; ATH -> OK. Failure reasons: "busy",
    /// "no_carrier", "no_answer", "error", "timeout@<step>", "io".
    Outcome ring(std::string_view phone, std::chrono::milliseconds ring);

private:
    enum class Expect { Ok, Prompt, CmgsThenOk };

    bool ensure_link();
    void drop_link();
    bool drain();
    Outcome exchange(std::string_view command, Expect expect, std::string_view step);

    Connector connector_;
    std::chrono::milliseconds step_timeout_;
    std::unique_ptr<ModemLink> link_;
    std::string buffer_;
};

/// Single-lane FIFO in front of one modem: at most one dialogue on the wire.
class ModemLane {
public:
    explicit ModemLane(std::unique_ptr<AtModem> modem);
    ~ModemLane();

    ModemLane(const ModemLane&) = delete;
    ModemLane& operator=(const ModemLane&) = delete;

    std::future<Outcome> submit(std::function<Outcome(AtModem&)> job);

private:
    void run();

    std::unique_ptr<AtModem> modem_;
    std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<std::packaged_task<Outcome(AtModem&)>> jobs_;
    bool stopping_ = false;
    std::thread worker_;
};

}  // namespace evgw
