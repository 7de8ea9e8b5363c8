#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "evgw/model.hpp"

namespace evgw::testkit {

/// Scripted replies. Defaults reproduce a SIM800 that accepts everything.
struct MockModemScript {
    std::string cmgf_reply = "OK";
    bool send_prompt = true;       // false: stay silent after AT+CMGS
    std::string cmgs_reply;        // non-empty: reply this instead of the "> " prompt
    std::string body_reply = "OK"; // "OK" sends +CMGS: <n> then OK; anything else is sent as-is
    std::string atd_reply = "OK";
    std::string ring_event;        // sent right after ATD's OK, e.g. "BUSY"
    std::string ath_reply = "OK";
    bool close_on_command = false; // drop the connection on the first command
};

struct ModemSms {
    std::string phone;
    std::string text;
    SteadyClock::time_point at;
};

struct ModemCall {
    std::string phone;
    SteadyClock::time_point at;
};

/// GSM modem double listening on a local stream socket. Records every byte in
/// both directions and the SMS/calls it accepted.
class MockModem {
public:
    explicit MockModem(std::filesystem::path socket_path, MockModemScript script = {});
    ~MockModem();

    MockModem(const MockModem&) = delete;
    MockModem& operator=(const MockModem&) = delete;

    void start();
    void stop();

    /// Endpoint string for ModemConfig / open_modem_link.
    std::string endpoint() const;
    void set_script(MockModemScript script);

    std::vector<ModemSms> messages() const;
    std::vector<ModemCall> calls() const;
    /// Everything the host wrote, concatenated.
    std::string host_bytes() const;
    /// Everything the modem wrote, concatenated.
    std::string modem_bytes() const;
    /// Commands in arrival order ("AT+CMGF=1", "AT+CMGS=...", "<body>", "ATD...", "ATH").
    std::vector<std::string> commands() const;
    std::size_t connections() const;

    bool wait_for_messages(std::size_t count, std::chrono::milliseconds timeout) const;
    bool wait_for_calls(std::size_t count, std::chrono::milliseconds timeout) const;
    void clear();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace evgw::testkit
