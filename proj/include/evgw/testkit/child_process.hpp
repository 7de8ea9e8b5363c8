#pragma once

#include <sys/types.h>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace evgw::testkit {

/// A spawned executable with its stdout on a pipe. Killed on destruction.
class ChildProcess {
public:
    /// Throws std::runtime_error if the process cannot be spawned.
    explicit ChildProcess(std::vector<std::string> argv);
    ~ChildProcess();

    ChildProcess(ChildProcess&& other) noexcept;
    ChildProcess& operator=(ChildProcess&&) = delete;
    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    pid_t pid() const noexcept { return pid_; }

    /// Next stdout line, or nullopt on EOF/timeout.
    std::optional<std::string> read_line(std::chrono::milliseconds timeout);
    /// Remaining stdout until EOF.
    std::string read_all();

    void signal(int signo);
    /// Exit status (or 128 + signal). Blocks.
    int wait();
    bool running();

    /// Resident set size from /proc/<pid>/status, in KiB.
    std::optional<long> rss_kb() const;

private:
    pid_t pid_ = -1;
    int stdout_fd_ = -1;
    std::string buffer_;
    std::optional<int> status_;
};

/// Runs to completion and captures stdout. Returns the exit status.
int run_process(const std::vector<std::string>& argv, std::string* out = nullptr);

std::optional<long> read_rss_kb(pid_t pid);

}  // namespace evgw::testkit
