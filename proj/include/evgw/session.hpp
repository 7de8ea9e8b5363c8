#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "evgw/codec.hpp"
#include "evgw/model.hpp"
#include "evgw/registry.hpp"

namespace evgw {

/// Role/action availability matrix.
bool authorize(Role role, Action action) noexcept;

using MetricsSource = std::function<Json()>;

/// Runs one authorized command against the registry.
Response execute(Registry& registry, Role role, const Command& command,
                 const MetricsSource& metrics = {});

/// Per-connection conversation: establishment, a command sequence, and
/// termination. Transports feed it whole frames and send back what it returns.
class Session {
public:
    enum class Phase { AwaitingInit, Established, Terminated };

    struct Step {
        std::optional<std::string> reply;
        bool close = false;
    };

    explicit Session(Registry& registry, MetricsSource metrics = {});

    Step handle_frame(std::string_view frame);

    /// The transport saw a frame longer than the limit.
    Step handle_oversize_frame();

    Phase phase() const noexcept { return phase_; }
    std::optional<Role> role() const noexcept { return role_; }

private:
    Step reply(const Response& response, bool close);

    Registry& registry_;
    MetricsSource metrics_;
    Phase phase_ = Phase::AwaitingInit;
    std::optional<Role> role_;
};

}  // namespace evgw
