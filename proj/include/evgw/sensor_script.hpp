#pragma once

#include <chrono>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "evgw/model.hpp"

namespace evgw {

class ScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScriptStep {
    std::chrono::milliseconds delay{0};  // since the previous step
    ChannelId channel;
    double value = 0.0;

    bool operator==(const ScriptStep&) const = default;
};

/// What one simulated sensor node sends. File form is either a JSON array of
/// `{"delay_ms", "channel", "value"}` objects or `{"repeat": n, "steps": [...]}`.
struct SensorScript {
    std::vector<ScriptStep> steps;
    unsigned repeat = 1;

    std::size_t frame_count() const noexcept { return steps.size() * repeat; }
    /// Offsets from the start of the replay, one per frame, repeats unrolled.
    std::vector<std::chrono::milliseconds> schedule() const;
    const ScriptStep& frame(std::size_t index) const { return steps[index % steps.size()]; }
};

SensorScript parse_script(std::string_view text);

enum class Waveform { Ramp, Square };

/// Ramp: `steps` values evenly spaced from low to high inclusive.
/// Square: alternates low, high, low, ...
SensorScript generate_script(Waveform shape, ChannelId channel, double low, double high,
                             unsigned steps, std::chrono::milliseconds period);

}  // namespace evgw
