#include "evgw/sensor_script.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

namespace evgw {

namespace {

using Json = nlohmann::json;

ScriptStep parse_step(const Json& doc, std::size_t index) {
    const std::string where = "steps[" + std::to_string(index) + "]";
    if (!doc.is_object()) throw ScriptError(where + ": expected an object");

    ScriptStep step;
    if (auto it = doc.find("delay_ms"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 0) {
            throw ScriptError(where + ".delay_ms: expected a non-negative integer");
        }
        step.delay = std::chrono::milliseconds(it->get<long long>());
    }
    const auto channel = doc.find("channel");
    if (channel == doc.end() || !channel->is_number_unsigned()) {
        throw ScriptError(where + ".channel: expected an unsigned integer");
    }
    step.channel = ChannelId{channel->get<std::uint32_t>()};
    const auto value = doc.find("value");
    if (value == doc.end() || !value->is_number() || !std::isfinite(value->get<double>())) {
        throw ScriptError(where + ".value: expected a finite number");
    }
    step.value = value->get<double>();
    return step;
}

}  // namespace

std::vector<std::chrono::milliseconds> SensorScript::schedule() const {
    std::vector<std::chrono::milliseconds> out;
    out.reserve(frame_count());
    std::chrono::milliseconds at{0};
    for (unsigned r = 0; r < repeat; ++r) {
        for (const auto& step : steps) {
            at += step.delay;
            out.push_back(at);
        }
    }
    return out;
}

SensorScript parse_script(std::string_view text) {
    const Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ScriptError("script is not valid JSON");

    SensorScript script;
    const Json* steps = &doc;
    if (doc.is_object()) {
        if (auto it = doc.find("repeat"); it != doc.end()) {
            if (!it->is_number_unsigned() || it->get<unsigned>() == 0) {
                throw ScriptError("repeat: expected a positive integer");
            }
            script.repeat = it->get<unsigned>();
        }
        auto it = doc.find("steps");
        if (it == doc.end()) throw ScriptError("steps: missing");
        steps = &*it;
    }
    if (!steps->is_array()) throw ScriptError("steps: expected an array");
    for (std::size_t i = 0; i < steps->size(); ++i) script.steps.push_back(parse_step((*steps)[i], i));
    if (script.steps.empty()) throw ScriptError("steps: empty script");
    return script;
}

SensorScript generate_script(Waveform shape, ChannelId channel, double low, double high,
                             unsigned steps, std::chrono::milliseconds period) {
    if (steps == 0) throw ScriptError("steps must be positive");
    SensorScript script;
    for (unsigned i = 0; i < steps; ++i) {
        double value = low;
        if (shape == Waveform::Ramp) {
            value = steps == 1 ? low : low + (high - low) * i / (steps - 1);
        } else if (i % 2 == 1) {
            value = high;
        }
        script.steps.push_back({i == 0 ? std::chrono::milliseconds(0) : period, channel, value});
    }
    return script;
}

}  // namespace evgw
