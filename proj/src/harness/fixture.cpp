/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include "sensemesh/harness/fixture.hpp"

namespace sensemesh::harness {

namespace {

const std::vector<std::string> kSensorNames = {
    "mic", "accel", "temp",  "hum", "pressure", "light", "volt",
    "rssi", "co2",  "tilt", "fan", "gyro",     "mag",
};

core::Schema scalar_schema(const std::string& name, const std::string& unit) {
    return {{name, core::FieldKind::numeric, unit}};
}

core::Schema axes_schema(const std::string& unit) {
    return {{"x", core::FieldKind::numeric, unit},
            {"y", core::FieldKind::numeric, unit},
            {"z", core::FieldKind::numeric, unit}};
}

/// Stable per-sensor seed: distinct across (seed, client, slot), identical
/// for identically-configured twins.
double sensor_seed(std::uint64_t seed, int client_index, int slot) {
    return static_cast<double>(seed * 1000003ULL +
                               static_cast<std::uint64_t>(client_index) * 131ULL +
                               static_cast<std::uint64_t>(slot));
}

} // namespace

std::vector<core::VirtualSensorConfig> client_fixture(int client_index, std::uint64_t seed,
                                                      const FixtureOptions& opt) {
    std::vector<core::VirtualSensorConfig> sensors;
    sensors.reserve(kClientSensorCount);

    auto base = [&](int slot, const char* plugin) {
        core::VirtualSensorConfig cfg;
        cfg.name = kSensorNames[static_cast<size_t>(slot)];
        cfg.source.plugin = plugin;
        cfg.history_size = opt.history_size;
        cfg.sampling_interval_ms = opt.sampling_interval_ms;
        cfg.tick_limit = opt.tick_limit;
        return cfg;
    };
    auto walk = [&](int slot, double step, const std::string& unit) {
        auto cfg = base(slot, "random_walk");
        cfg.source.params["step"] = step;
        cfg.source.params["seed"] = sensor_seed(seed, client_index, slot);
        cfg.output_schema = scalar_schema("value", unit);
        return cfg;
    };
    auto sine = [&](int slot, double amplitude, double freq_hz, const std::string& unit) {
        auto cfg = base(slot, "sine");
        cfg.source.params["amplitude"] = amplitude;
        cfg.source.params["freq_hz"] = freq_hz;
        cfg.output_schema = scalar_schema("value", unit);
        return cfg;
    };
    auto fixed = [&](int slot, double value, const std::string& unit) {
        auto cfg = base(slot, "constant");
        cfg.source.params["value"] = value;
        cfg.output_schema = scalar_schema("value", unit);
        return cfg;
    };
    auto axes = [&](int slot) {
        auto cfg = base(slot, "multi_axis");
        cfg.source.params["seed"] = sensor_seed(seed, client_index, slot);
        cfg.output_schema = axes_schema("au");
        return cfg;
    };

    // 0: microphone — synthetic audio frames reduced to a dB level.
    {
        auto cfg = base(0, "sine_audio");
        cfg.source.params["amplitude"] = 0.5;
        cfg.source.params["freq_hz"] = 440.0;
        core::ProcessorSpec level;
        level.name = "rms_db";
        cfg.processors.push_back(level);
        cfg.output_schema = scalar_schema("level_db", "dB");
        sensors.push_back(std::move(cfg));
    }
    sensors.push_back(axes(1));                        // accel
    sensors.push_back(walk(2, 0.1, "degC"));           // temp
    sensors.push_back(walk(3, 0.2, "pct"));            // hum
    sensors.push_back(walk(4, 0.05, "hPa"));           // pressure
    sensors.push_back(sine(5, 100.0, 0.1, "lux"));     // light
    sensors.push_back(fixed(6, 3.3, "V"));             // volt
    sensors.push_back(walk(7, 1.0, "dBm"));            // rssi
    sensors.push_back(walk(8, 0.5, "ppm"));            // co2
    sensors.push_back(sine(9, 30.0, 0.05, "deg"));     // tilt
    sensors.push_back(fixed(10, 1200.0, "rpm"));       // fan
    sensors.push_back(axes(11));                       // gyro
    sensors.push_back(axes(12));                       // mag
    return sensors;
}

const std::string& stream_target(int slot) {
    return kSensorNames[static_cast<size_t>(slot % kClientSensorCount)];
}

const std::vector<std::string>& fixture_sensor_names() { return kSensorNames; }

} // namespace sensemesh::harness
