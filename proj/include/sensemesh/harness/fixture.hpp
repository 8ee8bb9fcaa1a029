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
#pragma once

#include "sensemesh/core/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sensemesh::harness {

/// Number of virtual sensors every benchmark client carries.
inline constexpr int kClientSensorCount = 13;

struct FixtureOptions {
    std::int64_t sampling_interval_ms = 1000;
    std::int64_t history_size = 120;
    std::uint64_t tick_limit = 0; // 0 = sample for the whole run
};

/// The standard desk-scale client: a microphone level meter (synthetic audio
/// frames reduced to dB), three 3-axis motion sensors, and a bed of slow
/// scalar channels (walks, sines, constants). Sources are seeded from
/// (seed, client_index, slot) so two clients built with the same arguments
/// produce bit-identical streams.
std::vector<core::VirtualSensorConfig> client_fixture(int client_index, std::uint64_t seed,
                                                      const FixtureOptions& opt = {});

/// Name of the sensor that benchmark stream `slot` targets (slots wrap around
/// the fixture: slot % 13).
const std::string& stream_target(int slot);

/// All fixture sensor names in slot order.
const std::vector<std::string>& fixture_sensor_names();

} // namespace sensemesh::harness
