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

#include <chrono>
#include <cstdint>

namespace sensemesh::node {

/// Epoch-anchored steady clock: wall-clock epoch captured once, then advanced
/// by the steady clock. Timestamps are comparable across processes on one
/// host (same wall clock) yet never jump backwards within a process.
class EpochSteadyClock {
public:
    EpochSteadyClock()
        : epoch0_ms_(std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count()),
          start_(std::chrono::steady_clock::now()) {}

    std::int64_t now_ms() const {
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - start_)
                                 .count();
        return epoch0_ms_ + elapsed;
    }

    /// Steady time point corresponding to an epoch-ms instant, for sleeping
    /// until nominal tick times.
    std::chrono::steady_clock::time_point steady_for(std::int64_t epoch_ms) const {
        return start_ + std::chrono::milliseconds(epoch_ms - epoch0_ms_);
    }

private:
    std::int64_t epoch0_ms_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace sensemesh::node
