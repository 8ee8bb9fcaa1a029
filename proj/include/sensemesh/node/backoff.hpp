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

#include <algorithm>
#include <cstdint>
#include <random>

namespace sensemesh::node {

/// Reconnect/retry pacing: exponential from 250 ms to an 8 s cap, each delay
/// jittered by ±20% so a fleet of retrying peers does not thunder in lockstep.
/// Retries are unbounded; giving up is the caller's decision.
class Backoff {
public:
    static constexpr std::int64_t kBaseMs = 250;
    static constexpr std::int64_t kCapMs = 8000;

    explicit Backoff(std::uint64_t seed = std::random_device{}()) : rng_(seed) {}

    /// Delay to wait before the next attempt; grows until reset.
    std::int64_t next_delay_ms() {
        const std::int64_t nominal = std::min<std::int64_t>(kCapMs, kBaseMs << std::min(attempt_, 10));
        ++attempt_;
        const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double jitter = 0.8 + 0.4 * unit; // ±20%
        return static_cast<std::int64_t>(static_cast<double>(nominal) * jitter);
    }

    void reset() { attempt_ = 0; }
    int attempts() const { return attempt_; }

private:
    int attempt_ = 0;
    std::mt19937_64 rng_;
};

} // namespace sensemesh::node
