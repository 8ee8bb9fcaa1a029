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

#include "sensemesh/core/result.hpp"
#include "sensemesh/harness/event_log.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sensemesh::harness {

namespace code {
inline constexpr const char* kNoCompletions = "NO_COMPLETIONS";
} // namespace code

/// Per-stream aggregate over one run.
struct StreamStat {
    std::int64_t stream = 0;
    std::string sensor;
    std::int64_t completions = 0; // ok requests / delivered elements
    std::int64_t errors = 0;      // non-ok request rows
    std::int64_t points = 0;
    double avg_ms = 0.0;    // duration_ms / completions for this stream
    double share_pct = 0.0; // 100 * points / total points
};

/// Everything derivable from an event log alone. Two headline figures:
/// average time per completed request (run duration over completions) and
/// per-stream delivery shares in percent, whose coefficient of variation
/// scores fairness (0 = perfectly even).
struct Metrics {
    std::string mode;
    std::int64_t streams = 0; // stream universe (run_start marker)
    std::int64_t duration_ms = 0;
    std::int64_t completions = 0;
    std::int64_t errors = 0;
    std::int64_t points = 0;
    double avg_time_per_request_ms = 0.0;
    double points_per_minute = 0.0;
    double share_mean_pct = 0.0;
    double share_cv = 0.0; // stddev/mean over per-stream shares
    std::vector<StreamStat> per_stream; // sorted by stream index
};

/// Folds raw events into Metrics. Deterministic: stream order and summation
/// order depend only on the rows' content, never on timing.
core::Result<Metrics> compute_metrics(const std::vector<EventRow>& rows);

/// Fixed-notation formatting used by every report file: nine fractional
/// digits, no exponent, so equal doubles are equal byte strings.
std::string format_double(double v);

} // namespace sensemesh::harness
