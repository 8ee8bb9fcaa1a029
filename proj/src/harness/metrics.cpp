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

#include "sensemesh/harness/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace sensemesh::harness {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9f", v);
    return buf;
}

core::Result<Metrics> compute_metrics(const std::vector<EventRow>& rows) {
    const EventRow* start = nullptr;
    const EventRow* end = nullptr;
    for (const auto& r : rows) {
        if (r.kind == "run_start" && !start) start = &r;
        if (r.kind == "run_end") end = &r;
    }
    if (!start || !end) {
        return core::make_error(code::kBadEventLog, "log lacks run_start/run_end markers");
    }

    Metrics m;
    m.mode = start->status;
    m.streams = start->points;
    m.duration_ms = end->t_ms - start->t_ms;
    if (m.duration_ms <= 0) {
        return core::make_error(code::kBadEventLog, "run_end precedes run_start");
    }

    std::map<std::int64_t, StreamStat> per_stream;
    for (std::int64_t s = 0; s < m.streams; ++s) {
        per_stream[s].stream = s;
    }
    for (const auto& r : rows) {
        if (r.kind != "request" && r.kind != "deliver") continue;
        auto& stat = per_stream[r.stream];
        stat.stream = r.stream;
        if (stat.sensor.empty()) stat.sensor = r.sensor;
        if (r.status == "ok") {
            ++stat.completions;
            stat.points += r.points;
        } else {
            ++stat.errors;
        }
    }

    for (auto& [_, stat] : per_stream) {
        m.completions += stat.completions;
        m.errors += stat.errors;
        m.points += stat.points;
    }
    if (m.completions == 0) {
        return core::make_error(code::kNoCompletions, "no completed request in the log");
    }
    m.avg_time_per_request_ms =
        static_cast<double>(m.duration_ms) / static_cast<double>(m.completions);
    m.points_per_minute =
        static_cast<double>(m.points) * 60000.0 / static_cast<double>(m.duration_ms);

    m.per_stream.reserve(per_stream.size());
    for (auto& [_, stat] : per_stream) {
        stat.avg_ms = stat.completions > 0 ? static_cast<double>(m.duration_ms) /
                                                 static_cast<double>(stat.completions)
                                           : 0.0;
        stat.share_pct = m.points > 0 ? 100.0 * static_cast<double>(stat.points) /
                                            static_cast<double>(m.points)
                                      : 0.0;
        m.per_stream.push_back(stat);
    }

    // Fairness: population coefficient of variation over the shares.
    const auto n = static_cast<double>(m.per_stream.size());
    if (n > 0) {
        double mean = 0.0;
        for (const auto& s : m.per_stream) mean += s.share_pct;
        mean /= n;
        double var = 0.0;
        for (const auto& s : m.per_stream) {
            const double d = s.share_pct - mean;
            var += d * d;
        }
        var /= n;
        m.share_mean_pct = mean;
        m.share_cv = mean > 0 ? std::sqrt(var) / mean : 0.0;
    }
    return m;
}

} // namespace sensemesh::harness
