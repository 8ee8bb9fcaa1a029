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

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

namespace sensemesh::harness {

namespace code {
inline constexpr const char* kBadEventLog = "BAD_EVENT_LOG";
} // namespace code

/// One benchmark event. Four kinds:
///   run_start — marks t0; points carries the stream universe size and
///               status carries the delivery mode, so the log is closed
///               under recomputation.
///   run_end   — marks the end of the measured window.
///   request   — one pull request completing (ok or an error code).
///   deliver   — one element arriving over a subscription.
struct EventRow {
    std::string kind;
    std::string request_id; // "<stream>#<n>"; empty on markers
    std::int64_t stream = -1;
    std::string sensor;
    std::int64_t t_ms = 0;
    std::string status; // "ok" or an error code; mode on run_start
    std::int64_t points = 0;

    bool operator==(const EventRow&) const = default;
};

inline constexpr const char* kEventHeader = "kind,request_id,stream,sensor,t_ms,status,points";

std::string to_csv(const EventRow& row);
core::Result<EventRow> event_from_csv(const std::string& line);

/// Append-only, thread-safe event writer that also keeps the rows in memory
/// so a finished run can be analyzed without rereading its own file.
class EventLog {
public:
    core::Result<void> open(const std::string& path);
    void append(const EventRow& row);
    void close();

    const std::string& path() const { return path_; }
    std::vector<EventRow> rows() const;

private:
    mutable std::mutex mu_;
    std::ofstream out_;
    std::string path_;
    std::vector<EventRow> rows_;
};

/// Parses a whole event log; the independent path used to recheck reports.
core::Result<std::vector<EventRow>> read_event_log(const std::string& path);

} // namespace sensemesh::harness
