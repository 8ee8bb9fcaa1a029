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
#include "sensemesh/core/types.hpp"

#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sensemesh::storage {

namespace code {
inline constexpr const char* kSeqGap = "SEQ_GAP";
inline constexpr const char* kRangeInverted = "RANGE_INVERTED";
} // namespace code

/// Serialized size in bytes of one element as it travels on the wire; the unit
/// in which a store accounts for its footprint.
size_t element_wire_size(const core::StreamElement& e);

/// The wire form of an element as a single log/stream line (no newline).
std::string element_wire_line(const core::StreamElement& e);

struct EvictionReport {
    std::optional<core::StreamElement> evicted;
};

/// Bounded sliding window over one sensor's stream. Keeps the newest
/// `capacity` elements, evicting oldest-first; sequence numbers must arrive
/// contiguously. One writer (the sensor's sampling task), many readers;
/// readers always get consistent copies.
class WindowStore {
public:
    WindowStore(std::string sensor, size_t capacity, std::string spill_path = "");

    const std::string& sensor() const { return sensor_; }
    size_t capacity() const;
    size_t count() const;
    std::uint64_t total_inserted() const;
    size_t bytes_estimate() const;

    /// Appends an element. Fails with SEQ_GAP when e.seq != total_inserted.
    core::Result<EvictionReport> insert(core::StreamElement e);

    /// Newest-first, at most n elements.
    std::vector<core::StreamElement> query_latest(size_t n) const;

    /// Oldest-first elements with from_ts <= timestamp <= to_ts; RANGE_INVERTED
    /// when from_ts > to_ts.
    core::Result<std::vector<core::StreamElement>> query_range(std::int64_t from_ts,
                                                               std::int64_t to_ts) const;

    /// Oldest-first retained elements with seq > after_seq (subscription
    /// catch-up). Pass after_seq = -1 for everything retained.
    std::vector<core::StreamElement> get_since(std::int64_t after_seq) const;

    std::optional<core::StreamElement> latest() const;

    /// Runtime window resize; shrinking evicts oldest elements immediately.
    void set_capacity(size_t capacity);

private:
    void evict_oldest_locked();

    mutable std::mutex mu_;
    std::string sensor_;
    size_t capacity_;
    std::deque<core::StreamElement> ring_;
    std::uint64_t total_inserted_ = 0;
    size_t bytes_estimate_ = 0;
    std::ofstream spill_;
};

using StorePtr = std::shared_ptr<WindowStore>;

/// The node's collection of per-sensor windows.
class StoreSet {
public:
    void add(StorePtr store);
    StorePtr get(const std::string& sensor) const;
    std::vector<std::string> sensors() const;
    /// Summed bytes_estimate across all windows — one storage-series sample.
    size_t total_bytes_estimate() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, StorePtr> stores_;
};

} // namespace sensemesh::storage
