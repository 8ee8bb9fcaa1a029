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

#include "sensemesh/storage/window_store.hpp"

#include "sensemesh/wire/frame.hpp"

#include <algorithm>

namespace sensemesh::storage {

std::string element_wire_line(const core::StreamElement& e) {
    auto frame = wire::element_to_frame(e, e.sensor + "#" + std::to_string(e.seq));
    // Elements are validated before they reach storage, so conversion cannot
    // fail on this path; an empty line is the defensive fallback.
    return frame ? wire::encode_frame(frame.value()) : std::string{};
}

size_t element_wire_size(const core::StreamElement& e) {
    return element_wire_line(e).size();
}

WindowStore::WindowStore(std::string sensor, size_t capacity, std::string spill_path)
    : sensor_(std::move(sensor)), capacity_(std::max<size_t>(1, capacity)) {
    if (!spill_path.empty()) {
        spill_.open(spill_path, std::ios::out | std::ios::app);
    }
}

size_t WindowStore::capacity() const {
    std::lock_guard lock(mu_);
    return capacity_;
}

size_t WindowStore::count() const {
    std::lock_guard lock(mu_);
    return ring_.size();
}

std::uint64_t WindowStore::total_inserted() const {
    std::lock_guard lock(mu_);
    return total_inserted_;
}

size_t WindowStore::bytes_estimate() const {
    std::lock_guard lock(mu_);
    return bytes_estimate_;
}

void WindowStore::evict_oldest_locked() {
    bytes_estimate_ -= element_wire_size(ring_.front());
    ring_.pop_front();
}

core::Result<EvictionReport> WindowStore::insert(core::StreamElement e) {
    std::lock_guard lock(mu_);
    if (e.seq < 0 || static_cast<std::uint64_t>(e.seq) != total_inserted_) {
        return core::make_error(code::kSeqGap,
                                "sensor '" + sensor_ + "' expected seq " +
                                    std::to_string(total_inserted_) + ", got " +
                                    std::to_string(e.seq));
    }
    const auto line = element_wire_line(e);
    if (spill_.is_open()) {
        spill_ << line << '\n';
        spill_.flush();
    }
    bytes_estimate_ += line.size();
    ring_.push_back(std::move(e));
    ++total_inserted_;

    EvictionReport report;
    if (ring_.size() > capacity_) {
        report.evicted = std::move(ring_.front());
        bytes_estimate_ -= element_wire_size(*report.evicted);
        ring_.pop_front();
    }
    return report;
}

std::vector<core::StreamElement> WindowStore::query_latest(size_t n) const {
    std::lock_guard lock(mu_);
    std::vector<core::StreamElement> out;
    const size_t take = std::min(n, ring_.size());
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        out.push_back(ring_[ring_.size() - 1 - i]);
    }
    return out;
}

core::Result<std::vector<core::StreamElement>> WindowStore::query_range(std::int64_t from_ts,
                                                                        std::int64_t to_ts) const {
    if (from_ts > to_ts) {
        return core::make_error(code::kRangeInverted,
                                "range start " + std::to_string(from_ts) + " exceeds end " +
                                    std::to_string(to_ts));
    }
    std::lock_guard lock(mu_);
    std::vector<core::StreamElement> out;
    for (const auto& e : ring_) {
        if (e.timestamp_ms >= from_ts && e.timestamp_ms <= to_ts) out.push_back(e);
    }
    return out;
}

std::vector<core::StreamElement> WindowStore::get_since(std::int64_t after_seq) const {
    std::lock_guard lock(mu_);
    std::vector<core::StreamElement> out;
    for (const auto& e : ring_) {
        if (static_cast<std::int64_t>(e.seq) > after_seq) out.push_back(e);
    }
    return out;
}

std::optional<core::StreamElement> WindowStore::latest() const {
    std::lock_guard lock(mu_);
    if (ring_.empty()) return std::nullopt;
    return ring_.back();
}

void WindowStore::set_capacity(size_t capacity) {
    std::lock_guard lock(mu_);
    capacity_ = std::max<size_t>(1, capacity);
    while (ring_.size() > capacity_) evict_oldest_locked();
}

void StoreSet::add(StorePtr store) {
    std::lock_guard lock(mu_);
    stores_[store->sensor()] = std::move(store);
}

StorePtr StoreSet::get(const std::string& sensor) const {
    std::lock_guard lock(mu_);
    auto it = stores_.find(sensor);
    return it == stores_.end() ? nullptr : it->second;
}

std::vector<std::string> StoreSet::sensors() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    out.reserve(stores_.size());
    for (const auto& [name, _] : stores_) out.push_back(name);
    return out;
}

size_t StoreSet::total_bytes_estimate() const {
    std::lock_guard lock(mu_);
    size_t total = 0;
    for (const auto& [_, s] : stores_) total += s->bytes_estimate();
    return total;
}

} // namespace sensemesh::storage
