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

#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sensemesh::node {

/// What the drain loop hands back for one job: the elements (or an error) and
/// how long the server-side lookup took.
struct QueryAnswer {
    core::Result<std::vector<core::StreamElement>> elements = std::vector<core::StreamElement>{};
    std::int64_t duration_us = 0;
};

/// One queued data query awaiting the drain loop.
struct QueryJob {
    enum class Kind { latest_n, range };

    std::string id;
    std::string sensor;
    Kind kind = Kind::latest_n;
    std::int64_t n = 1;      // latest_n
    std::int64_t from = 0;   // range
    std::int64_t to = 0;     // range
    std::int64_t enqueued_at_ms = 0;
    std::string requester;
    std::promise<QueryAnswer> promise;
};

/// Bounded FIFO: jobs are answered strictly in arrival order; when full, the
/// newest arrival is rejected so peers see back-pressure instead of silence.
class QueryQueue {
public:
    explicit QueryQueue(size_t bound) : bound_(bound) {}

    /// False when the queue is full (the job is untouched so the caller can
    /// still fail its promise).
    bool push(QueryJob&& job) {
        std::lock_guard lock(mu_);
        if (stopping_ || jobs_.size() >= bound_) return false;
        jobs_.push_back(std::move(job));
        cv_.notify_one();
        return true;
    }

    /// Blocks for the next job; nullopt on shutdown with an empty queue.
    std::optional<QueryJob> pop() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return std::nullopt;
        QueryJob job = std::move(jobs_.front());
        jobs_.pop_front();
        return job;
    }

    size_t depth() const {
        std::lock_guard lock(mu_);
        return jobs_.size();
    }

    void stop() {
        std::lock_guard lock(mu_);
        stopping_ = true;
        cv_.notify_all();
    }

private:
    size_t bound_;
    bool stopping_ = false;
    std::deque<QueryJob> jobs_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

} // namespace sensemesh::node
