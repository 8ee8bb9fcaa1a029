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
#include <chrono>
#include <condition_variable>
#include <mutex>

namespace sensemesh::node {

/// Token bucket modelling a resource-constrained device: at most `rate`
/// data points per second get processed, with a small burst allowance so the
/// limiter paces rather than staircases. Blocking acquire() is used where the
/// consumer controls its own pace (stream readers, pull drivers); try_acquire()
/// where arrivals must be rejected visibly (push ingest).
class TokenBucket {
public:
    explicit TokenBucket(double rate_per_s)
        : rate_(rate_per_s), capacity_(std::max(1.0, rate_per_s / 10.0)), tokens_(capacity_),
          last_(std::chrono::steady_clock::now()) {}

    bool try_acquire() {
        std::lock_guard lock(mu_);
        refill_locked();
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return true;
        }
        return false;
    }

    /// Blocks until a token is available or shutdown; false on shutdown.
    bool acquire() {
        std::unique_lock lock(mu_);
        while (!stopping_) {
            refill_locked();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return true;
            }
            const double deficit = 1.0 - tokens_;
            const auto wait = std::chrono::microseconds(
                static_cast<std::int64_t>(deficit / rate_ * 1e6) + 100);
            cv_.wait_for(lock, wait);
        }
        return false;
    }

    void shutdown() {
        std::lock_guard lock(mu_);
        stopping_ = true;
        cv_.notify_all();
    }

    double rate() const { return rate_; }

private:
    void refill_locked() {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed_s =
            std::chrono::duration_cast<std::chrono::duration<double>>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed_s * rate_);
    }

    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    bool stopping_ = false;
    std::mutex mu_;
    std::condition_variable cv_;
};

} // namespace sensemesh::node
