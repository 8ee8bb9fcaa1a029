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
#include "sensemesh/wire/frame.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace httplib {
class Client;
}

namespace sensemesh::wire {

/// Splits "host:port"; fails with BAD_REQUEST on malformed input.
core::Result<std::pair<std::string, int>> split_address(const std::string& address);

/// Parses a newline-delimited body into frames; any bad line fails the batch.
core::Result<std::vector<WireFrame>> parse_frame_lines(const std::string& body);

/// A query response: the query_result (or error) header frame followed by its
/// elements, plus the requester-side round-trip measurement.
struct QueryBatch {
    WireFrame header;
    std::vector<DeliveredElement> elements;
    std::int64_t t_sent_ms = 0;     // requester clock, epoch ms
    std::int64_t t_received_ms = 0; // requester clock, epoch ms
    std::int64_t rtt_ms = 0;        // t_received - t_sent
};

/// Keep-alive HTTP client for the request/response endpoints of one peer.
/// One instance models one requester: connections persist across calls.
/// Not thread-safe; give each requester thread its own client.
class PeerClient {
public:
    explicit PeerClient(const std::string& address, int timeout_ms = 30000);
    ~PeerClient();

    PeerClient(const PeerClient&) = delete;
    PeerClient& operator=(const PeerClient&) = delete;

    const std::string& address() const { return address_; }

    /// GET /sensor/{sensor}/latest?n=&id= — newest-first elements.
    core::Result<QueryBatch> latest(const std::string& sensor, std::int64_t n,
                                    const std::string& id);

    /// GET /sensor/{sensor}/range?from=&to=&id= — oldest-first elements.
    core::Result<QueryBatch> range(const std::string& sensor, std::int64_t from, std::int64_t to,
                                   const std::string& id);

    /// POST one frame to a path, expect exactly one frame back. An error frame
    /// comes back as the error it carries.
    core::Result<WireFrame> post_frame(const std::string& path, const WireFrame& frame);

    /// GET a frame endpoint (/status, /sensors, /peers); first frame returned.
    core::Result<WireFrame> get_frame(const std::string& path);

private:
    core::Result<QueryBatch> run_query(const std::string& path);

    std::string address_;
    std::unique_ptr<httplib::Client> cli_;
};

struct StreamOptions {
    int connect_timeout_ms = 5000;
    // Must exceed the producer's heartbeat interval or idle streams die.
    int read_timeout_ms = 30000;
};

/// Passed as resume_from when the subscriber makes no claim about what it
/// has received (fresh subscriptions start with new elements only).
inline constexpr std::int64_t kNoResumeClaim = std::numeric_limits<std::int64_t>::min();

/// Consumes one persistent stream: a long-lived GET on
/// /sensor/{sensor}/stream?sub=&resume_from= delivering newline-delimited
/// frames until stopped or disconnected.
class StreamReader {
public:
    using Options = StreamOptions;

    StreamReader(std::string address, std::string sensor, std::string sub_id,
                 StreamOptions opt = StreamOptions{});

    /// Blocks, invoking on_frame for every frame in arrival order; on_frame
    /// returning false detaches cleanly. resume_from is the last seq this
    /// subscriber has safely received (-1 for "replay everything retained"):
    /// the producer rewinds to it, making the subscriber the authority after
    /// a crash. Anything below -1 makes no claim, so a fresh subscription
    /// starts from the next new element.
    core::Result<void> run(std::int64_t resume_from,
                           const std::function<bool(const WireFrame&)>& on_frame);

    void stop() { stop_.store(true); }

private:
    std::string address_;
    std::string sensor_;
    std::string sub_id_;
    Options opt_;
    std::atomic<bool> stop_{false};
};

/// Outcome of one push delivery attempt: a fresh connection, one POST
/// /deliver, one response, connection closed. Byte counts cover everything on
/// the wire in both directions, which is what makes the per-element overhead
/// of this transport measurable.
struct PushOutcome {
    bool connected = false;
    size_t bytes_out = 0;
    size_t bytes_in = 0;
    core::Result<WireFrame> response;
};

PushOutcome push_deliver(const std::string& address, const WireFrame& deliver_frame,
                         int timeout_ms);

} // namespace sensemesh::wire
