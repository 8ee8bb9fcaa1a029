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
#include "sensemesh/node/clock.hpp"
#include "sensemesh/node/query_queue.hpp"
#include "sensemesh/node/token_bucket.hpp"
#include "sensemesh/processing/processor.hpp"
#include "sensemesh/sources/registry.hpp"
#include "sensemesh/storage/window_store.hpp"
#include "sensemesh/wire/config_codec.hpp"
#include "sensemesh/wire/http_client.hpp"

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
class DataSink;
} // namespace httplib

namespace sensemesh::node {

namespace code {
inline constexpr const char* kAddressInUse = "ADDRESS_IN_USE";
inline constexpr const char* kConfigInvalid = "CONFIG_INVALID";
inline constexpr const char* kCoordinatorUnreachable = "COORDINATOR_UNREACHABLE";
} // namespace code

enum class DeliveryMode { persistent_stream, push };

const char* to_string(DeliveryMode m);
core::Result<DeliveryMode> delivery_mode_from_string(const std::string& s);

/// A peer's announcement at the coordinator: who it is, where it listens and
/// which sensors it serves. Re-registration replaces the entry.
struct PeerRegistration {
    std::string node_id;
    std::string address;
    std::vector<std::pair<std::string, core::Schema>> sensors;
    std::int64_t registered_at_ms = 0;
};

/// Live subscription state. The cursor is the last seq the subscriber has
/// acknowledged; it only moves forward on acknowledgment, except that a
/// reconnecting stream subscriber may rewind it via resume_from (the
/// subscriber is the authority on what it actually received).
struct Subscription {
    std::string id;
    std::string sensor;
    std::string subscriber; // push target address; empty for stream mode
    DeliveryMode mode = DeliveryMode::persistent_stream;
    bool persistent_delivery = true;
    std::int64_t created_at_ms = 0;
    std::atomic<std::int64_t> cursor{-1};
    std::atomic<bool> active{true};
    std::atomic<std::int64_t> delivered{0};
    /// Bumped per stream (re)connect; an older connection yields to a newer
    /// one for the same subscription instead of racing it for the cursor.
    std::atomic<std::int64_t> epoch{0};
};

/// Monotonic work counters: the artifact's effort proxy (elements handled,
/// connections opened, bytes moved) reported per node instead of joules.
struct WorkSnapshot {
    std::int64_t ticks = 0;
    std::int64_t elements_stored = 0;
    std::int64_t elements_filtered = 0;
    std::int64_t sample_errors = 0;
    std::int64_t seq_gaps = 0;
    std::int64_t queries_answered = 0;
    std::int64_t queries_rejected = 0;
    std::int64_t deliver_received = 0;
    std::int64_t deliver_throttled = 0;
    std::int64_t push_attempts = 0;
    std::int64_t push_connections = 0;
    std::int64_t push_delivered = 0;
    std::int64_t push_bytes_out = 0;
    std::int64_t push_bytes_in = 0;
    std::int64_t stream_connections = 0;
    std::int64_t stream_frames = 0;
    std::int64_t stream_payload_bytes = 0;
    std::int64_t stream_wire_bytes = 0;
    std::int64_t heartbeats = 0;
};

/// One fetched batch plus the requester-side round-trip measurement.
using FetchBatch = wire::QueryBatch;

/// The per-device engine: samples its virtual sensors into bounded windows,
/// answers queries through a FIFO queue, serves/feeds subscriptions in both
/// streaming modes, and registers with a coordinator when configured. A node
/// is simultaneously client and server; an aggregator is just a node that
/// also issues fetches and accepts deliveries.
class Node {
public:
    /// Validates the whole config, binds the listener, starts sampling/drain/
    /// registration machinery. CONFIG_INVALID aggregates every violation;
    /// ADDRESS_IN_USE reports a busy port.
    static core::Result<std::unique_ptr<Node>> start(const wire::NodeConfig& config);

    ~Node();
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    void stop();

    const std::string& node_id() const { return config_.node_id; }
    /// Actual bound address (resolves port 0 to the chosen port).
    const std::string& address() const { return address_; }
    int port() const { return port_; }

    const wire::NodeConfig& config() const { return config_; }
    storage::StoreSet& stores() { return stores_; }
    const EpochSteadyClock& clock() const { return clock_; }

    WorkSnapshot work() const;
    size_t queue_depth() const { return queue_.depth(); }
    bool registered() const { return registered_.load(); }
    int registration_attempts() const { return registration_attempts_.load(); }

    /// Coordinator role: the peers currently registered here.
    std::vector<PeerRegistration> peers() const;

    /// Live subscription state by id (nullptr when unknown).
    std::shared_ptr<Subscription> subscription(const std::string& id) { return find_subscription(id); }

    /// Ingest limiter (aggregator profile); nullptr when unconstrained.
    TokenBucket* ingest_gate() { return ingest_gate_ ? ingest_gate_.get() : nullptr; }

    /// Invoked for every accepted /deliver frame (after throttling) with the
    /// frame id and the decoded element; lets the embedding process record
    /// arrivals per subscription. Called concurrently.
    void set_deliver_sink(
        std::function<void(const std::string& frame_id, const wire::DeliveredElement&)> sink);

    /// Issues a latest_n query to a peer (or to itself — role symmetry) and
    /// records the round trip. Timeout -1 uses the configured default.
    core::Result<FetchBatch> fetch_remote(const std::string& peer, const std::string& sensor,
                                          std::int64_t n, int timeout_ms = -1);

    /// True once every sensor with a tick_limit has finished its ticks.
    bool sampling_done() const;

private:
    struct SensorRuntime {
        core::VirtualSensorConfig cfg;
        sources::SourcePtr source;
        processing::Chain chain;
        storage::StorePtr store;
        std::int64_t next_due_ms = 0;
        std::int64_t ticks_done = 0;
        std::atomic<bool> finished{false}; // tick_limit reached or source exhausted
    };

    explicit Node(wire::NodeConfig config);

    core::Result<void> init();
    core::Result<void> build_sensors();
    core::Result<void> bind_and_serve();
    void install_endpoints();

    void sampler_loop();
    void tick_sensor(SensorRuntime& s, std::int64_t due_ms);
    void drain_loop();
    void register_loop();
    void push_worker(std::shared_ptr<Subscription> sub);
    /// One scheduling round of a persistent stream connection: wait for data
    /// or heartbeat deadline, write what is owed, advance the cursor. Returns
    /// false to close the connection.
    bool stream_step(Subscription& sub, storage::WindowStore& store, std::int64_t epoch,
                     std::int64_t& last_activity_ms, httplib::DataSink& sink);

    core::Result<QueryAnswer> enqueue_and_wait(QueryJob&& job);
    std::shared_ptr<Subscription> find_subscription(const std::string& id);
    std::shared_ptr<Subscription> upsert_stream_subscription(const std::string& id,
                                                             const std::string& sensor);

    wire::NodeConfig config_;
    EpochSteadyClock clock_;
    std::string address_;
    int port_ = 0;
    std::int64_t started_at_ms_ = 0;

    sources::PluginRegistry registry_;
    std::vector<std::unique_ptr<SensorRuntime>> sensors_;
    storage::StoreSet stores_;

    QueryQueue queue_;
    std::unique_ptr<TokenBucket> ingest_gate_;

    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    std::thread sampler_thread_;
    std::thread drain_thread_;
    std::thread register_thread_;
    std::vector<std::thread> push_threads_;

    mutable std::mutex subs_mu_;
    std::map<std::string, std::shared_ptr<Subscription>> subscriptions_;
    std::atomic<std::uint64_t> sub_counter_{0};
    std::atomic<std::uint64_t> query_counter_{0};

    mutable std::mutex peers_mu_;
    std::map<std::string, PeerRegistration> peers_;

    mutable std::mutex fetch_mu_;
    std::map<std::string, std::unique_ptr<wire::PeerClient>> fetch_clients_;

    std::function<void(const std::string&, const wire::DeliveredElement&)> deliver_sink_;
    std::mutex sink_mu_;

    std::atomic<bool> stopping_{false};
    std::atomic<bool> registered_{false};
    std::atomic<int> registration_attempts_{0};

    // Wakes sampling waiters and delivery workers when elements arrive or the
    // node stops.
    std::mutex wake_mu_;
    std::condition_variable wake_cv_;

    // Counters (atomic; snapshot via work()).
    struct Counters {
        std::atomic<std::int64_t> ticks{0};
        std::atomic<std::int64_t> elements_stored{0};
        std::atomic<std::int64_t> elements_filtered{0};
        std::atomic<std::int64_t> sample_errors{0};
        std::atomic<std::int64_t> seq_gaps{0};
        std::atomic<std::int64_t> queries_answered{0};
        std::atomic<std::int64_t> queries_rejected{0};
        std::atomic<std::int64_t> deliver_received{0};
        std::atomic<std::int64_t> deliver_throttled{0};
        std::atomic<std::int64_t> push_attempts{0};
        std::atomic<std::int64_t> push_connections{0};
        std::atomic<std::int64_t> push_delivered{0};
        std::atomic<std::int64_t> push_bytes_out{0};
        std::atomic<std::int64_t> push_bytes_in{0};
        std::atomic<std::int64_t> stream_connections{0};
        std::atomic<std::int64_t> stream_frames{0};
        std::atomic<std::int64_t> stream_payload_bytes{0};
        std::atomic<std::int64_t> stream_wire_bytes{0};
        std::atomic<std::int64_t> heartbeats{0};
    } counters_;
};

} // namespace sensemesh::node
