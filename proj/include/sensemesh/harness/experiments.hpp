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
#include "sensemesh/harness/metrics.hpp"
#include "sensemesh/harness/report.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sensemesh::harness {

namespace code {
inline constexpr const char* kBadRunSpec = "BAD_RUN_SPEC";
} // namespace code

/// One benchmark run: client node processes carrying the standard 13-sensor
/// fixture, an in-process aggregator, and `clients * streams_per_client`
/// streams moved in one of three ways:
///   pull              — the aggregator requests latest-1 per stream on a
///                       fixed cadence over keep-alive connections,
///   persistent_stream — the aggregator holds one long-lived stream per
///                       subscription,
///   push              — clients open a fresh connection per element.
struct RunSpec {
    std::string run_id = "run";
    std::string mode = "pull";
    int clients = 3;
    int streams_per_client = 30;
    std::int64_t duration_ms = 300000;
    std::int64_t request_interval_ms = 1000; // pull cadence per stream
    std::int64_t sampling_interval_ms = 1000;
    std::int64_t history_size = 120;
    std::uint64_t tick_limit = 0; // 0 = clients sample for the whole run
    std::uint64_t seed = 1;
    std::int64_t ingest_limit_per_s = 0; // aggregator admission rate; 0 = off
    std::string out_dir;
    std::string node_binary;
    std::int64_t warmup_ms = 2500;
};

/// Counter sums read back from the client nodes' /status after the run.
struct ClientCounters {
    std::int64_t elements_stored = 0;
    std::int64_t push_attempts = 0;
    std::int64_t push_connections = 0;
    std::int64_t push_delivered = 0;
    std::int64_t push_bytes_out = 0;
    std::int64_t stream_connections = 0;
    std::int64_t stream_frames = 0;
    std::int64_t stream_wire_bytes = 0;
};

struct RunSummary {
    Metrics metrics;
    ReportPaths paths;
    std::string events_path;
    double mean_rtt_ms = 0.0; // production-to-receipt for subscription modes,
                              // request round trip for pull
    std::int64_t rtt_samples = 0;
    std::int64_t subscriptions = 0;
    std::int64_t agg_deliver_received = 0;
    std::int64_t agg_deliver_throttled = 0;
    ClientCounters clients;
};

core::Result<RunSummary> run_experiment(const RunSpec& spec);

/// Deterministic in-process storage profile: seeded elements inserted into
/// one bounded window under a stepped virtual clock, footprint sampled after
/// every insert.
struct StorageSpec {
    std::int64_t capacity = 512;
    std::int64_t inserts = 4096;
    std::int64_t step_ms = 10;
    std::uint64_t seed = 7;
    std::string out_dir; // writes storage.csv when non-empty
};

struct StorageRow {
    std::int64_t inserted = 0;
    std::int64_t count = 0;
    std::int64_t bytes = 0;
};

struct StorageReport {
    std::vector<StorageRow> rows;
    std::int64_t capacity = 0;
    std::int64_t max_element_bytes = 0;
    std::string storage_csv; // empty when not written
};

core::Result<StorageReport> storage_experiment(const StorageSpec& spec);

/// Aggregator-outage drill: a client (and an identically seeded twin) keep
/// sampling while the aggregator process state is destroyed for outage_ms;
/// afterwards the stream resumes from the subscriber's cursor and both
/// windows are compared element by element.
struct AutonomySpec {
    std::string out_dir;
    std::string node_binary;
    std::uint64_t seed = 21;
    std::int64_t sampling_interval_ms = 1000;
    std::int64_t history_size = 120;
    std::uint64_t tick_limit = 100;
    std::int64_t connected_ms = 15000;
    std::int64_t outage_ms = 60000;
};

struct AutonomyReport {
    bool local_queries_during_outage = false;
    std::int64_t stored_before_outage = 0;
    std::int64_t stored_after_outage = 0;
    std::vector<std::int64_t> received_seqs; // both connections, arrival order
    std::int64_t gap_frames = 0;             // delivered frames with gap > 0
    bool seqs_contiguous = false;            // no hole, no duplicate
    bool windows_equal = false;              // vs twin, on (seq, values)
    std::int64_t windows_compared = 0;
    std::string detail; // first discrepancy, for diagnostics
};

core::Result<AutonomyReport> autonomy_experiment(const AutonomySpec& spec);

/// Re-derives Metrics from an event log file alone.
core::Result<Metrics> recompute_metrics(const std::string& events_path);

} // namespace sensemesh::harness
