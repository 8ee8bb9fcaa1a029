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

#include "sensemesh/harness/experiments.hpp"

#include "sensemesh/harness/fixture.hpp"
#include "sensemesh/harness/orchestrator.hpp"
#include "sensemesh/node/backoff.hpp"
#include "sensemesh/node/node.hpp"
#include "sensemesh/storage/window_store.hpp"
#include "sensemesh/wire/http_client.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace sensemesh::harness {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void sleep_ms(std::int64_t ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }

/// Sleeps until the deadline in small slices so `stop` can interrupt.
void sleep_until_ms(std::int64_t deadline_ms, const std::atomic<bool>& stop) {
    while (!stop.load()) {
        const std::int64_t left = deadline_ms - now_ms();
        if (left <= 0) return;
        sleep_ms(std::min<std::int64_t>(left, 50));
    }
}

struct NodeStatus {
    std::int64_t elements_stored = 0;
    std::int64_t push_attempts = 0;
    std::int64_t push_connections = 0;
    std::int64_t push_delivered = 0;
    std::int64_t push_bytes_out = 0;
    std::int64_t stream_connections = 0;
    std::int64_t stream_frames = 0;
    std::int64_t stream_wire_bytes = 0;
    std::int64_t deliver_received = 0;
    std::int64_t deliver_throttled = 0;
    bool sampling_done = false;
};

core::Result<NodeStatus> status_of(const std::string& address) {
    wire::PeerClient cli(address, 5000);
    auto frame = cli.get_frame("/status");
    if (!frame) return frame.error();
    const auto& b = frame.value().body;
    NodeStatus s;
    s.elements_stored = b.value("elements_stored", std::int64_t{0});
    s.push_attempts = b.value("push_attempts", std::int64_t{0});
    s.push_connections = b.value("push_connections", std::int64_t{0});
    s.push_delivered = b.value("push_delivered", std::int64_t{0});
    s.push_bytes_out = b.value("push_bytes_out", std::int64_t{0});
    s.stream_connections = b.value("stream_connections", std::int64_t{0});
    s.stream_frames = b.value("stream_frames", std::int64_t{0});
    s.stream_wire_bytes = b.value("stream_wire_bytes", std::int64_t{0});
    s.deliver_received = b.value("deliver_received", std::int64_t{0});
    s.deliver_throttled = b.value("deliver_throttled", std::int64_t{0});
    s.sampling_done = b.value("sampling_done", false);
    return s;
}

/// "st<k>_..." -> k, or -1 when the id has another shape.
std::int64_t stream_of_sub_id(const std::string& id) {
    if (id.rfind("st", 0) != 0) return -1;
    std::int64_t value = 0;
    size_t i = 2;
    if (i >= id.size() || !std::isdigit(static_cast<unsigned char>(id[i]))) return -1;
    for (; i < id.size() && std::isdigit(static_cast<unsigned char>(id[i])); ++i) {
        value = value * 10 + (id[i] - '0');
    }
    return value;
}

struct RttAccumulator {
    std::atomic<std::int64_t> sum_ms{0};
    std::atomic<std::int64_t> n{0};

    void add(std::int64_t rtt) {
        sum_ms.fetch_add(rtt);
        n.fetch_add(1);
    }
    double mean() const {
        const auto count = n.load();
        return count > 0 ? static_cast<double>(sum_ms.load()) / static_cast<double>(count) : 0.0;
    }
};

} // namespace

core::Result<RunSummary> run_experiment(const RunSpec& spec) {
    if (spec.mode != "pull" && spec.mode != "persistent_stream" && spec.mode != "push") {
        return core::make_error(code::kBadRunSpec, "unknown mode '" + spec.mode + "'");
    }
    if (spec.out_dir.empty() || spec.node_binary.empty()) {
        return core::make_error(code::kBadRunSpec, "out_dir and node_binary are required");
    }
    if (spec.clients < 1 || spec.streams_per_client < 1) {
        return core::make_error(code::kBadRunSpec, "need at least one client and one stream");
    }
    auto made = ensure_dir(spec.out_dir);
    if (!made) return made.error();

    // In-process aggregator; clients run as real child processes.
    wire::NodeConfig agg_cfg;
    agg_cfg.node_id = "agg";
    agg_cfg.listen = "127.0.0.1:0";
    agg_cfg.ingest_limit_per_s = spec.ingest_limit_per_s;
    auto agg_started = node::Node::start(agg_cfg);
    if (!agg_started) return agg_started.error();
    auto agg = agg_started.take();

    std::vector<ChildNode> children;
    auto teardown = [&] {
        for (auto& c : children) stop_node(c);
        agg->stop();
    };

    FixtureOptions fo;
    fo.sampling_interval_ms = spec.sampling_interval_ms;
    fo.history_size = spec.history_size;
    fo.tick_limit = spec.tick_limit;
    for (int i = 0; i < spec.clients; ++i) {
        wire::NodeConfig cfg;
        cfg.node_id = "client" + std::to_string(i);
        cfg.listen = "127.0.0.1:0";
        cfg.coordinator = agg->address();
        cfg.heartbeat_interval_s = 2; // quick heartbeats keep teardown snappy
        cfg.sensors = client_fixture(i, spec.seed, fo);
        auto child = spawn_node(spec.node_binary, cfg, spec.out_dir);
        if (!child) {
            teardown();
            return child.error();
        }
        children.push_back(child.take());
    }

    // Warm up until every client has stored at least one tick per sensor.
    {
        const std::int64_t deadline =
            now_ms() + std::max<std::int64_t>(spec.warmup_ms, 2 * spec.sampling_interval_ms) +
            10000;
        for (const auto& c : children) {
            while (true) {
                auto s = status_of(c.address);
                if (s && s.value().elements_stored >= kClientSensorCount) break;
                if (now_ms() > deadline) {
                    teardown();
                    return core::make_error(code::kBadRunSpec,
                                            c.node_id + " produced no data during warmup");
                }
                sleep_ms(50);
            }
        }
    }

    EventLog log;
    const std::string events_path = spec.out_dir + "/events.csv";
    auto opened = log.open(events_path);
    if (!opened) {
        teardown();
        return opened.error();
    }

    const int total_streams = spec.clients * spec.streams_per_client;
    const auto client_of = [&](int k) { return k / spec.streams_per_client; };
    const auto sensor_of = [&](int k) -> const std::string& {
        return stream_target(k % spec.streams_per_client);
    };
    const auto sub_id_of = [&](int k) {
        return "st" + std::to_string(k) + "_r" + std::to_string(spec.seed);
    };

    std::atomic<bool> stop{false};
    std::atomic<bool> accepting{true};
    RttAccumulator rtt;
    RunSummary summary;
    summary.events_path = events_path;

    const std::int64_t t0 = now_ms();
    log.append({"run_start", "", -1, "", t0, spec.mode, total_streams});
    const std::int64_t t_end = t0 + spec.duration_ms;

    std::vector<std::thread> workers;
    std::mutex readers_mu;
    std::vector<std::shared_ptr<wire::StreamReader>> readers;

    if (spec.mode == "pull") {
        workers.reserve(static_cast<size_t>(total_streams));
        for (int k = 0; k < total_streams; ++k) {
            workers.emplace_back([&, k] {
                wire::PeerClient cli(children[static_cast<size_t>(client_of(k))].address, 5000);
                const std::string& sensor = sensor_of(k);
                const std::int64_t offset =
                    (spec.request_interval_ms * k) / total_streams; // de-synchronize streams
                for (std::int64_t n = 0;; ++n) {
                    sleep_until_ms(t0 + offset + n * spec.request_interval_ms, stop);
                    if (stop.load()) return;
                    if (auto* gate = agg->ingest_gate()) {
                        if (!gate->acquire()) return;
                    }
                    const std::string id =
                        std::to_string(k) + "#" + std::to_string(n);
                    auto batch = cli.latest(sensor, 1, id);
                    EventRow row;
                    row.kind = "request";
                    row.request_id = id;
                    row.stream = k;
                    row.sensor = sensor;
                    row.t_ms = now_ms();
                    if (batch) {
                        row.status = "ok";
                        row.points = static_cast<std::int64_t>(batch.value().elements.size());
                    } else {
                        row.status = batch.error().code;
                        row.points = 0;
                    }
                    if (accepting.load()) {
                        log.append(row);
                        if (batch) rtt.add(batch.value().rtt_ms);
                    }
                }
            });
        }
    } else if (spec.mode == "persistent_stream") {
        summary.subscriptions = total_streams;
        workers.reserve(static_cast<size_t>(total_streams));
        for (int k = 0; k < total_streams; ++k) {
            workers.emplace_back([&, k] {
                const std::string& sensor = sensor_of(k);
                const std::string& address = children[static_cast<size_t>(client_of(k))].address;
                std::int64_t last_seen = wire::kNoResumeClaim; // fresh: new data only
                node::Backoff backoff(spec.seed * 7919 + static_cast<std::uint64_t>(k));
                while (!stop.load()) {
                    auto reader =
                        std::make_shared<wire::StreamReader>(address, sensor, sub_id_of(k));
                    {
                        std::lock_guard lock(readers_mu);
                        readers.push_back(reader);
                    }
                    auto outcome = reader->run(last_seen, [&](const wire::WireFrame& f) {
                        if (stop.load()) return false;
                        if (f.type != wire::FrameType::deliver) return !stop.load();
                        if (auto* gate = agg->ingest_gate()) {
                            if (!gate->acquire()) return false;
                        }
                        auto delivered = wire::frame_to_element(f);
                        if (!delivered) return !stop.load();
                        const auto& e = delivered.value().element;
                        const std::int64_t t = now_ms();
                        if (accepting.load()) {
                            log.append({"deliver",
                                        std::to_string(k) + "#" + std::to_string(e.seq), k,
                                        e.sensor, t, "ok", 1});
                            rtt.add(t - e.timestamp_ms);
                        }
                        last_seen = e.seq;
                        backoff.reset();
                        return !stop.load();
                    });
                    (void)outcome;
                    if (stop.load()) return;
                    sleep_until_ms(now_ms() + backoff.next_delay_ms(), stop);
                }
            });
        }
    } else { // push
        agg->set_deliver_sink([&](const std::string& id, const wire::DeliveredElement& d) {
            if (!accepting.load()) return;
            const std::int64_t k = stream_of_sub_id(id);
            if (k < 0) return;
            const std::int64_t t = now_ms();
            log.append({"deliver", std::to_string(k) + "#" + std::to_string(d.element.seq), k,
                        d.element.sensor, t, "ok", 1});
            rtt.add(t - d.element.timestamp_ms);
        });
        for (int k = 0; k < total_streams; ++k) {
            wire::PeerClient cli(children[static_cast<size_t>(client_of(k))].address, 5000);
            wire::WireFrame sub;
            sub.type = wire::FrameType::subscribe;
            sub.id = "sub-" + std::to_string(k);
            sub.body["sensor"] = sensor_of(k);
            sub.body["mode"] = "push";
            sub.body["subscriber"] = agg->address();
            sub.body["sub"] = sub_id_of(k);
            sub.body["persistent_delivery"] = true;
            auto ack = cli.post_frame("/subscribe", sub);
            if (!ack) {
                stop.store(true);
                teardown();
                return core::Error{ack.error().code,
                                   "subscribing stream " + std::to_string(k) + ": " +
                                       ack.error().message};
            }
            ++summary.subscriptions;
        }
    }

    sleep_until_ms(t_end, stop); // the measured window
    log.append({"run_end", "", -1, "", now_ms(), "", 0});
    accepting.store(false);

    // When production is finite, let in-flight push deliveries settle so the
    // producer/consumer counters can be compared exactly.
    if (spec.mode == "push" && spec.tick_limit > 0) {
        std::int64_t last = -1;
        for (int i = 0; i < 240; ++i) {
            std::int64_t delivered = 0;
            bool all_done = true;
            for (const auto& c : children) {
                auto s = status_of(c.address);
                if (!s) continue;
                delivered += s.value().push_delivered;
                all_done = all_done && s.value().sampling_done;
            }
            if (all_done && delivered == last) break;
            last = delivered;
            sleep_ms(500);
        }
    }

    // Client counters must be read while the children are still alive.
    for (const auto& c : children) {
        auto s = status_of(c.address);
        if (s) {
            summary.clients.elements_stored += s.value().elements_stored;
            summary.clients.push_attempts += s.value().push_attempts;
            summary.clients.push_connections += s.value().push_connections;
            summary.clients.push_delivered += s.value().push_delivered;
            summary.clients.push_bytes_out += s.value().push_bytes_out;
            summary.clients.stream_connections += s.value().stream_connections;
            summary.clients.stream_frames += s.value().stream_frames;
            summary.clients.stream_wire_bytes += s.value().stream_wire_bytes;
        }
    }
    const auto agg_work = agg->work();
    summary.agg_deliver_received = agg_work.deliver_received;
    summary.agg_deliver_throttled = agg_work.deliver_throttled;

    stop.store(true);
    {
        std::lock_guard lock(readers_mu);
        for (auto& r : readers) r->stop();
    }
    for (auto& t : workers) {
        if (t.joinable()) t.join();
    }
    log.close();
    teardown();

    auto metrics = compute_metrics(log.rows());
    if (!metrics) return metrics.error();
    summary.metrics = metrics.take();
    summary.mean_rtt_ms = rtt.mean();
    summary.rtt_samples = rtt.n.load();

    SummaryExtras extras = {
        {"mean_rtt_ms", format_double(summary.mean_rtt_ms)},
        {"rtt_samples", std::to_string(summary.rtt_samples)},
        {"subscriptions", std::to_string(summary.subscriptions)},
        {"agg_deliver_received", std::to_string(summary.agg_deliver_received)},
        {"agg_deliver_throttled", std::to_string(summary.agg_deliver_throttled)},
        {"client_push_attempts", std::to_string(summary.clients.push_attempts)},
        {"client_push_connections", std::to_string(summary.clients.push_connections)},
        {"client_push_delivered", std::to_string(summary.clients.push_delivered)},
        {"client_push_bytes_out", std::to_string(summary.clients.push_bytes_out)},
        {"client_stream_connections", std::to_string(summary.clients.stream_connections)},
        {"client_stream_frames", std::to_string(summary.clients.stream_frames)},
        {"client_stream_wire_bytes", std::to_string(summary.clients.stream_wire_bytes)},
    };
    auto paths = emit_report(spec.out_dir, spec.run_id, summary.metrics, extras);
    if (!paths) return paths.error();
    summary.paths = paths.take();
    return summary;
}

core::Result<StorageReport> storage_experiment(const StorageSpec& spec) {
    if (spec.capacity < 1 || spec.inserts < 1) {
        return core::make_error(code::kBadRunSpec, "capacity and inserts must be positive");
    }
    storage::WindowStore store("bench", static_cast<size_t>(spec.capacity));
    std::mt19937_64 rng(spec.seed);
    // Values are odd multiples of 2^-16 in [0.1, 1): such doubles always
    // serialize to exactly 18 characters, so records all have the same wire
    // size apart from the sequence-number digits. Fixed-size records are the
    // usual storage-benchmark unit; they make the growth series exactly
    // piecewise linear (constant slope, then a flat plateau).
    auto fixed_width_value = [&] {
        const std::uint64_t m = 3277 + rng() % (32768 - 3277);
        return static_cast<double>(2 * m + 1) / 65536.0;
    };

    StorageReport report;
    report.capacity = spec.capacity;
    report.rows.reserve(static_cast<size_t>(spec.inserts));

    const std::int64_t t0 = 1700000000000; // fixed virtual epoch; clock is stepped
    for (std::int64_t k = 0; k < spec.inserts; ++k) {
        core::StreamElement e;
        e.sensor = "bench";
        e.seq = k;
        e.timestamp_ms = t0 + k * spec.step_ms;
        e.values = {core::Value{fixed_width_value()}, core::Value{fixed_width_value()},
                    core::Value{fixed_width_value()}};
        report.max_element_bytes = std::max(
            report.max_element_bytes, static_cast<std::int64_t>(storage::element_wire_size(e)));
        auto inserted = store.insert(std::move(e));
        if (!inserted) return inserted.error();
        report.rows.push_back({k + 1, static_cast<std::int64_t>(store.count()),
                               static_cast<std::int64_t>(store.bytes_estimate())});
    }

    if (!spec.out_dir.empty()) {
        auto made = ensure_dir(spec.out_dir);
        if (!made) return made.error();
        report.storage_csv = spec.out_dir + "/storage.csv";
        std::ofstream out(report.storage_csv, std::ios::trunc);
        if (!out) return core::make_error(code::kBadRunSpec, "cannot write " + report.storage_csv);
        out << "inserted,count,bytes\n";
        for (const auto& r : report.rows) {
            out << r.inserted << ',' << r.count << ',' << r.bytes << '\n';
        }
    }
    return report;
}

core::Result<AutonomyReport> autonomy_experiment(const AutonomySpec& spec) {
    if (spec.out_dir.empty() || spec.node_binary.empty()) {
        return core::make_error(code::kBadRunSpec, "out_dir and node_binary are required");
    }
    auto made = ensure_dir(spec.out_dir);
    if (!made) return made.error();

    FixtureOptions fo;
    fo.sampling_interval_ms = spec.sampling_interval_ms;
    fo.history_size = spec.history_size;
    fo.tick_limit = spec.tick_limit;

    wire::NodeConfig agg_cfg;
    agg_cfg.node_id = "agg";
    agg_cfg.listen = "127.0.0.1:0";
    auto agg = node::Node::start(agg_cfg);
    if (!agg) return agg.error();
    const std::string agg_listen = agg.value()->address();

    // Identically seeded client and twin: same client_index, same seed. Both
    // register with the coordinator that the experiment later kills.
    wire::NodeConfig primary_cfg;
    primary_cfg.node_id = "primary";
    primary_cfg.listen = "127.0.0.1:0";
    primary_cfg.coordinator = agg_listen;
    primary_cfg.heartbeat_interval_s = 2;
    primary_cfg.sensors = client_fixture(0, spec.seed, fo);
    wire::NodeConfig twin_cfg = primary_cfg;
    twin_cfg.node_id = "twin";

    auto primary = spawn_node(spec.node_binary, primary_cfg, spec.out_dir);
    if (!primary) {
        agg.value()->stop();
        return primary.error();
    }
    auto twin = spawn_node(spec.node_binary, twin_cfg, spec.out_dir);
    if (!twin) {
        stop_node(primary.value());
        agg.value()->stop();
        return twin.error();
    }
    auto cleanup = [&] {
        stop_node(primary.value());
        stop_node(twin.value());
    };

    AutonomyReport report;
    std::mutex seqs_mu;
    std::atomic<std::int64_t> last_seen{wire::kNoResumeClaim};
    std::atomic<std::int64_t> gap_frames{0};
    const std::int64_t final_seq = static_cast<std::int64_t>(spec.tick_limit) - 1;

    auto record = [&](const wire::WireFrame& f) {
        if (f.type != wire::FrameType::deliver) return true;
        auto d = wire::frame_to_element(f);
        if (!d) return true;
        {
            std::lock_guard lock(seqs_mu);
            report.received_seqs.push_back(d.value().element.seq);
        }
        if (d.value().gap > 0) gap_frames.fetch_add(1);
        last_seen.store(d.value().element.seq);
        return d.value().element.seq < final_seq;
    };

    // Phase 1: stream until the outage moment, then kill the aggregator side.
    auto reader1 = std::make_shared<wire::StreamReader>(primary.value().address, "temp", "auto1");
    std::thread phase1([&] { (void)reader1->run(-1, record); });
    sleep_ms(spec.connected_ms);
    reader1->stop();
    agg.value()->stop(); // the aggregator process state dies with its node
    phase1.join();

    // Outage: the client must keep sampling and answering local queries.
    {
        const std::int64_t outage_end = now_ms() + spec.outage_ms;
        auto before = status_of(primary.value().address);
        report.stored_before_outage = before ? before.value().elements_stored : -1;
        bool queries_ok = before.ok();
        wire::PeerClient local(primary.value().address, 3000);
        while (now_ms() < outage_end) {
            sleep_ms(std::min<std::int64_t>(5000, std::max<std::int64_t>(outage_end - now_ms(), 1)));
            auto q = local.latest("temp", 1, "during-outage");
            queries_ok = queries_ok && q.ok();
        }
        auto after = status_of(primary.value().address);
        report.stored_after_outage = after ? after.value().elements_stored : -1;
        report.local_queries_during_outage =
            queries_ok && report.stored_after_outage > report.stored_before_outage;
    }

    // Recovery: a fresh aggregator on the same address resumes the stream
    // from the subscriber's cursor.
    {
        wire::NodeConfig again = agg_cfg;
        again.listen = agg_listen;
        auto restarted = node::Node::start(again);
        if (!restarted) {
            cleanup();
            return restarted.error();
        }
        agg = std::move(restarted);
    }
    auto reader2 = std::make_shared<wire::StreamReader>(primary.value().address, "temp", "auto1");
    std::thread phase2([&] { (void)reader2->run(last_seen.load(), record); });
    const std::int64_t catchup_deadline =
        now_ms() + static_cast<std::int64_t>(spec.tick_limit) * spec.sampling_interval_ms + 30000;
    while (last_seen.load() < final_seq && now_ms() < catchup_deadline) sleep_ms(100);
    reader2->stop();
    phase2.join();

    report.gap_frames = gap_frames.load();
    report.seqs_contiguous = !report.received_seqs.empty();
    for (size_t i = 0; i < report.received_seqs.size(); ++i) {
        if (report.received_seqs[i] != static_cast<std::int64_t>(i)) {
            report.seqs_contiguous = false;
            if (report.detail.empty()) {
                report.detail = "position " + std::to_string(i) + " holds seq " +
                                std::to_string(report.received_seqs[i]);
            }
            break;
        }
    }

    // Wait out both samplers, then compare windows element by element.
    {
        const std::int64_t done_deadline = now_ms() + 60000;
        for (const auto* child : {&primary.value(), &twin.value()}) {
            while (now_ms() < done_deadline) {
                auto s = status_of(child->address);
                if (s && s.value().sampling_done) break;
                sleep_ms(200);
            }
        }
    }
    report.windows_equal = true;
    wire::PeerClient primary_cli(primary.value().address, 5000);
    wire::PeerClient twin_cli(twin.value().address, 5000);
    for (const auto& sensor : fixture_sensor_names()) {
        auto a = primary_cli.latest(sensor, spec.history_size, "cmp-a-" + sensor);
        auto b = twin_cli.latest(sensor, spec.history_size, "cmp-b-" + sensor);
        if (!a || !b) {
            report.windows_equal = false;
            report.detail = "window fetch failed for " + sensor;
            break;
        }
        if (a.value().elements.size() != b.value().elements.size()) {
            report.windows_equal = false;
            report.detail = sensor + ": window sizes differ";
            break;
        }
        for (size_t i = 0; i < a.value().elements.size(); ++i) {
            const auto& ea = a.value().elements[i].element;
            const auto& eb = b.value().elements[i].element;
            // Timestamps are start-relative wall time and legitimately differ
            // between the twins; identity is (seq, values).
            if (ea.seq != eb.seq || ea.values != eb.values) {
                report.windows_equal = false;
                report.detail = sensor + "#" + std::to_string(ea.seq) + ": twin divergence";
                break;
            }
        }
        if (!report.windows_equal) break;
        ++report.windows_compared;
    }

    agg.value()->stop();
    cleanup();
    return report;
}

core::Result<Metrics> recompute_metrics(const std::string& events_path) {
    auto rows = read_event_log(events_path);
    if (!rows) return rows.error();
    return compute_metrics(rows.value());
}

} // namespace sensemesh::harness
