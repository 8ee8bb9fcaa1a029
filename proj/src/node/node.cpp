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

#include "sensemesh/node/node.hpp"

#include "sensemesh/core/validate.hpp"
#include "sensemesh/node/backoff.hpp"
#include "sensemesh/wire/frame.hpp"

#include <httplib.h>

#include <algorithm>
#include <sstream>

namespace sensemesh::node {

namespace {

constexpr int kServerPoolSize = 96;

/// Bytes httplib adds around one chunk of n payload bytes: "<hex>\r\n" before
/// and "\r\n" after.
size_t chunk_overhead(size_t n) {
    size_t hex_digits = 1;
    while (n >= 16) {
        n /= 16;
        ++hex_digits;
    }
    return hex_digits + 4;
}

std::string frames_body(const std::vector<wire::WireFrame>& frames) {
    std::string body;
    for (const auto& f : frames) {
        body += wire::encode_frame(f);
        body += '\n';
    }
    return body;
}

void respond_frame(httplib::Response& res, const wire::WireFrame& frame) {
    res.set_content(wire::encode_frame(frame) + "\n", "application/x-ndjson");
}

void respond_error(httplib::Response& res, const std::string& id, const std::string& code,
                   const std::string& message) {
    respond_frame(res, wire::make_error_frame(id, code, message));
}

} // namespace

const char* to_string(DeliveryMode m) {
    return m == DeliveryMode::persistent_stream ? "persistent_stream" : "push";
}

core::Result<DeliveryMode> delivery_mode_from_string(const std::string& s) {
    if (s == "persistent_stream") return DeliveryMode::persistent_stream;
    if (s == "push") return DeliveryMode::push;
    return core::make_error(wire::code::kBadRequest, "unknown delivery mode '" + s + "'");
}

Node::Node(wire::NodeConfig config)
    : config_(std::move(config)), registry_(sources::PluginRegistry::with_builtins()),
      queue_(config_.queue_bound) {
    if (config_.ingest_limit_per_s > 0) {
        ingest_gate_ = std::make_unique<TokenBucket>(static_cast<double>(config_.ingest_limit_per_s));
    }
}

core::Result<std::unique_ptr<Node>> Node::start(const wire::NodeConfig& config) {
    std::unique_ptr<Node> node(new Node(config));
    auto init = node->init();
    if (!init) {
        node->stop();
        return init.error();
    }
    return node;
}

core::Result<void> Node::init() {
    started_at_ms_ = clock_.now_ms();
    if (config_.plugin_dir) {
        // With a plugin directory the advertised set is exactly what the
        // directory's descriptor files declare (they may refine builtin
        // metadata); without one the node offers the builtin set.
        auto discovered = sources::PluginRegistry::from_directory(*config_.plugin_dir);
        if (!discovered) return discovered.error();
        registry_ = discovered.take();
    }

    auto sensors = build_sensors();
    if (!sensors) return sensors.error();

    auto serve = bind_and_serve();
    if (!serve) return serve.error();

    sampler_thread_ = std::thread([this] { sampler_loop(); });
    drain_thread_ = std::thread([this] { drain_loop(); });
    if (config_.coordinator) {
        register_thread_ = std::thread([this] { register_loop(); });
    }
    return core::Result<void>::success();
}

core::Result<void> Node::build_sensors() {
    core::RegistryView view;
    view.plugins = registry_.names();
    view.processors = processing::processor_names();

    core::ValidationResult all;
    std::set<std::string> names;
    for (const auto& cfg : config_.sensors) {
        auto result = core::validate_config(cfg, view);
        for (auto& v : result.violations) {
            all.add(v.code, "sensor '" + cfg.name + "': " + v.message);
        }
        if (!names.insert(cfg.name).second) {
            all.add(core::violation::kNameInvalid, "duplicate sensor name '" + cfg.name + "'");
        }
    }
    if (!all.ok()) {
        std::string message;
        for (const auto& v : all.violations) {
            if (!message.empty()) message += "; ";
            message += v.code;
            message += ": ";
            message += v.message;
        }
        return core::make_error(code::kConfigInvalid, message);
    }

    const std::int64_t start_ms = clock_.now_ms();
    for (const auto& cfg : config_.sensors) {
        auto runtime = std::make_unique<SensorRuntime>();
        runtime->cfg = cfg;

        auto src = registry_.instantiate(cfg.source.plugin, cfg.source.params);
        if (!src) {
            return core::make_error(code::kConfigInvalid,
                                    "sensor '" + cfg.name + "': " + src.error().code + ": " +
                                        src.error().message);
        }
        runtime->source = src.take();

        auto lookup = [this](const std::string& sensor)
            -> std::optional<std::vector<core::Value>> {
            auto store = stores_.get(sensor);
            if (!store) return std::nullopt;
            auto latest = store->latest();
            if (!latest) return std::nullopt;
            return latest->values;
        };
        auto chain = processing::make_chain(cfg.processors, lookup);
        if (!chain) {
            return core::make_error(code::kConfigInvalid,
                                    "sensor '" + cfg.name + "': " + chain.error().code + ": " +
                                        chain.error().message);
        }
        runtime->chain = chain.take();

        std::string spill;
        if (cfg.spill_log && config_.spill_dir) {
            spill = *config_.spill_dir + "/" + config_.node_id + "_" + cfg.name + ".spill";
        }
        runtime->store = std::make_shared<storage::WindowStore>(cfg.name, cfg.history_size, spill);
        stores_.add(runtime->store);

        runtime->next_due_ms = start_ms + cfg.sampling_interval_ms;
        sensors_.push_back(std::move(runtime));
    }
    return core::Result<void>::success();
}

core::Result<void> Node::bind_and_serve() {
    auto hp = wire::split_address(config_.listen);
    if (!hp) return hp.error();
    const auto& [host, want_port] = hp.value();

    server_ = std::make_unique<httplib::Server>();
    server_->new_task_queue = [] { return new httplib::ThreadPool(kServerPoolSize); };
    // SO_REUSEADDR alone: restarts reclaim TIME_WAIT ports, but binding a
    // port another live node holds must fail loudly, so no SO_REUSEPORT.
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                   sizeof(yes));
    });
    install_endpoints();

    if (want_port == 0) {
        port_ = server_->bind_to_any_port(host);
        if (port_ < 0) {
            return core::make_error(code::kAddressInUse, "cannot bind on " + host);
        }
    } else {
        if (!server_->bind_to_port(host, want_port)) {
            return core::make_error(code::kAddressInUse, config_.listen + " is already in use");
        }
        port_ = want_port;
    }
    address_ = host + ":" + std::to_string(port_);

    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return core::Result<void>::success();
}

void Node::install_endpoints() {
    auto& svr = *server_;

    svr.Post("/hello", [this](const httplib::Request& req, httplib::Response& res) {
        auto frames = wire::parse_frame_lines(req.body);
        if (!frames || frames.value().empty()) {
            respond_error(res, "", wire::code::kBadFrame, "body must be one hello frame");
            return;
        }
        const auto& f = frames.value().front();
        const std::string version = f.body.value("version", std::string());
        if (version != wire::kProtocolVersion) {
            respond_error(res, f.id, wire::code::kVersionMismatch,
                          "peer speaks version '" + version + "', this node speaks '" +
                              wire::kProtocolVersion + "'");
            return;
        }
        respond_frame(res, wire::make_hello(f.id, config_.node_id));
    });

    svr.Post("/register", [this](const httplib::Request& req, httplib::Response& res) {
        auto frames = wire::parse_frame_lines(req.body);
        if (!frames || frames.value().empty() ||
            frames.value().front().type != wire::FrameType::register_) {
            respond_error(res, "", wire::code::kBadFrame, "body must be one register frame");
            return;
        }
        const auto& f = frames.value().front();
        PeerRegistration reg;
        reg.node_id = f.body.value("node", std::string());
        reg.address = f.body.value("address", std::string());
        reg.registered_at_ms = clock_.now_ms();
        if (reg.node_id.empty() || reg.address.empty() || !f.body.contains("sensors") ||
            !f.body.at("sensors").is_array()) {
            respond_error(res, f.id, wire::code::kBadRequest,
                          "register needs node, address and a sensors list");
            return;
        }
        for (const auto& js : f.body.at("sensors")) {
            const std::string name = js.value("name", std::string());
            core::Schema schema;
            if (js.contains("output_schema")) {
                auto parsed = wire::schema_from_json(js.at("output_schema"));
                if (!parsed) {
                    respond_error(res, f.id, wire::code::kBadRequest, parsed.error().message);
                    return;
                }
                schema = parsed.take();
            }
            reg.sensors.emplace_back(name, std::move(schema));
        }
        size_t count = 0;
        {
            std::lock_guard lock(peers_mu_);
            peers_[reg.node_id] = std::move(reg);
            count = peers_.size();
        }
        wire::WireFrame ack;
        ack.type = wire::FrameType::register_ack;
        ack.id = f.id;
        ack.body["node"] = config_.node_id;
        ack.body["peers"] = count;
        respond_frame(res, ack);
    });

    svr.Get("/sensors", [this](const httplib::Request&, httplib::Response& res) {
        wire::WireFrame f;
        f.type = wire::FrameType::sensor_list;
        f.id = "sensors";
        auto arr = nlohmann::json::array();
        for (const auto& s : sensors_) {
            arr.push_back({{"name", s->cfg.name},
                           {"output_schema", wire::to_json(s->cfg.output_schema)}});
        }
        f.body["count"] = arr.size();
        f.body["sensors"] = std::move(arr);
        respond_frame(res, f);
    });

    svr.Get("/peers", [this](const httplib::Request&, httplib::Response& res) {
        wire::WireFrame f;
        f.type = wire::FrameType::sensor_list;
        f.id = "peers";
        auto arr = nlohmann::json::array();
        {
            std::lock_guard lock(peers_mu_);
            for (const auto& [_, reg] : peers_) {
                auto sensors = nlohmann::json::array();
                for (const auto& [name, schema] : reg.sensors) {
                    sensors.push_back({{"name", name}, {"output_schema", wire::to_json(schema)}});
                }
                arr.push_back({{"node", reg.node_id},
                               {"address", reg.address},
                               {"registered_at", reg.registered_at_ms},
                               {"sensors", std::move(sensors)}});
            }
        }
        f.body["count"] = arr.size();
        f.body["peers"] = std::move(arr);
        respond_frame(res, f);
    });

    const auto answer_query = [this](httplib::Response& res, QueryJob&& job) {
        const std::string id = job.id;
        const std::string sensor = job.sensor;
        auto answer = enqueue_and_wait(std::move(job));
        if (!answer) {
            respond_error(res, id, answer.error().code, answer.error().message);
            return;
        }
        if (!answer.value().elements) {
            respond_error(res, id, answer.value().elements.error().code,
                          answer.value().elements.error().message);
            return;
        }
        const auto& elements = answer.value().elements.value();
        std::vector<wire::WireFrame> frames;
        wire::WireFrame head;
        head.type = wire::FrameType::query_result;
        head.id = id;
        head.body["sensor"] = sensor;
        head.body["count"] = elements.size();
        head.body["duration_us"] = answer.value().duration_us;
        frames.push_back(std::move(head));
        for (const auto& e : elements) {
            auto f = wire::element_to_frame(e, id);
            if (f) frames.push_back(f.take());
        }
        res.set_content(frames_body(frames), "application/x-ndjson");
    };

    svr.Get(R"(/sensor/([A-Za-z0-9_]+)/latest)",
            [this, answer_query](const httplib::Request& req, httplib::Response& res) {
                QueryJob job;
                job.sensor = req.matches[1];
                job.kind = QueryJob::Kind::latest_n;
                job.id = req.has_param("id") ? req.get_param_value("id")
                                             : "q" + std::to_string(++query_counter_);
                job.requester = req.remote_addr;
                job.n = 1;
                if (req.has_param("n")) {
                    try {
                        job.n = std::stoll(req.get_param_value("n"));
                    } catch (const std::exception&) {
                        respond_error(res, job.id, wire::code::kBadRequest, "n must be an integer");
                        return;
                    }
                }
                if (job.n < 1) {
                    respond_error(res, job.id, wire::code::kBadRequest, "n must be >= 1");
                    return;
                }
                answer_query(res, std::move(job));
            });

    svr.Get(R"(/sensor/([A-Za-z0-9_]+)/range)",
            [this, answer_query](const httplib::Request& req, httplib::Response& res) {
                QueryJob job;
                job.sensor = req.matches[1];
                job.kind = QueryJob::Kind::range;
                job.id = req.has_param("id") ? req.get_param_value("id")
                                             : "q" + std::to_string(++query_counter_);
                job.requester = req.remote_addr;
                if (!req.has_param("from") || !req.has_param("to")) {
                    respond_error(res, job.id, wire::code::kBadRequest,
                                  "range needs from and to");
                    return;
                }
                try {
                    job.from = std::stoll(req.get_param_value("from"));
                    job.to = std::stoll(req.get_param_value("to"));
                } catch (const std::exception&) {
                    respond_error(res, job.id, wire::code::kBadRequest,
                                  "from/to must be integers");
                    return;
                }
                answer_query(res, std::move(job));
            });

    svr.Post("/query", [this, answer_query](const httplib::Request& req, httplib::Response& res) {
        auto frames = wire::parse_frame_lines(req.body);
        if (!frames || frames.value().empty() ||
            frames.value().front().type != wire::FrameType::query) {
            respond_error(res, "", wire::code::kBadFrame, "body must be one query frame");
            return;
        }
        const auto& f = frames.value().front();
        QueryJob job;
        job.id = f.id.empty() ? "q" + std::to_string(++query_counter_) : f.id;
        job.sensor = f.body.value("sensor", std::string());
        job.requester = req.remote_addr;
        const std::string kind = f.body.value("kind", std::string("latest_n"));
        if (kind == "latest_n") {
            job.kind = QueryJob::Kind::latest_n;
            job.n = f.body.value("n", std::int64_t{1});
            if (job.n < 1) {
                respond_error(res, job.id, wire::code::kBadRequest, "n must be >= 1");
                return;
            }
        } else if (kind == "range") {
            job.kind = QueryJob::Kind::range;
            if (!f.body.contains("from") || !f.body.contains("to")) {
                respond_error(res, job.id, wire::code::kBadRequest, "range needs from and to");
                return;
            }
            job.from = f.body.value("from", std::int64_t{0});
            job.to = f.body.value("to", std::int64_t{0});
        } else {
            respond_error(res, job.id, wire::code::kBadRequest, "unknown query kind '" + kind + "'");
            return;
        }
        answer_query(res, std::move(job));
    });

    svr.Post("/subscribe", [this](const httplib::Request& req, httplib::Response& res) {
        auto frames = wire::parse_frame_lines(req.body);
        if (!frames || frames.value().empty() ||
            frames.value().front().type != wire::FrameType::subscribe) {
            respond_error(res, "", wire::code::kBadFrame, "body must be one subscribe frame");
            return;
        }
        const auto& f = frames.value().front();
        const std::string sensor = f.body.value("sensor", std::string());
        auto store = stores_.get(sensor);
        if (!store) {
            respond_error(res, f.id, wire::code::kSensorUnknown,
                          "no sensor '" + sensor + "' on this node");
            return;
        }
        auto mode = delivery_mode_from_string(f.body.value("mode", std::string()));
        if (!mode) {
            respond_error(res, f.id, mode.error().code, mode.error().message);
            return;
        }
        const std::string subscriber = f.body.value("subscriber", std::string());
        if (mode.value() == DeliveryMode::push && subscriber.empty()) {
            respond_error(res, f.id, wire::code::kBadRequest,
                          "push subscriptions need a subscriber address");
            return;
        }

        std::string sub_id = f.body.value("sub", std::string());
        if (sub_id.empty()) sub_id = "sub" + std::to_string(++sub_counter_);

        std::shared_ptr<Subscription> sub;
        bool fresh = false;
        {
            std::lock_guard lock(subs_mu_);
            auto it = subscriptions_.find(sub_id);
            if (it != subscriptions_.end()) {
                if (it->second->sensor != sensor) {
                    respond_error(res, f.id, wire::code::kBadRequest,
                                  "subscription '" + sub_id + "' already bound to sensor '" +
                                      it->second->sensor + "'");
                    return;
                }
                sub = it->second;
            } else {
                sub = std::make_shared<Subscription>();
                sub->id = sub_id;
                sub->sensor = sensor;
                sub->subscriber = subscriber;
                sub->mode = mode.value();
                sub->persistent_delivery = f.body.value("persistent_delivery", true);
                sub->created_at_ms = clock_.now_ms();
                sub->cursor.store(static_cast<std::int64_t>(store->total_inserted()) - 1);
                subscriptions_[sub_id] = sub;
                fresh = true;
            }
        }
        if (fresh && sub->mode == DeliveryMode::push) {
            push_threads_.emplace_back([this, sub] { push_worker(sub); });
        }

        wire::WireFrame ack;
        ack.type = wire::FrameType::subscribe_ack;
        ack.id = f.id;
        ack.body["sub"] = sub->id;
        ack.body["sensor"] = sensor;
        ack.body["mode"] = to_string(sub->mode);
        ack.body["cursor"] = sub->cursor.load();
        respond_frame(res, ack);
    });

    svr.Get(R"(/sensor/([A-Za-z0-9_]+)/stream)",
            [this](const httplib::Request& req, httplib::Response& res) {
                const std::string sensor = req.matches[1];
                auto store = stores_.get(sensor);
                if (!store) {
                    respond_error(res, "", wire::code::kSensorUnknown,
                                  "no sensor '" + sensor + "' on this node");
                    return;
                }
                if (!req.has_param("sub")) {
                    respond_error(res, "", wire::code::kBadRequest, "stream needs a sub id");
                    return;
                }
                const std::string sub_id = req.get_param_value("sub");
                auto sub = upsert_stream_subscription(sub_id, sensor);
                if (req.has_param("resume_from")) {
                    try {
                        // The subscriber's acknowledgment cursor wins: rewind
                        // (or advance) to exactly what it reports received.
                        sub->cursor.store(std::stoll(req.get_param_value("resume_from")));
                    } catch (const std::exception&) {
                        respond_error(res, "", wire::code::kBadRequest,
                                      "resume_from must be an integer");
                        return;
                    }
                }
                const std::int64_t epoch = sub->epoch.fetch_add(1) + 1;
                counters_.stream_connections.fetch_add(1);

                auto last_activity = std::make_shared<std::int64_t>(clock_.now_ms());
                res.set_chunked_content_provider(
                    "application/x-ndjson",
                    [this, sub, store, epoch, last_activity](size_t, httplib::DataSink& sink) {
                        return stream_step(*sub, *store, epoch, *last_activity, sink);
                    });
            });

    svr.Post("/deliver", [this](const httplib::Request& req, httplib::Response& res) {
        auto frames = wire::parse_frame_lines(req.body);
        if (!frames || frames.value().empty() ||
            frames.value().front().type != wire::FrameType::deliver) {
            respond_error(res, "", wire::code::kBadFrame, "body must be one deliver frame");
            return;
        }
        const auto& f = frames.value().front();
        if (ingest_gate_ && !ingest_gate_->try_acquire()) {
            counters_.deliver_throttled.fetch_add(1);
            respond_error(res, f.id, wire::code::kThrottled,
                          "ingest limit reached, retry later");
            return;
        }
        auto delivered = wire::frame_to_element(f);
        if (!delivered) {
            respond_error(res, f.id, delivered.error().code, delivered.error().message);
            return;
        }
        counters_.deliver_received.fetch_add(1);
        {
            std::lock_guard lock(sink_mu_);
            if (deliver_sink_) deliver_sink_(f.id, delivered.value());
        }
        wire::WireFrame ack;
        ack.type = wire::FrameType::deliver_ack;
        ack.id = f.id;
        ack.body["sensor"] = delivered.value().element.sensor;
        ack.body["seq"] = delivered.value().element.seq;
        respond_frame(res, ack);
    });

    svr.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
        const auto w = work();
        wire::WireFrame f;
        f.type = wire::FrameType::status;
        f.id = "status";
        f.body["node"] = config_.node_id;
        f.body["version"] = wire::kProtocolVersion;
        f.body["sensors"] = sensors_.size();
        f.body["queue_depth"] = queue_.depth();
        f.body["uptime_ms"] = clock_.now_ms() - started_at_ms_;
        f.body["ticks"] = w.ticks;
        f.body["elements_stored"] = w.elements_stored;
        f.body["elements_filtered"] = w.elements_filtered;
        f.body["sample_errors"] = w.sample_errors;
        f.body["seq_gaps"] = w.seq_gaps;
        f.body["queries_answered"] = w.queries_answered;
        f.body["queries_rejected"] = w.queries_rejected;
        f.body["deliver_received"] = w.deliver_received;
        f.body["deliver_throttled"] = w.deliver_throttled;
        f.body["push_attempts"] = w.push_attempts;
        f.body["push_connections"] = w.push_connections;
        f.body["push_delivered"] = w.push_delivered;
        f.body["push_bytes_out"] = w.push_bytes_out;
        f.body["push_bytes_in"] = w.push_bytes_in;
        f.body["stream_connections"] = w.stream_connections;
        f.body["stream_frames"] = w.stream_frames;
        f.body["stream_payload_bytes"] = w.stream_payload_bytes;
        f.body["stream_wire_bytes"] = w.stream_wire_bytes;
        f.body["heartbeats"] = w.heartbeats;
        f.body["sampling_done"] = sampling_done();
        respond_frame(res, f);
    });
}

bool Node::stream_step(Subscription& sub, storage::WindowStore& store, std::int64_t epoch,
                       std::int64_t& last_activity_ms, httplib::DataSink& sink) {
    if (stopping_.load() || !sub.active.load() || sub.epoch.load() != epoch) return false;
    if (!sink.is_writable()) return false;

    const std::int64_t heartbeat_ms = config_.heartbeat_interval_s * 1000;
    const auto deadline = clock_.steady_for(last_activity_ms + heartbeat_ms);

    {
        std::unique_lock lock(wake_mu_);
        wake_cv_.wait_until(lock, deadline, [&] {
            return stopping_.load() || sub.epoch.load() != epoch ||
                   static_cast<std::int64_t>(store.total_inserted()) - 1 > sub.cursor.load();
        });
    }
    if (stopping_.load() || !sub.active.load() || sub.epoch.load() != epoch) return false;

    auto batch = store.get_since(sub.cursor.load());
    if (batch.empty()) {
        if (clock_.now_ms() - last_activity_ms >= heartbeat_ms) {
            wire::WireFrame hb;
            hb.type = wire::FrameType::status;
            hb.id = sub.id;
            hb.body["heartbeat"] = true;
            hb.body["ts"] = clock_.now_ms();
            const std::string line = wire::encode_frame(hb) + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            counters_.heartbeats.fetch_add(1);
            counters_.stream_wire_bytes.fetch_add(
                static_cast<std::int64_t>(line.size() + chunk_overhead(line.size())));
            last_activity_ms = clock_.now_ms();
        }
        return true;
    }

    for (const auto& e : batch) {
        if (stopping_.load() || sub.epoch.load() != epoch) return false;
        const std::int64_t gap = e.seq - sub.cursor.load() - 1;
        auto frame = wire::element_to_frame(e, sub.id, gap);
        if (!frame) continue; // cannot happen for validated elements
        const std::string line = wire::encode_frame(frame.value()) + "\n";
        if (!sink.write(line.data(), line.size())) {
            // Transport-level ack failed: cursor stays, reconnect resumes here.
            return false;
        }
        sub.cursor.store(e.seq);
        sub.delivered.fetch_add(1);
        counters_.stream_frames.fetch_add(1);
        counters_.stream_payload_bytes.fetch_add(static_cast<std::int64_t>(line.size() - 1));
        counters_.stream_wire_bytes.fetch_add(
            static_cast<std::int64_t>(line.size() + chunk_overhead(line.size())));
    }
    last_activity_ms = clock_.now_ms();
    return true;
}

std::shared_ptr<Subscription> Node::find_subscription(const std::string& id) {
    std::lock_guard lock(subs_mu_);
    auto it = subscriptions_.find(id);
    return it == subscriptions_.end() ? nullptr : it->second;
}

std::shared_ptr<Subscription> Node::upsert_stream_subscription(const std::string& id,
                                                               const std::string& sensor) {
    std::lock_guard lock(subs_mu_);
    auto it = subscriptions_.find(id);
    if (it != subscriptions_.end()) return it->second;
    auto sub = std::make_shared<Subscription>();
    sub->id = id;
    sub->sensor = sensor;
    sub->mode = DeliveryMode::persistent_stream;
    sub->persistent_delivery = true;
    sub->created_at_ms = clock_.now_ms();
    auto store = stores_.get(sensor);
    sub->cursor.store(store ? static_cast<std::int64_t>(store->total_inserted()) - 1 : -1);
    subscriptions_[id] = sub;
    return sub;
}

core::Result<QueryAnswer> Node::enqueue_and_wait(QueryJob&& job) {
    job.enqueued_at_ms = clock_.now_ms();
    auto future = job.promise.get_future();
    if (!queue_.push(std::move(job))) {
        counters_.queries_rejected.fetch_add(1);
        return core::make_error(wire::code::kQueueFull, "query queue is full, retry later");
    }
    const auto wait = std::chrono::milliseconds(config_.request_timeout_ms);
    if (future.wait_for(wait) != std::future_status::ready) {
        return core::make_error(wire::code::kTimeout, "query not answered in time");
    }
    return future.get();
}

void Node::drain_loop() {
    while (true) {
        auto job = queue_.pop();
        if (!job) return;
        QueryAnswer answer;
        const auto t0 = std::chrono::steady_clock::now();
        auto store = stores_.get(job->sensor);
        if (!store) {
            answer.elements = core::make_error(wire::code::kSensorUnknown,
                                               "no sensor '" + job->sensor + "' on this node");
        } else if (job->kind == QueryJob::Kind::latest_n) {
            answer.elements = store->query_latest(static_cast<size_t>(job->n));
        } else {
            auto r = store->query_range(job->from, job->to);
            if (r) {
                answer.elements = r.take();
            } else {
                answer.elements = r.error();
            }
        }
        answer.duration_us = std::chrono::duration_cast<std::chrono::microseconds>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
        counters_.queries_answered.fetch_add(1);
        job->promise.set_value(std::move(answer));
    }
}

void Node::sampler_loop() {
    while (!stopping_.load()) {
        SensorRuntime* next = nullptr;
        for (auto& s : sensors_) {
            if (s->finished.load()) continue;
            if (!next || s->next_due_ms < next->next_due_ms) next = s.get();
        }
        if (!next) {
            // Nothing left to schedule; sleep until stopped.
            std::unique_lock lock(wake_mu_);
            wake_cv_.wait(lock, [&] { return stopping_.load(); });
            return;
        }
        {
            std::unique_lock lock(wake_mu_);
            wake_cv_.wait_until(lock, clock_.steady_for(next->next_due_ms),
                                [&] { return stopping_.load(); });
        }
        if (stopping_.load()) return;

        const std::int64_t now = clock_.now_ms();
        for (auto& s : sensors_) {
            if (s->finished.load()) continue;
            // Catch up every owed tick at its nominal time so counts and
            // source determinism are unaffected by scheduling delay.
            while (!s->finished.load() && s->next_due_ms <= now) {
                tick_sensor(*s, s->next_due_ms);
                s->next_due_ms += s->cfg.sampling_interval_ms;
                ++s->ticks_done;
                if (s->cfg.tick_limit > 0 &&
                    s->ticks_done >= static_cast<std::int64_t>(s->cfg.tick_limit)) {
                    s->finished.store(true);
                }
                if (stopping_.load()) return;
            }
        }
    }
}

void Node::tick_sensor(SensorRuntime& s, std::int64_t due_ms) {
    counters_.ticks.fetch_add(1);
    auto sampled = s.source->sample(due_ms);
    if (!sampled) {
        if (sampled.error().code == sources::code::kSourceExhausted) {
            s.finished.store(true);
        } else {
            counters_.sample_errors.fetch_add(1);
        }
        return;
    }
    auto outcome = s.chain.apply(sampled.value());
    if (outcome.was_filtered()) {
        counters_.elements_filtered.fetch_add(1);
        return;
    }
    if (outcome.failed()) {
        counters_.sample_errors.fetch_add(1);
        return;
    }

    core::StreamElement e;
    e.sensor = s.cfg.name;
    e.seq = static_cast<std::int64_t>(s.store->total_inserted());
    e.timestamp_ms = due_ms;
    e.values = outcome.take_values();

    if (!core::validate_element(e, s.cfg.output_schema).ok()) {
        counters_.sample_errors.fetch_add(1);
        return;
    }
    auto inserted = s.store->insert(std::move(e));
    if (!inserted) {
        counters_.seq_gaps.fetch_add(1);
        return;
    }
    counters_.elements_stored.fetch_add(1);
    wake_cv_.notify_all();
}

void Node::push_worker(std::shared_ptr<Subscription> sub) {
    auto store = stores_.get(sub->sensor);
    if (!store) return;
    Backoff backoff(std::hash<std::string>{}(sub->id));

    while (!stopping_.load() && sub->active.load()) {
        {
            std::unique_lock lock(wake_mu_);
            wake_cv_.wait(lock, [&] {
                return stopping_.load() || !sub->active.load() ||
                       static_cast<std::int64_t>(store->total_inserted()) - 1 > sub->cursor.load();
            });
        }
        if (stopping_.load() || !sub->active.load()) return;

        auto batch = store->get_since(sub->cursor.load());
        bool backoff_and_refetch = false;
        for (const auto& e : batch) {
            if (stopping_.load() || !sub->active.load()) return;
            const std::int64_t gap = e.seq - sub->cursor.load() - 1;
            auto frame =
                wire::element_to_frame(e, sub->id + "#" + std::to_string(e.seq), gap);
            if (!frame) continue;

            counters_.push_attempts.fetch_add(1);
            auto outcome = wire::push_deliver(sub->subscriber, frame.value(),
                                              static_cast<int>(config_.request_timeout_ms));
            counters_.push_bytes_out.fetch_add(static_cast<std::int64_t>(outcome.bytes_out));
            counters_.push_bytes_in.fetch_add(static_cast<std::int64_t>(outcome.bytes_in));
            if (outcome.connected) counters_.push_connections.fetch_add(1);

            const bool acked = outcome.response.ok() &&
                               outcome.response.value().type == wire::FrameType::deliver_ack;
            if (acked) {
                sub->cursor.store(e.seq);
                sub->delivered.fetch_add(1);
                counters_.push_delivered.fetch_add(1);
                backoff.reset();
                continue;
            }

            const bool throttled = outcome.response.ok() &&
                                   outcome.response.value().type == wire::FrameType::error &&
                                   outcome.response.value().body.value("code", std::string()) ==
                                       wire::code::kThrottled;
            if (!throttled && !sub->persistent_delivery) {
                // Non-persistent delivery: drop the backlog, resume with
                // whatever is current; the next frame will carry a gap count.
                sub->cursor.store(static_cast<std::int64_t>(store->total_inserted()) - 1);
                backoff_and_refetch = true;
                break;
            }
            backoff_and_refetch = true;
            break;
        }
        if (backoff_and_refetch) {
            const auto delay = backoff.next_delay_ms();
            std::unique_lock lock(wake_mu_);
            wake_cv_.wait_for(lock, std::chrono::milliseconds(delay),
                              [&] { return stopping_.load() || !sub->active.load(); });
        }
    }
}

void Node::register_loop() {
    const std::string coordinator = *config_.coordinator;
    Backoff backoff(std::hash<std::string>{}(config_.node_id));

    wire::WireFrame reg;
    reg.type = wire::FrameType::register_;
    reg.id = config_.node_id + "-reg";
    reg.body["node"] = config_.node_id;
    reg.body["address"] = address_;
    auto arr = nlohmann::json::array();
    for (const auto& s : sensors_) {
        arr.push_back(
            {{"name", s->cfg.name}, {"output_schema", wire::to_json(s->cfg.output_schema)}});
    }
    reg.body["sensors"] = std::move(arr);

    while (!stopping_.load()) {
        registration_attempts_.fetch_add(1);
        {
            wire::PeerClient cli(coordinator, 3000);
            auto ack = cli.post_frame("/register", reg);
            if (ack && ack.value().type == wire::FrameType::register_ack) {
                registered_.store(true);
                return;
            }
        }
        const auto delay = backoff.next_delay_ms();
        std::unique_lock lock(wake_mu_);
        wake_cv_.wait_for(lock, std::chrono::milliseconds(delay),
                          [&] { return stopping_.load(); });
    }
}

core::Result<FetchBatch> Node::fetch_remote(const std::string& peer, const std::string& sensor,
                                            std::int64_t n, int timeout_ms) {
    const int timeout =
        timeout_ms < 0 ? static_cast<int>(config_.request_timeout_ms) : timeout_ms;
    std::lock_guard lock(fetch_mu_);
    const std::string key = peer + "|" + std::to_string(timeout);
    auto& cli = fetch_clients_[key];
    if (!cli) cli = std::make_unique<wire::PeerClient>(peer, timeout);
    return cli->latest(sensor, n, "f" + std::to_string(++query_counter_));
}

bool Node::sampling_done() const {
    for (const auto& s : sensors_) {
        if (s->cfg.tick_limit > 0 && !s->finished.load()) return false;
    }
    return true;
}

std::vector<PeerRegistration> Node::peers() const {
    std::lock_guard lock(peers_mu_);
    std::vector<PeerRegistration> out;
    out.reserve(peers_.size());
    for (const auto& [_, reg] : peers_) out.push_back(reg);
    return out;
}

void Node::set_deliver_sink(
    std::function<void(const std::string&, const wire::DeliveredElement&)> sink) {
    std::lock_guard lock(sink_mu_);
    deliver_sink_ = std::move(sink);
}

WorkSnapshot Node::work() const {
    WorkSnapshot w;
    w.ticks = counters_.ticks.load();
    w.elements_stored = counters_.elements_stored.load();
    w.elements_filtered = counters_.elements_filtered.load();
    w.sample_errors = counters_.sample_errors.load();
    w.seq_gaps = counters_.seq_gaps.load();
    w.queries_answered = counters_.queries_answered.load();
    w.queries_rejected = counters_.queries_rejected.load();
    w.deliver_received = counters_.deliver_received.load();
    w.deliver_throttled = counters_.deliver_throttled.load();
    w.push_attempts = counters_.push_attempts.load();
    w.push_connections = counters_.push_connections.load();
    w.push_delivered = counters_.push_delivered.load();
    w.push_bytes_out = counters_.push_bytes_out.load();
    w.push_bytes_in = counters_.push_bytes_in.load();
    w.stream_connections = counters_.stream_connections.load();
    w.stream_frames = counters_.stream_frames.load();
    w.stream_payload_bytes = counters_.stream_payload_bytes.load();
    w.stream_wire_bytes = counters_.stream_wire_bytes.load();
    w.heartbeats = counters_.heartbeats.load();
    return w;
}

void Node::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;

    {
        std::lock_guard lock(subs_mu_);
        for (auto& [_, sub] : subscriptions_) sub->active.store(false);
    }
    wake_cv_.notify_all();
    queue_.stop();
    if (ingest_gate_) ingest_gate_->shutdown();
    if (server_) server_->stop();

    if (server_thread_.joinable()) server_thread_.join();
    if (sampler_thread_.joinable()) sampler_thread_.join();
    if (drain_thread_.joinable()) drain_thread_.join();
    if (register_thread_.joinable()) register_thread_.join();
    for (auto& t : push_threads_) {
        if (t.joinable()) t.join();
    }
}

Node::~Node() { stop(); }

} // namespace sensemesh::node
