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

#include "sensemesh/wire/config_codec.hpp"

using nlohmann::json;

namespace sensemesh::wire {

namespace {

const char* kind_name(core::FieldKind k) {
    return k == core::FieldKind::numeric ? "numeric" : "text";
}

const char* param_type_name(core::ParamType t) {
    switch (t) {
    case core::ParamType::number: return "number";
    case core::ParamType::text: return "text";
    case core::ParamType::flag: return "flag";
    }
    return "number";
}

json param_value_to_json(const core::ParamValue& v) {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    return std::get<std::string>(v);
}

core::Result<core::ParamValue> param_value_from_json(const json& j) {
    if (j.is_number()) return core::ParamValue{j.get<double>()};
    if (j.is_boolean()) return core::ParamValue{j.get<bool>()};
    if (j.is_string()) return core::ParamValue{j.get<std::string>()};
    return core::make_error(kBadConfig, "parameter values must be numbers, strings or booleans");
}

// Small pull-style reader so every parse error names the offending key.
struct Reader {
    const json& j;
    std::optional<core::Error> err = std::nullopt;

    bool object() {
        if (!j.is_object()) {
            err = core::make_error(kBadConfig, "expected a JSON object");
            return false;
        }
        return true;
    }

    template <typename T>
    bool req(const char* key, T& out) {
        if (err) return false;
        if (!j.contains(key)) {
            err = core::make_error(kBadConfig, std::string("missing required key '") + key + "'");
            return false;
        }
        return get(key, out);
    }

    template <typename T>
    bool opt(const char* key, T& out) {
        if (err || !j.contains(key)) return !err;
        return get(key, out);
    }

    template <typename T>
    bool get(const char* key, T& out) {
        try {
            out = j.at(key).get<T>();
            return true;
        } catch (const json::exception& e) {
            err = core::make_error(kBadConfig, std::string("bad value for '") + key + "': " + e.what());
            return false;
        }
    }
};

} // namespace

json to_json(const core::FieldSchema& f) {
    return json{{"name", f.name}, {"kind", kind_name(f.kind)}, {"unit", f.unit}};
}

json to_json(const core::Schema& s) {
    json arr = json::array();
    for (const auto& f : s) arr.push_back(to_json(f));
    return arr;
}

json to_json(const core::ParamMap& params) {
    json obj = json::object();
    for (const auto& [k, v] : params) obj[k] = param_value_to_json(v);
    return obj;
}

json to_json(const core::PluginDescriptor& d) {
    json params = json::array();
    for (const auto& p : d.parameters) {
        json jp{{"name", p.name}, {"type", param_type_name(p.type)}, {"required", p.required}};
        if (p.default_value) jp["default"] = param_value_to_json(*p.default_value);
        params.push_back(jp);
    }
    return json{{"plugin_name", d.plugin_name},
                {"description", d.description},
                {"fields", to_json(d.fields)},
                {"parameters", params}};
}

json to_json(const core::VirtualSensorConfig& c) {
    json procs = json::array();
    for (const auto& p : c.processors) {
        procs.push_back(json{{"name", p.name}, {"params", to_json(p.params)}});
    }
    json j{{"name", c.name},
           {"source", json{{"plugin", c.source.plugin}, {"params", to_json(c.source.params)}}},
           {"processors", procs},
           {"output_schema", to_json(c.output_schema)},
           {"history_size", c.history_size},
           {"sampling_interval", c.sampling_interval_ms}};
    if (c.tick_limit > 0) j["tick_limit"] = c.tick_limit;
    if (c.spill_log) j["spill_log"] = true;
    return j;
}

json to_json(const NodeConfig& c) {
    json sensors = json::array();
    for (const auto& s : c.sensors) sensors.push_back(to_json(s));
    json j{{"node_id", c.node_id},
           {"listen", c.listen},
           {"sensors", sensors},
           {"queue_bound", c.queue_bound},
           {"ingest_limit_per_s", c.ingest_limit_per_s},
           {"request_timeout_ms", c.request_timeout_ms},
           {"heartbeat_interval_s", c.heartbeat_interval_s}};
    if (c.coordinator) j["coordinator"] = *c.coordinator;
    if (c.plugin_dir) j["plugin_dir"] = *c.plugin_dir;
    if (c.spill_dir) j["spill_dir"] = *c.spill_dir;
    return j;
}

core::Result<core::FieldSchema> field_from_json(const json& j) {
    Reader r{j};
    core::FieldSchema f;
    std::string kind = "numeric";
    if (!r.object() || !r.req("name", f.name) || !r.opt("kind", kind) || !r.opt("unit", f.unit)) {
        return *r.err;
    }
    if (kind == "numeric") {
        f.kind = core::FieldKind::numeric;
    } else if (kind == "text") {
        f.kind = core::FieldKind::text;
    } else {
        return core::make_error(kBadConfig, "field kind must be 'numeric' or 'text', got '" + kind + "'");
    }
    return f;
}

core::Result<core::Schema> schema_from_json(const json& j) {
    if (!j.is_array()) return core::make_error(kBadConfig, "schema must be an array of fields");
    core::Schema s;
    for (const auto& jf : j) {
        auto f = field_from_json(jf);
        if (!f) return f.error();
        s.push_back(f.take());
    }
    return s;
}

core::Result<core::ParamMap> params_from_json(const json& j) {
    if (!j.is_object()) return core::make_error(kBadConfig, "params must be a JSON object");
    core::ParamMap m;
    for (const auto& [k, v] : j.items()) {
        auto pv = param_value_from_json(v);
        if (!pv) return pv.error();
        m.emplace(k, pv.take());
    }
    return m;
}

core::Result<core::PluginDescriptor> descriptor_from_json(const json& j) {
    Reader r{j};
    core::PluginDescriptor d;
    if (!r.object() || !r.req("plugin_name", d.plugin_name) || !r.opt("description", d.description)) {
        return *r.err;
    }
    if (!j.contains("fields")) return core::make_error(kBadConfig, "missing required key 'fields'");
    auto fields = schema_from_json(j.at("fields"));
    if (!fields) return fields.error();
    d.fields = fields.take();

    if (j.contains("parameters")) {
        if (!j.at("parameters").is_array()) {
            return core::make_error(kBadConfig, "'parameters' must be an array");
        }
        for (const auto& jp : j.at("parameters")) {
            Reader pr{jp};
            core::PluginParam p;
            std::string type = "number";
            if (!pr.object() || !pr.req("name", p.name) || !pr.opt("type", type) ||
                !pr.opt("required", p.required)) {
                return *pr.err;
            }
            if (type == "number") {
                p.type = core::ParamType::number;
            } else if (type == "text") {
                p.type = core::ParamType::text;
            } else if (type == "flag") {
                p.type = core::ParamType::flag;
            } else {
                return core::make_error(kBadConfig, "parameter type must be number|text|flag");
            }
            if (jp.contains("default")) {
                auto dv = param_value_from_json(jp.at("default"));
                if (!dv) return dv.error();
                p.default_value = dv.take();
            }
            d.parameters.push_back(std::move(p));
        }
    }
    return d;
}

core::Result<core::VirtualSensorConfig> sensor_config_from_json(const json& j) {
    Reader r{j};
    core::VirtualSensorConfig c;
    if (!r.object() || !r.req("name", c.name) || !r.opt("history_size", c.history_size) ||
        !r.opt("sampling_interval", c.sampling_interval_ms) || !r.opt("tick_limit", c.tick_limit) ||
        !r.opt("spill_log", c.spill_log)) {
        return *r.err;
    }
    if (!j.contains("source") || !j.at("source").is_object()) {
        return core::make_error(kBadConfig, "missing required object 'source'");
    }
    {
        const auto& js = j.at("source");
        Reader sr{js};
        if (!sr.req("plugin", c.source.plugin)) return *sr.err;
        if (js.contains("params")) {
            auto ps = params_from_json(js.at("params"));
            if (!ps) return ps.error();
            c.source.params = ps.take();
        }
    }
    if (j.contains("processors")) {
        if (!j.at("processors").is_array()) {
            return core::make_error(kBadConfig, "'processors' must be an array");
        }
        for (const auto& jp : j.at("processors")) {
            Reader pr{jp};
            core::ProcessorSpec spec;
            if (!pr.object() || !pr.req("name", spec.name)) return *pr.err;
            if (jp.contains("params")) {
                auto ps = params_from_json(jp.at("params"));
                if (!ps) return ps.error();
                spec.params = ps.take();
            }
            c.processors.push_back(std::move(spec));
        }
    }
    if (j.contains("output_schema")) {
        auto s = schema_from_json(j.at("output_schema"));
        if (!s) return s.error();
        c.output_schema = s.take();
    }
    return c;
}

core::Result<NodeConfig> node_config_from_json(const json& j) {
    Reader r{j};
    NodeConfig c;
    std::string coordinator;
    std::string plugin_dir;
    std::string spill_dir;
    if (!r.object() || !r.req("node_id", c.node_id) || !r.opt("listen", c.listen) ||
        !r.opt("coordinator", coordinator) || !r.opt("plugin_dir", plugin_dir) ||
        !r.opt("queue_bound", c.queue_bound) || !r.opt("ingest_limit_per_s", c.ingest_limit_per_s) ||
        !r.opt("request_timeout_ms", c.request_timeout_ms) ||
        !r.opt("heartbeat_interval_s", c.heartbeat_interval_s) || !r.opt("spill_dir", spill_dir)) {
        return *r.err;
    }
    if (!coordinator.empty()) c.coordinator = coordinator;
    if (!plugin_dir.empty()) c.plugin_dir = plugin_dir;
    if (!spill_dir.empty()) c.spill_dir = spill_dir;
    if (j.contains("sensors")) {
        if (!j.at("sensors").is_array()) {
            return core::make_error(kBadConfig, "'sensors' must be an array");
        }
        for (const auto& js : j.at("sensors")) {
            auto s = sensor_config_from_json(js);
            if (!s) return s.error();
            c.sensors.push_back(s.take());
        }
    }
    return c;
}

std::string serialize_descriptor(const core::PluginDescriptor& d) { return to_json(d).dump(2) + "\n"; }
std::string serialize_sensor_config(const core::VirtualSensorConfig& c) { return to_json(c).dump(2) + "\n"; }
std::string serialize_node_config(const NodeConfig& c) { return to_json(c).dump(2) + "\n"; }

core::Result<json> parse_json_document(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return core::make_error(kBadConfig, "not valid JSON");
    return j;
}

core::Result<core::PluginDescriptor> parse_descriptor(const std::string& text) {
    auto j = parse_json_document(text);
    if (!j) return j.error();
    return descriptor_from_json(j.value());
}

core::Result<core::VirtualSensorConfig> parse_sensor_config(const std::string& text) {
    auto j = parse_json_document(text);
    if (!j) return j.error();
    return sensor_config_from_json(j.value());
}

core::Result<NodeConfig> parse_node_config(const std::string& text) {
    auto j = parse_json_document(text);
    if (!j) return j.error();
    return node_config_from_json(j.value());
}

} // namespace sensemesh::wire
