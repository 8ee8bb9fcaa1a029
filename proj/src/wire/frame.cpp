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

#include "sensemesh/wire/frame.hpp"

#include <array>
#include <cmath>

namespace sensemesh::wire {

namespace {

struct TypeName {
    FrameType type;
    const char* name;
};

constexpr std::array<TypeName, 13> kTypeNames{{
    {FrameType::hello, "hello"},
    {FrameType::register_, "register"},
    {FrameType::register_ack, "register_ack"},
    {FrameType::list_sensors, "list_sensors"},
    {FrameType::sensor_list, "sensor_list"},
    {FrameType::query, "query"},
    {FrameType::query_result, "query_result"},
    {FrameType::subscribe, "subscribe"},
    {FrameType::subscribe_ack, "subscribe_ack"},
    {FrameType::deliver, "deliver"},
    {FrameType::deliver_ack, "deliver_ack"},
    {FrameType::error, "error"},
    {FrameType::status, "status"},
}};

} // namespace

const char* to_string(FrameType t) {
    for (const auto& e : kTypeNames) {
        if (e.type == t) return e.name;
    }
    return "error";
}

core::Result<FrameType> frame_type_from_string(std::string_view s) {
    for (const auto& e : kTypeNames) {
        if (s == e.name) return e.type;
    }
    return core::make_error(code::kUnknownType, "unknown frame type '" + std::string(s) + "'");
}

std::string encode_frame(const WireFrame& f) {
    nlohmann::json j = f.body;
    j["type"] = to_string(f.type);
    j["id"] = f.id;
    return j.dump();
}

core::Result<WireFrame> decode_frame(std::string_view line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return core::make_error(code::kBadFrame, "frame is not a JSON object line");
    }
    if (!j.contains("type") || !j["type"].is_string()) {
        return core::make_error(code::kBadFrame, "frame has no type field");
    }
    auto type = frame_type_from_string(j["type"].get<std::string>());
    if (!type) return type.error();

    WireFrame f;
    f.type = type.value();
    if (j.contains("id")) {
        if (!j["id"].is_string()) return core::make_error(code::kBadFrame, "id must be a string");
        f.id = j["id"].get<std::string>();
    }
    j.erase("type");
    j.erase("id");
    f.body = std::move(j);
    return f;
}

core::Result<WireFrame> element_to_frame(const core::StreamElement& e, const std::string& id,
                                         std::int64_t gap) {
    nlohmann::json values = nlohmann::json::array();
    for (const auto& v : e.values) {
        if (core::is_numeric(v)) {
            const double d = core::as_number(v);
            if (!std::isfinite(d)) {
                return core::make_error(code::kNonFiniteValue,
                                        "element " + e.sensor + "#" + std::to_string(e.seq) +
                                            " carries a non-finite value");
            }
            values.push_back(d);
        } else {
            values.push_back(core::as_text(v));
        }
    }
    WireFrame f;
    f.type = FrameType::deliver;
    f.id = id;
    f.body["sensor"] = e.sensor;
    f.body["seq"] = e.seq;
    f.body["ts"] = e.timestamp_ms;
    f.body["values"] = std::move(values);
    if (gap > 0) f.body["gap"] = gap;
    return f;
}

core::Result<DeliveredElement> frame_to_element(const WireFrame& f) {
    if (f.type != FrameType::deliver) {
        return core::make_error(code::kBadFrame, "expected a deliver frame");
    }
    const auto& b = f.body;
    if (!b.contains("sensor") || !b.contains("seq") || !b.contains("ts") || !b.contains("values") ||
        !b["values"].is_array()) {
        return core::make_error(code::kBadFrame, "deliver frame missing sensor/seq/ts/values");
    }
    DeliveredElement out;
    out.element.sensor = b["sensor"].get<std::string>();
    out.element.seq = b["seq"].get<std::int64_t>();
    out.element.timestamp_ms = b["ts"].get<std::int64_t>();
    for (const auto& v : b["values"]) {
        if (v.is_number()) {
            out.element.values.emplace_back(v.get<double>());
        } else if (v.is_string()) {
            out.element.values.emplace_back(v.get<std::string>());
        } else {
            return core::make_error(code::kBadFrame, "deliver values must be numbers or strings");
        }
    }
    if (b.contains("gap")) out.gap = b["gap"].get<std::int64_t>();
    return out;
}

WireFrame make_error_frame(const std::string& id, const std::string& code,
                           const std::string& message) {
    WireFrame f;
    f.type = FrameType::error;
    f.id = id;
    f.body["code"] = code;
    f.body["message"] = message;
    return f;
}

WireFrame make_hello(const std::string& id, const std::string& node_id) {
    WireFrame f;
    f.type = FrameType::hello;
    f.id = id;
    f.body["version"] = kProtocolVersion;
    f.body["node"] = node_id;
    return f;
}

} // namespace sensemesh::wire
