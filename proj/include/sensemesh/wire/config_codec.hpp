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

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace sensemesh::wire {

inline constexpr const char* kBadConfig = "BAD_CONFIG";

/// Per-device engine configuration; the on-disk schema of a node config file.
struct NodeConfig {
    std::string node_id;
    std::string listen = "127.0.0.1:0"; // port 0 = pick a free port
    std::optional<std::string> coordinator;
    std::optional<std::string> plugin_dir;
    std::vector<core::VirtualSensorConfig> sensors;
    std::uint64_t queue_bound = 1024;
    // Constrained-server profile: data points processed per second at this
    // node when acting as aggregator; 0 = unconstrained.
    std::uint64_t ingest_limit_per_s = 0;
    std::int64_t request_timeout_ms = 30000;
    std::int64_t heartbeat_interval_s = 10;
    std::optional<std::string> spill_dir;

    bool operator==(const NodeConfig&) const = default;
};

// JSON (de)serialization. Configs, descriptors and node files all use the
// same human-editable JSON text; see docs/protocol.md for the schemas.

nlohmann::json to_json(const core::FieldSchema& f);
nlohmann::json to_json(const core::Schema& s);
nlohmann::json to_json(const core::ParamMap& params);
nlohmann::json to_json(const core::PluginDescriptor& d);
nlohmann::json to_json(const core::VirtualSensorConfig& c);
nlohmann::json to_json(const NodeConfig& c);

core::Result<core::FieldSchema> field_from_json(const nlohmann::json& j);
core::Result<core::Schema> schema_from_json(const nlohmann::json& j);
core::Result<core::ParamMap> params_from_json(const nlohmann::json& j);
core::Result<core::PluginDescriptor> descriptor_from_json(const nlohmann::json& j);
core::Result<core::VirtualSensorConfig> sensor_config_from_json(const nlohmann::json& j);
core::Result<NodeConfig> node_config_from_json(const nlohmann::json& j);

std::string serialize_descriptor(const core::PluginDescriptor& d);
std::string serialize_sensor_config(const core::VirtualSensorConfig& c);
std::string serialize_node_config(const NodeConfig& c);

core::Result<core::PluginDescriptor> parse_descriptor(const std::string& text);
core::Result<core::VirtualSensorConfig> parse_sensor_config(const std::string& text);
core::Result<NodeConfig> parse_node_config(const std::string& text);

/// Strict JSON parse of a whole document; kBadConfig on any syntax error.
core::Result<nlohmann::json> parse_json_document(const std::string& text);

} // namespace sensemesh::wire
