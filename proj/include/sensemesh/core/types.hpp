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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sensemesh::core {

enum class FieldKind { numeric, text };

/// One field a sensor emits. Names are identifiers, unique within a schema.
struct FieldSchema {
    std::string name;
    FieldKind kind = FieldKind::numeric;
    std::string unit; // free-form, may be empty

    bool operator==(const FieldSchema&) const = default;
};

using Schema = std::vector<FieldSchema>;

/// A single field value: numeric or text, matching FieldKind.
using Value = std::variant<double, std::string>;

inline bool is_numeric(const Value& v) { return std::holds_alternative<double>(v); }
inline double as_number(const Value& v) { return std::get<double>(v); }
inline const std::string& as_text(const Value& v) { return std::get<std::string>(v); }

/// One timestamped reading of a virtual sensor. seq starts at 0 and increases
/// by exactly 1 per sensor; timestamps are assigned by the sampling scheduler
/// and never decrease per sensor.
struct StreamElement {
    std::string sensor;
    std::int64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    std::vector<Value> values;

    bool operator==(const StreamElement&) const = default;
};

enum class ParamType { number, text, flag };

/// Plugin/processor parameter value as written in configuration.
using ParamValue = std::variant<double, std::string, bool>;

/// Parameter maps are ordered by key so behaviour is independent of the
/// order parameters appear in a config file.
using ParamMap = std::map<std::string, ParamValue>;

/// Declared parameter of a plugin. Required parameters carry no default.
struct PluginParam {
    std::string name;
    ParamType type = ParamType::number;
    bool required = false;
    std::optional<ParamValue> default_value;

    bool operator==(const PluginParam&) const = default;
};

/// Declarative description of a sensor source: what it emits and how it is
/// instantiated.
struct PluginDescriptor {
    std::string plugin_name;
    std::string description;
    Schema fields;
    std::vector<PluginParam> parameters;

    bool operator==(const PluginDescriptor&) const = default;
};

struct SourceSpec {
    std::string plugin;
    ParamMap params;

    bool operator==(const SourceSpec&) const = default;
};

struct ProcessorSpec {
    std::string name;
    ParamMap params;

    bool operator==(const ProcessorSpec&) const = default;
};

/// Declarative binding of one source plugin, a processing chain, a bounded
/// window and an output schema into a named queryable stream.
struct VirtualSensorConfig {
    std::string name;
    SourceSpec source;
    std::vector<ProcessorSpec> processors;
    Schema output_schema;
    std::uint64_t history_size = 1; // elements retained, count not duration
    std::int64_t sampling_interval_ms = 1000;
    std::uint64_t tick_limit = 0; // 0 = sample forever; used by experiments
    bool spill_log = false;       // append-only spill of stored elements

    bool operator==(const VirtualSensorConfig&) const = default;
};

} // namespace sensemesh::core
