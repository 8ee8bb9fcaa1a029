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

#include "sensemesh/core/validate.hpp"

#include <cctype>
#include <cmath>

namespace sensemesh::core {

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    auto head = static_cast<unsigned char>(s[0]);
    if (!(std::isalpha(head) || s[0] == '_')) return false;
    for (size_t i = 1; i < s.size(); ++i) {
        auto c = static_cast<unsigned char>(s[i]);
        if (!(std::isalnum(c) || s[i] == '_')) return false;
    }
    return true;
}

namespace {

void check_schema(const Schema& schema, ValidationResult& out) {
    std::set<std::string> seen;
    for (const auto& f : schema) {
        if (!is_identifier(f.name)) {
            out.add(violation::kFieldNameInvalid, "field name '" + f.name + "' is not an identifier");
        } else if (!seen.insert(f.name).second) {
            out.add(violation::kFieldNameDuplicate, "field name '" + f.name + "' appears twice");
        }
    }
}

} // namespace

ValidationResult validate_config(const VirtualSensorConfig& cfg, const RegistryView& registry) {
    ValidationResult r;
    if (!is_identifier(cfg.name)) {
        r.add(violation::kNameInvalid, "sensor name '" + cfg.name + "' is not an identifier");
    }
    if (cfg.history_size < 1) {
        r.add(violation::kHistorySizeNonPositive,
              "history_size must be >= 1, got " + std::to_string(cfg.history_size));
    }
    if (cfg.sampling_interval_ms < 10) {
        r.add(violation::kSamplingIntervalTooSmall,
              "sampling_interval_ms must be >= 10, got " + std::to_string(cfg.sampling_interval_ms));
    }
    if (!registry.plugins.contains(cfg.source.plugin)) {
        r.add(violation::kPluginUnknown, "source plugin '" + cfg.source.plugin + "' is not registered");
    }
    for (const auto& p : cfg.processors) {
        if (!registry.processors.contains(p.name)) {
            r.add(violation::kProcessorUnknown, "processor '" + p.name + "' is not registered");
        }
    }
    check_schema(cfg.output_schema, r);
    return r;
}

ValidationResult validate_element(const StreamElement& e, const Schema& schema) {
    ValidationResult r;
    if (e.values.size() != schema.size()) {
        r.add(violation::kArityMismatch, "element has " + std::to_string(e.values.size()) +
                                             " values, schema has " + std::to_string(schema.size()) +
                                             " fields");
        return r;
    }
    for (size_t i = 0; i < e.values.size(); ++i) {
        const bool numeric = is_numeric(e.values[i]);
        if (schema[i].kind == FieldKind::numeric) {
            if (!numeric) {
                r.add(violation::kKindMismatch, "field '" + schema[i].name + "' expects a number");
            } else if (!std::isfinite(as_number(e.values[i]))) {
                r.add(violation::kNonFiniteValue, "field '" + schema[i].name + "' is not finite");
            }
        } else if (numeric) {
            r.add(violation::kKindMismatch, "field '" + schema[i].name + "' expects text");
        }
    }
    return r;
}

ValidationResult validate_descriptor(const PluginDescriptor& d) {
    ValidationResult r;
    if (!is_identifier(d.plugin_name)) {
        r.add(violation::kNameInvalid, "plugin name '" + d.plugin_name + "' is not an identifier");
    }
    if (d.fields.empty()) {
        r.add(violation::kFieldsEmpty, "descriptor '" + d.plugin_name + "' declares no fields");
    }
    check_schema(d.fields, r);
    std::set<std::string> names;
    for (const auto& p : d.parameters) {
        if (!is_identifier(p.name)) {
            r.add(violation::kNameInvalid, "parameter name '" + p.name + "' is not an identifier");
        } else if (!names.insert(p.name).second) {
            r.add(violation::kParamNameDuplicate, "parameter '" + p.name + "' declared twice");
        }
        if (p.required && p.default_value.has_value()) {
            r.add(violation::kRequiredHasDefault,
                  "required parameter '" + p.name + "' must not carry a default");
        }
    }
    return r;
}

} // namespace sensemesh::core
