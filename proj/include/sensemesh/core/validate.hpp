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

#include "sensemesh/core/types.hpp"

#include <set>
#include <string>
#include <vector>

namespace sensemesh::core {

/// One failed validation rule. Violations are data, not failures: callers
/// decide whether a non-empty list is fatal.
struct Violation {
    std::string code;    // stable machine-readable rule id
    std::string message; // what failed, with the offending value

    bool operator==(const Violation&) const = default;
};

struct ValidationResult {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    void add(std::string code, std::string message) {
        violations.push_back({std::move(code), std::move(message)});
    }
};

// Violation codes.
namespace violation {
inline constexpr const char* kNameInvalid = "NAME_INVALID";
inline constexpr const char* kFieldNameInvalid = "FIELD_NAME_INVALID";
inline constexpr const char* kFieldNameDuplicate = "FIELD_NAME_DUPLICATE";
inline constexpr const char* kHistorySizeNonPositive = "HISTORY_SIZE_NONPOSITIVE";
inline constexpr const char* kSamplingIntervalTooSmall = "SAMPLING_INTERVAL_TOO_SMALL";
inline constexpr const char* kPluginUnknown = "PLUGIN_UNKNOWN";
inline constexpr const char* kProcessorUnknown = "PROCESSOR_UNKNOWN";
inline constexpr const char* kFieldsEmpty = "FIELDS_EMPTY";
inline constexpr const char* kParamNameDuplicate = "PARAM_NAME_DUPLICATE";
inline constexpr const char* kRequiredHasDefault = "REQUIRED_HAS_DEFAULT";
inline constexpr const char* kArityMismatch = "ARITY_MISMATCH";
inline constexpr const char* kNonFiniteValue = "NON_FINITE_VALUE";
inline constexpr const char* kKindMismatch = "KIND_MISMATCH";
} // namespace violation

/// Identifier rule shared by sensor names, plugin names and field names:
/// [A-Za-z_][A-Za-z0-9_]*
bool is_identifier(const std::string& s);

/// Names known to the registries at validation time; a plain view so core
/// stays free of registry dependencies.
struct RegistryView {
    std::set<std::string> plugins;
    std::set<std::string> processors;
};

/// Checks every VirtualSensorConfig invariant and that referenced plugin and
/// processor names resolve. Never throws; all findings come back as
/// violations.
ValidationResult validate_config(const VirtualSensorConfig& cfg, const RegistryView& registry);

/// Checks a stored element against its owning schema: arity, value kinds and
/// finiteness of numeric values (no NaN or infinity escapes the engine).
ValidationResult validate_element(const StreamElement& e, const Schema& schema);

/// Checks PluginDescriptor invariants: non-empty fields, unique parameter
/// names, required parameters without defaults.
ValidationResult validate_descriptor(const PluginDescriptor& d);

} // namespace sensemesh::core
