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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sensemesh::sources {

namespace code {
inline constexpr const char* kParamMissing = "PARAM_MISSING";
inline constexpr const char* kParamTypeMismatch = "PARAM_TYPE_MISMATCH";
inline constexpr const char* kParamUnknown = "PARAM_UNKNOWN";
inline constexpr const char* kParamInvalid = "PARAM_INVALID";
inline constexpr const char* kSourceExhausted = "SOURCE_EXHAUSTED";
inline constexpr const char* kSourceUnavailable = "SOURCE_UNAVAILABLE";
inline constexpr const char* kPluginUnknown = "PLUGIN_UNKNOWN";
inline constexpr const char* kDirectoryUnreadable = "DIRECTORY_UNREADABLE";
} // namespace code

/// A live, instantiated data source. Owned by exactly one sampling task;
/// sample() is never called concurrently on one instance.
class Source {
public:
    virtual ~Source() = default;

    /// Number of values a successful sample() yields.
    virtual size_t field_count() const = 0;

    /// Reads one value vector. `now_ms` is the nominal acquisition time the
    /// scheduler is executing, not necessarily the wall clock; sources that
    /// depend on time must use it so replays and reruns are reproducible.
    /// Errors: SOURCE_EXHAUSTED (permanent), SOURCE_UNAVAILABLE (this tick).
    virtual core::Result<std::vector<core::Value>> sample(std::int64_t now_ms) = 0;
};

using SourcePtr = std::unique_ptr<Source>;

} // namespace sensemesh::sources
