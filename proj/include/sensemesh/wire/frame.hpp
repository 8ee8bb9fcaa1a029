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

#include <cstdint>
#include <string>
#include <string_view>

namespace sensemesh::wire {

/// Protocol version carried by hello frames.
inline constexpr const char* kProtocolVersion = "1";

enum class FrameType {
    hello,
    register_,
    register_ack,
    list_sensors,
    sensor_list,
    query,
    query_result,
    subscribe,
    subscribe_ack,
    deliver,
    deliver_ack,
    error,
    status,
};

const char* to_string(FrameType t);
core::Result<FrameType> frame_type_from_string(std::string_view s);

/// One wire frame. On the wire a frame is a single UTF-8 line: a JSON object
/// with keys in lexicographic order, `type` and `id` alongside the
/// type-specific body fields. Timestamps are integer epoch-milliseconds and
/// numbers use the shortest decimal form that round-trips.
struct WireFrame {
    FrameType type = FrameType::error;
    std::string id;            // correlation token, may be empty
    nlohmann::json body = nlohmann::json::object(); // type-specific fields

    bool operator==(const WireFrame& other) const {
        return type == other.type && id == other.id && body == other.body;
    }
};

/// Serializes to the single-line form (no trailing newline).
std::string encode_frame(const WireFrame& f);

/// Parses one line. Unknown `type` values or malformed JSON come back as
/// errors (codes UNKNOWN_TYPE / BAD_FRAME); the caller answers with an error
/// frame and keeps the connection usable.
core::Result<WireFrame> decode_frame(std::string_view line);

// Error codes used in error frames and transport results.
namespace code {
inline constexpr const char* kBadFrame = "BAD_FRAME";
inline constexpr const char* kBadRequest = "BAD_REQUEST";
inline constexpr const char* kUnknownType = "UNKNOWN_TYPE";
inline constexpr const char* kVersionMismatch = "VERSION_MISMATCH";
inline constexpr const char* kSensorUnknown = "SENSOR_UNKNOWN";
inline constexpr const char* kRangeInverted = "RANGE_INVERTED";
inline constexpr const char* kQueueFull = "QUEUE_FULL";
inline constexpr const char* kThrottled = "THROTTLED";
inline constexpr const char* kPeerUnreachable = "PEER_UNREACHABLE";
inline constexpr const char* kTimeout = "TIMEOUT";
inline constexpr const char* kNonFiniteValue = "NON_FINITE_VALUE";
inline constexpr const char* kSubscriptionUnknown = "SUBSCRIPTION_UNKNOWN";
} // namespace code

/// Builds a deliver frame from a stored element. `gap` counts elements
/// dropped before this one and is omitted when zero. Fails if any numeric
/// value is non-finite; NaN and infinity never reach the wire.
core::Result<WireFrame> element_to_frame(const core::StreamElement& e, const std::string& id,
                                         std::int64_t gap = 0);

struct DeliveredElement {
    core::StreamElement element;
    std::int64_t gap = 0;
};

core::Result<DeliveredElement> frame_to_element(const WireFrame& f);

WireFrame make_error_frame(const std::string& id, const std::string& code,
                           const std::string& message);
WireFrame make_hello(const std::string& id, const std::string& node_id);

} // namespace sensemesh::wire
