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
#include "sensemesh/wire/config_codec.hpp"

#include <string>
#include <sys/types.h>

namespace sensemesh::harness {

namespace code {
inline constexpr const char* kSpawnFailed = "SPAWN_FAILED";
} // namespace code

/// A node running as a child process of the benchmark driver.
struct ChildNode {
    pid_t pid = -1;
    std::string node_id;
    std::string address;     // actual host:port from the ready file
    std::string config_path;

    bool running() const { return pid > 0; }
};

/// Writes the config to `<dir>/<node_id>.json`, execs `node_binary --config …
/// --ready-file …` and waits for the child to publish its bound address.
core::Result<ChildNode> spawn_node(const std::string& node_binary, const wire::NodeConfig& config,
                                   const std::string& dir, int timeout_ms = 10000);

/// Graceful stop: SIGTERM, wait up to grace_ms, then SIGKILL. Reaps the pid.
void stop_node(ChildNode& child, int grace_ms = 5000);

/// Creates the directory (and parents); errors become SPAWN_FAILED.
core::Result<void> ensure_dir(const std::string& dir);

} // namespace sensemesh::harness
