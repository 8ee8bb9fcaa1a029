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

#include "sensemesh/harness/orchestrator.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace sensemesh::harness {

namespace {

bool still_running(pid_t pid) {
    int status = 0;
    const pid_t r = waitpid(pid, &status, WNOHANG);
    return r == 0;
}

} // namespace

core::Result<void> ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        return core::make_error(code::kSpawnFailed, "cannot create " + dir + ": " + ec.message());
    }
    return core::Result<void>::success();
}

core::Result<ChildNode> spawn_node(const std::string& node_binary, const wire::NodeConfig& config,
                                   const std::string& dir, int timeout_ms) {
    auto made = ensure_dir(dir);
    if (!made) return made.error();

    ChildNode child;
    child.node_id = config.node_id;
    child.config_path = dir + "/" + config.node_id + ".json";
    const std::string ready_path = dir + "/" + config.node_id + ".ready";
    std::error_code ec;
    std::filesystem::remove(ready_path, ec);

    {
        std::ofstream out(child.config_path, std::ios::trunc);
        if (!out) {
            return core::make_error(code::kSpawnFailed, "cannot write " + child.config_path);
        }
        out << wire::serialize_node_config(config) << '\n';
    }

    const pid_t pid = fork();
    if (pid < 0) return core::make_error(code::kSpawnFailed, "fork failed");
    if (pid == 0) {
        execl(node_binary.c_str(), node_binary.c_str(), "--config", child.config_path.c_str(),
              "--ready-file", ready_path.c_str(), static_cast<char*>(nullptr));
        _exit(127); // exec failed
    }
    child.pid = pid;

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        std::ifstream ready(ready_path);
        std::string address;
        if (ready && std::getline(ready, address) && !address.empty()) {
            child.address = address;
            return child;
        }
        if (!still_running(pid)) {
            child.pid = -1;
            return core::make_error(code::kSpawnFailed,
                                    config.node_id + " exited before becoming ready");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    stop_node(child);
    return core::make_error(code::kSpawnFailed, config.node_id + " not ready within " +
                                                    std::to_string(timeout_ms) + " ms");
}

void stop_node(ChildNode& child, int grace_ms) {
    if (child.pid <= 0) return;
    kill(child.pid, SIGTERM);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(grace_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        int status = 0;
        if (waitpid(child.pid, &status, WNOHANG) != 0) {
            child.pid = -1;
            return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    kill(child.pid, SIGKILL);
    int status = 0;
    waitpid(child.pid, &status, 0);
    child.pid = -1;
}

} // namespace sensemesh::harness
