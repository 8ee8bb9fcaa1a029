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

// sensemesh-node: runs one engine node from a JSON config file until it
// receives SIGTERM/SIGINT. With --ready-file the bound address is written to
// that file once the node is serving, which is how the benchmark driver
// learns the ephemeral port of a child it spawned.

#include "sensemesh/node/node.hpp"
#include "sensemesh/wire/config_codec.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sensemesh engine node"};
    std::string config_path;
    std::string ready_file;
    app.add_option("--config", config_path, "node configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--ready-file", ready_file,
                   "write the bound listen address here once serving");
    CLI11_PARSE(app, argc, argv);

    std::ifstream in(config_path);
    std::ostringstream text;
    text << in.rdbuf();
    auto config = sensemesh::wire::parse_node_config(text.str());
    if (!config) {
        std::cerr << config.error().code << ": " << config.error().message << "\n";
        return 2;
    }

    auto node = sensemesh::node::Node::start(config.value());
    if (!node) {
        std::cerr << node.error().code << ": " << node.error().message << "\n";
        return 3;
    }

    if (!ready_file.empty()) {
        std::ofstream ready(ready_file, std::ios::trunc);
        ready << node.value()->address() << "\n";
        if (!ready) {
            std::cerr << "cannot write ready file " << ready_file << "\n";
            node.value()->stop();
            return 4;
        }
    }
    std::cout << config.value().node_id << " serving on " << node.value()->address() << std::endl;

    std::signal(SIGTERM, on_signal);
    std::signal(SIGINT, on_signal);
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    node.value()->stop();
    return 0;
}
