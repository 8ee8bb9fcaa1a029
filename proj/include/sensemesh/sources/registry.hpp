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
#include "sensemesh/sources/source.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace sensemesh::sources {

/// One skipped file or rejected descriptor found during discovery.
struct Diagnostic {
    std::string file;
    std::string message;
};

struct DiscoveryReport {
    std::vector<core::PluginDescriptor> descriptors; // sorted by plugin_name
    std::vector<Diagnostic> diagnostics;
};

/// Descriptor-driven source registry. Plugins are in-process implementations
/// selected by plugin_name; descriptor files control which plugins a node
/// advertises and may refine their metadata. Read-mostly: build once, then
/// share freely across threads.
class PluginRegistry {
public:
    /// Registry preloaded with descriptors for every built-in source:
    /// constant, sine, random_walk, sine_audio, replay, multi_axis.
    static PluginRegistry with_builtins();

    /// Lists `<name>.plugin` descriptor files. Malformed or invalid files are
    /// skipped and reported, never fatal; DIRECTORY_UNREADABLE only when the
    /// directory itself cannot be listed.
    static core::Result<DiscoveryReport> discover(const std::string& plugin_dir);

    /// Registry whose advertised set is exactly the discovered descriptors.
    static core::Result<PluginRegistry> from_directory(const std::string& plugin_dir,
                                                       std::vector<Diagnostic>* diagnostics = nullptr);

    const core::PluginDescriptor* find(const std::string& plugin_name) const;
    std::set<std::string> names() const;
    std::vector<core::PluginDescriptor> descriptors() const; // sorted by name

    /// Resolves parameters against the descriptor (defaults applied, required
    /// enforced, types checked) and builds a ready-to-sample instance.
    core::Result<SourcePtr> instantiate(const std::string& plugin_name,
                                        const core::ParamMap& params) const;

private:
    std::map<std::string, core::PluginDescriptor> descriptors_;
};

/// Resolves a parameter map against declared parameters: fills defaults,
/// rejects missing required / unknown names / type mismatches.
core::Result<core::ParamMap> resolve_params(const core::PluginDescriptor& d,
                                            const core::ParamMap& given);

} // namespace sensemesh::sources
