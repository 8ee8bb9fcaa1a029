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
#include "sensemesh/harness/metrics.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sensemesh::harness {

/// Extra key=value lines appended to summary.txt (counters, RTT stats, …).
using SummaryExtras = std::vector<std::pair<std::string, std::string>>;

struct ReportPaths {
    std::string samples_csv;
    std::string shares_csv;
    std::string summary_txt;
};

/// Writes samples.csv (per-stream load figures), shares.csv (per-stream
/// delivery shares) and summary.txt (run-level key=value lines) into dir.
/// Emission is deterministic: same metrics in, byte-identical files out.
core::Result<ReportPaths> emit_report(const std::string& dir, const std::string& run_id,
                                      const Metrics& metrics, const SummaryExtras& extras = {});

/// Renders only the two CSV bodies (used to cross-check a report against an
/// independently recomputed one without touching the filesystem).
std::string render_samples_csv(const Metrics& metrics);
std::string render_shares_csv(const Metrics& metrics);

} // namespace sensemesh::harness
