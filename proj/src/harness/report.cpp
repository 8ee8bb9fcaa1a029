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

#include "sensemesh/harness/report.hpp"

#include <fstream>
#include <sstream>

namespace sensemesh::harness {

namespace {

core::Result<void> write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) return core::make_error(code::kBadEventLog, "cannot write " + path);
    out << content;
    out.flush();
    if (!out) return core::make_error(code::kBadEventLog, "short write to " + path);
    return core::Result<void>::success();
}

} // namespace

std::string render_samples_csv(const Metrics& m) {
    std::ostringstream out;
    out << "stream,sensor,completions,errors,points,avg_ms\n";
    for (const auto& s : m.per_stream) {
        out << s.stream << ',' << s.sensor << ',' << s.completions << ',' << s.errors << ','
            << s.points << ',' << format_double(s.avg_ms) << '\n';
    }
    return out.str();
}

std::string render_shares_csv(const Metrics& m) {
    std::ostringstream out;
    out << "stream,sensor,points,share_pct\n";
    for (const auto& s : m.per_stream) {
        out << s.stream << ',' << s.sensor << ',' << s.points << ','
            << format_double(s.share_pct) << '\n';
    }
    return out.str();
}

core::Result<ReportPaths> emit_report(const std::string& dir, const std::string& run_id,
                                      const Metrics& m, const SummaryExtras& extras) {
    ReportPaths paths;
    paths.samples_csv = dir + "/samples.csv";
    paths.shares_csv = dir + "/shares.csv";
    paths.summary_txt = dir + "/summary.txt";

    auto w1 = write_file(paths.samples_csv, render_samples_csv(m));
    if (!w1) return w1.error();
    auto w2 = write_file(paths.shares_csv, render_shares_csv(m));
    if (!w2) return w2.error();

    std::ostringstream out;
    out << "run_id=" << run_id << '\n';
    out << "mode=" << m.mode << '\n';
    out << "streams=" << m.streams << '\n';
    out << "duration_ms=" << m.duration_ms << '\n';
    out << "completions=" << m.completions << '\n';
    out << "errors=" << m.errors << '\n';
    out << "points=" << m.points << '\n';
    out << "points_per_minute=" << format_double(m.points_per_minute) << '\n';
    out << "avg_time_per_request_ms=" << format_double(m.avg_time_per_request_ms) << '\n';
    out << "share_mean_pct=" << format_double(m.share_mean_pct) << '\n';
    out << "share_cv=" << format_double(m.share_cv) << '\n';
    for (const auto& [key, value] : extras) {
        out << key << '=' << value << '\n';
    }
    auto w3 = write_file(paths.summary_txt, out.str());
    if (!w3) return w3.error();
    return paths;
}

} // namespace sensemesh::harness
