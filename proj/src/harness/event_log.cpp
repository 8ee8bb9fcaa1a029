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

#include "sensemesh/harness/event_log.hpp"

#include <sstream>

namespace sensemesh::harness {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

core::Result<std::int64_t> parse_int(const std::string& s, const char* what) {
    try {
        size_t used = 0;
        const std::int64_t v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        return core::make_error(code::kBadEventLog,
                                std::string(what) + " is not an integer: '" + s + "'");
    }
}

} // namespace

std::string to_csv(const EventRow& row) {
    std::ostringstream out;
    out << row.kind << ',' << row.request_id << ',' << row.stream << ',' << row.sensor << ','
        << row.t_ms << ',' << row.status << ',' << row.points;
    return out.str();
}

core::Result<EventRow> event_from_csv(const std::string& line) {
    auto fields = split_csv(line);
    if (fields.size() != 7) {
        return core::make_error(code::kBadEventLog,
                                "expected 7 fields, got " + std::to_string(fields.size()) +
                                    " in '" + line + "'");
    }
    EventRow row;
    row.kind = fields[0];
    row.request_id = fields[1];
    auto stream = parse_int(fields[2], "stream");
    if (!stream) return stream.error();
    row.stream = stream.value();
    row.sensor = fields[3];
    auto t = parse_int(fields[4], "t_ms");
    if (!t) return t.error();
    row.t_ms = t.value();
    row.status = fields[5];
    auto points = parse_int(fields[6], "points");
    if (!points) return points.error();
    row.points = points.value();
    return row;
}

core::Result<void> EventLog::open(const std::string& path) {
    std::lock_guard lock(mu_);
    out_.open(path, std::ios::trunc);
    if (!out_) return core::make_error(code::kBadEventLog, "cannot open " + path + " for writing");
    path_ = path;
    out_ << kEventHeader << '\n';
    out_.flush();
    return core::Result<void>::success();
}

void EventLog::append(const EventRow& row) {
    std::lock_guard lock(mu_);
    // Once closed the log accepts nothing more, so the in-memory rows always
    // mirror the file byte for byte.
    if (!out_.is_open()) return;
    rows_.push_back(row);
    out_ << to_csv(row) << '\n';
    out_.flush();
}

void EventLog::close() {
    std::lock_guard lock(mu_);
    if (out_.is_open()) out_.close();
}

std::vector<EventRow> EventLog::rows() const {
    std::lock_guard lock(mu_);
    return rows_;
}

core::Result<std::vector<EventRow>> read_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) return core::make_error(code::kBadEventLog, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kEventHeader) {
        return core::make_error(code::kBadEventLog, "missing or wrong header in " + path);
    }
    std::vector<EventRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto row = event_from_csv(line);
        if (!row) return row.error();
        rows.push_back(row.take());
    }
    return rows;
}

} // namespace sensemesh::harness
