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

#include "sensemesh/sources/registry.hpp"

#include "sensemesh/core/validate.hpp"
#include "sensemesh/wire/config_codec.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace sensemesh::sources {

namespace {

namespace fs = std::filesystem;

double num(const core::ParamMap& p, const std::string& key) {
    return std::get<double>(p.at(key));
}

std::int64_t integer(const core::ParamMap& p, const std::string& key) {
    return std::llround(std::get<double>(p.at(key)));
}

std::string text(const core::ParamMap& p, const std::string& key) {
    return std::get<std::string>(p.at(key));
}

bool flag(const core::ParamMap& p, const std::string& key) {
    return std::get<bool>(p.at(key));
}

/// Deterministic uniform doubles on top of mt19937_64. The generator and the
/// bits-to-double mapping are both fully specified, so identical seeds give
/// bit-identical sequences on every platform.
class UniformRng {
public:
    explicit UniformRng(std::uint64_t seed) : rng_(seed) {}

    double next_in(double lo, double hi) {
        const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53; // [0,1)
        return lo + (hi - lo) * unit;
    }

private:
    std::mt19937_64 rng_;
};

class ConstantSource final : public Source {
public:
    explicit ConstantSource(double value) : value_(value) {}
    size_t field_count() const override { return 1; }
    core::Result<std::vector<core::Value>> sample(std::int64_t) override {
        return std::vector<core::Value>{value_};
    }

private:
    double value_;
};

class SineSource final : public Source {
public:
    SineSource(double amplitude, double freq_hz) : amplitude_(amplitude), freq_hz_(freq_hz) {}
    size_t field_count() const override { return 1; }
    core::Result<std::vector<core::Value>> sample(std::int64_t now_ms) override {
        if (t0_ms_ < 0) t0_ms_ = now_ms; // phase anchored at the first sample
        const double t = static_cast<double>(now_ms - t0_ms_) / 1000.0;
        return std::vector<core::Value>{amplitude_ * std::sin(2.0 * std::numbers::pi * freq_hz_ * t)};
    }

private:
    double amplitude_;
    double freq_hz_;
    std::int64_t t0_ms_ = -1;
};

class RandomWalkSource final : public Source {
public:
    RandomWalkSource(double step, std::uint64_t seed) : step_(step), rng_(seed) {}
    size_t field_count() const override { return 1; }
    core::Result<std::vector<core::Value>> sample(std::int64_t) override {
        position_ += rng_.next_in(-step_, step_);
        return std::vector<core::Value>{position_};
    }

private:
    double step_;
    UniformRng rng_;
    double position_ = 0.0;
};

class SineAudioSource final : public Source {
public:
    SineAudioSource(double amplitude, double freq_hz, size_t frame, double rate_hz)
        : amplitude_(amplitude), freq_hz_(freq_hz), frame_(frame), rate_hz_(rate_hz) {}
    size_t field_count() const override { return frame_; }
    core::Result<std::vector<core::Value>> sample(std::int64_t) override {
        std::vector<core::Value> out;
        out.reserve(frame_);
        for (size_t k = 0; k < frame_; ++k) {
            out.emplace_back(amplitude_ *
                             std::sin(2.0 * std::numbers::pi * freq_hz_ * static_cast<double>(k) / rate_hz_));
        }
        return out;
    }

private:
    double amplitude_;
    double freq_hz_;
    size_t frame_;
    double rate_hz_;
};

class ReplaySource final : public Source {
public:
    ReplaySource(std::vector<std::vector<double>> rows, size_t columns, bool loop)
        : rows_(std::move(rows)), columns_(columns), loop_(loop) {}
    size_t field_count() const override { return columns_; }
    core::Result<std::vector<core::Value>> sample(std::int64_t) override {
        if (cursor_ >= rows_.size()) {
            if (!loop_ || rows_.empty()) {
                return core::make_error(code::kSourceExhausted, "replay file fully consumed");
            }
            cursor_ = 0;
        }
        const auto& row = rows_[cursor_++];
        std::vector<core::Value> out;
        out.reserve(row.size());
        for (double v : row) out.emplace_back(v);
        return out;
    }

private:
    std::vector<std::vector<double>> rows_;
    size_t columns_;
    bool loop_;
    size_t cursor_ = 0;
};

/// Accelerometer-like source: three independent seeded walks for x, y, z.
class MultiAxisSource final : public Source {
public:
    MultiAxisSource(double step, std::uint64_t seed)
        : step_(step), axes_{UniformRng(seed), UniformRng(seed + 1), UniformRng(seed + 2)} {}
    size_t field_count() const override { return 3; }
    core::Result<std::vector<core::Value>> sample(std::int64_t) override {
        std::vector<core::Value> out;
        out.reserve(3);
        for (size_t a = 0; a < 3; ++a) {
            position_[a] += axes_[a].next_in(-step_, step_);
            out.emplace_back(position_[a]);
        }
        return out;
    }

private:
    double step_;
    UniformRng axes_[3];
    double position_[3] = {0.0, 0.0, 0.0};
};

core::FieldSchema numeric_field(std::string name, std::string unit = "") {
    return core::FieldSchema{std::move(name), core::FieldKind::numeric, std::move(unit)};
}

core::PluginParam number_param(std::string name, std::optional<double> def, bool required = false) {
    core::PluginParam p;
    p.name = std::move(name);
    p.type = core::ParamType::number;
    p.required = required;
    if (def) p.default_value = core::ParamValue{*def};
    return p;
}

std::vector<core::PluginDescriptor> builtin_descriptors() {
    std::vector<core::PluginDescriptor> out;

    {
        core::PluginDescriptor d;
        d.plugin_name = "constant";
        d.description = "Emits a fixed value every sample.";
        d.fields = {numeric_field("value")};
        d.parameters = {number_param("value", std::nullopt, true)};
        out.push_back(std::move(d));
    }
    {
        core::PluginDescriptor d;
        d.plugin_name = "sine";
        d.description = "Pure tone: amplitude * sin(2*pi*freq_hz*t), t in seconds since first sample.";
        d.fields = {numeric_field("value")};
        d.parameters = {number_param("amplitude", 1.0), number_param("freq_hz", std::nullopt, true)};
        out.push_back(std::move(d));
    }
    {
        core::PluginDescriptor d;
        d.plugin_name = "random_walk";
        d.description = "Seeded random walk; each step is uniform in [-step, step].";
        d.fields = {numeric_field("value")};
        d.parameters = {number_param("step", 1.0), number_param("seed", 0.0)};
        out.push_back(std::move(d));
    }
    {
        core::PluginDescriptor d;
        d.plugin_name = "sine_audio";
        d.description = "Synthetic microphone: one frame of tone samples per read; "
                        "value k is amplitude * sin(2*pi*freq_hz*k/rate_hz).";
        d.fields = {numeric_field("frame", "amplitude")};
        d.parameters = {number_param("amplitude", 1.0), number_param("freq_hz", std::nullopt, true),
                        number_param("frame", 256.0), number_param("rate_hz", 8000.0)};
        out.push_back(std::move(d));
    }
    {
        core::PluginDescriptor d;
        d.plugin_name = "replay";
        d.description = "Replays a CSV file: header row of field names, numeric rows.";
        d.fields = {numeric_field("value")};
        core::PluginParam file;
        file.name = "file";
        file.type = core::ParamType::text;
        file.required = true;
        core::PluginParam loop;
        loop.name = "loop";
        loop.type = core::ParamType::flag;
        loop.default_value = core::ParamValue{false};
        d.parameters = {std::move(file), std::move(loop)};
        out.push_back(std::move(d));
    }
    {
        core::PluginDescriptor d;
        d.plugin_name = "multi_axis";
        d.description = "Accelerometer-like three-axis walk emitting x, y, z.";
        d.fields = {numeric_field("x"), numeric_field("y"), numeric_field("z")};
        d.parameters = {number_param("step", 1.0), number_param("seed", 0.0)};
        out.push_back(std::move(d));
    }
    return out;
}

core::Result<std::vector<std::vector<double>>> load_replay_rows(const std::string& path,
                                                                size_t& columns) {
    std::ifstream in(path);
    if (!in) {
        return core::make_error(code::kParamInvalid, "replay file '" + path + "' cannot be opened");
    }
    std::string line;
    if (!std::getline(in, line)) {
        return core::make_error(code::kParamInvalid, "replay file '" + path + "' has no header row");
    }
    columns = static_cast<size_t>(std::count(line.begin(), line.end(), ',')) + 1;

    std::vector<std::vector<double>> rows;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                return core::make_error(code::kParamInvalid,
                                        "replay file '" + path + "' line " + std::to_string(line_no) +
                                            ": '" + cell + "' is not a number");
            }
        }
        if (row.size() != columns) {
            return core::make_error(code::kParamInvalid,
                                    "replay file '" + path + "' line " + std::to_string(line_no) +
                                        " has " + std::to_string(row.size()) + " cells, header has " +
                                        std::to_string(columns));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

core::Result<SourcePtr> make_builtin(const std::string& name, const core::ParamMap& p) {
    if (name == "constant") {
        return SourcePtr(new ConstantSource(num(p, "value")));
    }
    if (name == "sine") {
        return SourcePtr(new SineSource(num(p, "amplitude"), num(p, "freq_hz")));
    }
    if (name == "random_walk") {
        return SourcePtr(new RandomWalkSource(num(p, "step"), static_cast<std::uint64_t>(integer(p, "seed"))));
    }
    if (name == "sine_audio") {
        const auto frame = integer(p, "frame");
        const auto rate = num(p, "rate_hz");
        if (frame < 1) return core::make_error(code::kParamInvalid, "frame must be >= 1");
        if (rate <= 0) return core::make_error(code::kParamInvalid, "rate_hz must be positive");
        return SourcePtr(new SineAudioSource(num(p, "amplitude"), num(p, "freq_hz"),
                                             static_cast<size_t>(frame), rate));
    }
    if (name == "replay") {
        size_t columns = 0;
        auto rows = load_replay_rows(text(p, "file"), columns);
        if (!rows) return rows.error();
        return SourcePtr(new ReplaySource(rows.take(), columns, flag(p, "loop")));
    }
    if (name == "multi_axis") {
        return SourcePtr(new MultiAxisSource(num(p, "step"), static_cast<std::uint64_t>(integer(p, "seed"))));
    }
    return core::make_error(code::kPluginUnknown, "no implementation for plugin '" + name + "'");
}

bool param_type_matches(core::ParamType t, const core::ParamValue& v) {
    switch (t) {
    case core::ParamType::number: return std::holds_alternative<double>(v);
    case core::ParamType::text: return std::holds_alternative<std::string>(v);
    case core::ParamType::flag: return std::holds_alternative<bool>(v);
    }
    return false;
}

} // namespace

core::Result<core::ParamMap> resolve_params(const core::PluginDescriptor& d,
                                            const core::ParamMap& given) {
    core::ParamMap resolved;
    for (const auto& p : d.parameters) {
        auto it = given.find(p.name);
        if (it != given.end()) {
            if (!param_type_matches(p.type, it->second)) {
                return core::make_error(code::kParamTypeMismatch,
                                        "parameter '" + p.name + "' has the wrong type");
            }
            resolved.emplace(p.name, it->second);
        } else if (p.default_value) {
            resolved.emplace(p.name, *p.default_value);
        } else if (p.required) {
            return core::make_error(code::kParamMissing,
                                    "required parameter '" + p.name + "' not provided");
        }
    }
    for (const auto& [k, v] : given) {
        const bool declared = std::any_of(d.parameters.begin(), d.parameters.end(),
                                          [&](const core::PluginParam& p) { return p.name == k; });
        if (!declared) {
            return core::make_error(code::kParamUnknown,
                                    "plugin '" + d.plugin_name + "' does not accept parameter '" + k + "'");
        }
    }
    return resolved;
}

PluginRegistry PluginRegistry::with_builtins() {
    PluginRegistry r;
    for (auto& d : builtin_descriptors()) {
        r.descriptors_.emplace(d.plugin_name, std::move(d));
    }
    return r;
}

core::Result<DiscoveryReport> PluginRegistry::discover(const std::string& plugin_dir) {
    std::error_code ec;
    fs::directory_iterator it(plugin_dir, ec);
    if (ec) {
        return core::make_error(code::kDirectoryUnreadable,
                                "cannot list '" + plugin_dir + "': " + ec.message());
    }

    std::vector<fs::path> files;
    for (const auto& entry : it) {
        if (entry.is_regular_file() && entry.path().extension() == ".plugin") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    DiscoveryReport report;
    std::set<std::string> seen;
    for (const auto& file : files) {
        std::ifstream in(file);
        std::stringstream buf;
        buf << in.rdbuf();
        auto parsed = wire::parse_descriptor(buf.str());
        if (!parsed) {
            report.diagnostics.push_back({file.string(), parsed.error().message});
            continue;
        }
        auto d = parsed.take();
        auto valid = core::validate_descriptor(d);
        if (!valid.ok()) {
            report.diagnostics.push_back({file.string(), valid.violations.front().code + ": " +
                                                             valid.violations.front().message});
            continue;
        }
        if (!seen.insert(d.plugin_name).second) {
            report.diagnostics.push_back({file.string(), "duplicate plugin '" + d.plugin_name + "'"});
            continue;
        }
        report.descriptors.push_back(std::move(d));
    }
    std::sort(report.descriptors.begin(), report.descriptors.end(),
              [](const auto& a, const auto& b) { return a.plugin_name < b.plugin_name; });
    return report;
}

core::Result<PluginRegistry> PluginRegistry::from_directory(const std::string& plugin_dir,
                                                            std::vector<Diagnostic>* diagnostics) {
    auto report = discover(plugin_dir);
    if (!report) return report.error();
    PluginRegistry r;
    for (auto& d : report.value().descriptors) {
        r.descriptors_.emplace(d.plugin_name, std::move(d));
    }
    if (diagnostics) *diagnostics = std::move(report.value().diagnostics);
    return r;
}

const core::PluginDescriptor* PluginRegistry::find(const std::string& plugin_name) const {
    auto it = descriptors_.find(plugin_name);
    return it == descriptors_.end() ? nullptr : &it->second;
}

std::set<std::string> PluginRegistry::names() const {
    std::set<std::string> out;
    for (const auto& [name, _] : descriptors_) out.insert(name);
    return out;
}

std::vector<core::PluginDescriptor> PluginRegistry::descriptors() const {
    std::vector<core::PluginDescriptor> out;
    out.reserve(descriptors_.size());
    for (const auto& [_, d] : descriptors_) out.push_back(d);
    return out;
}

core::Result<SourcePtr> PluginRegistry::instantiate(const std::string& plugin_name,
                                                    const core::ParamMap& params) const {
    const auto* d = find(plugin_name);
    if (!d) {
        return core::make_error(code::kPluginUnknown, "plugin '" + plugin_name + "' is not registered");
    }
    auto resolved = resolve_params(*d, params);
    if (!resolved) return resolved.error();
    return make_builtin(plugin_name, resolved.value());
}

} // namespace sensemesh::sources
