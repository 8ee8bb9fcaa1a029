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

#include "sensemesh/processing/processor.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace sensemesh::processing {

namespace {

core::Result<std::vector<double>> numeric_only(const std::vector<core::Value>& in,
                                               const char* stage) {
    std::vector<double> out;
    out.reserve(in.size());
    for (const auto& v : in) {
        if (!core::is_numeric(v)) {
            return core::make_error(code::kProcessorArity,
                                    std::string(stage) + " only accepts numeric values");
        }
        out.push_back(core::as_number(v));
    }
    return out;
}

std::vector<core::Value> wrap(const std::vector<double>& in) {
    std::vector<core::Value> out;
    out.reserve(in.size());
    for (double v : in) out.emplace_back(v);
    return out;
}

class Passthrough final : public Processor {
public:
    ChainOutcome apply(const std::vector<core::Value>& input) override {
        return ChainOutcome::pass(input);
    }
};

class MovingAverage final : public Processor {
public:
    explicit MovingAverage(size_t window) : window_(window) {}

    ChainOutcome apply(const std::vector<core::Value>& input) override {
        auto nums = numeric_only(input, "moving_average");
        if (!nums) return ChainOutcome::fail(nums.error());
        if (!recent_.empty() && recent_.front().size() != nums.value().size()) {
            return ChainOutcome::fail(core::Error{code::kProcessorArity,
                                                  "moving_average input arity changed mid-stream"});
        }
        recent_.push_back(nums.take());
        if (recent_.size() > window_) recent_.pop_front();

        std::vector<double> mean(recent_.front().size(), 0.0);
        for (const auto& row : recent_) {
            for (size_t i = 0; i < row.size(); ++i) mean[i] += row[i];
        }
        for (auto& m : mean) m /= static_cast<double>(recent_.size());
        return ChainOutcome::pass(wrap(mean));
    }

private:
    size_t window_;
    std::deque<std::vector<double>> recent_;
};

class RmsDb final : public Processor {
public:
    RmsDb(double floor_db, double ref) : floor_db_(floor_db), ref_(ref) {}

    ChainOutcome apply(const std::vector<core::Value>& input) override {
        auto nums = numeric_only(input, "rms_db");
        if (!nums) return ChainOutcome::fail(nums.error());
        auto db = rms_to_db(nums.value(), floor_db_, ref_);
        if (!db) return ChainOutcome::fail(db.error());
        return ChainOutcome::pass({core::Value{db.value()}});
    }

private:
    double floor_db_;
    double ref_;
};

class FilterRange final : public Processor {
public:
    FilterRange(double min, double max) : min_(min), max_(max) {}

    ChainOutcome apply(const std::vector<core::Value>& input) override {
        auto nums = numeric_only(input, "filter_range");
        if (!nums) return ChainOutcome::fail(nums.error());
        for (double v : nums.value()) {
            if (v < min_ || v > max_) return ChainOutcome::filtered();
        }
        return ChainOutcome::pass(input);
    }

private:
    double min_;
    double max_;
};

/// Element-wise mean across the current input and the latest stored vector of
/// each named co-located sensor. Any fusion input still missing drops the tick
/// (filtered) rather than emitting a partial mean.
class FuseMean final : public Processor {
public:
    FuseMean(std::vector<std::string> sensors, LatestLookup lookup)
        : sensors_(std::move(sensors)), lookup_(std::move(lookup)) {}

    ChainOutcome apply(const std::vector<core::Value>& input) override {
        auto nums = numeric_only(input, "fuse_mean");
        if (!nums) return ChainOutcome::fail(nums.error());
        std::vector<double> acc = nums.take();
        size_t contributors = 1;
        for (const auto& name : sensors_) {
            auto latest = lookup_ ? lookup_(name) : std::nullopt;
            if (!latest) return ChainOutcome::filtered();
            auto peer = numeric_only(*latest, "fuse_mean");
            if (!peer) return ChainOutcome::fail(peer.error());
            if (peer.value().size() != acc.size()) {
                return ChainOutcome::fail(core::Error{
                    code::kProcessorArity,
                    "fuse_mean arity mismatch with sensor '" + name + "'"});
            }
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += peer.value()[i];
            ++contributors;
        }
        for (auto& v : acc) v /= static_cast<double>(contributors);
        return ChainOutcome::pass(wrap(acc));
    }

private:
    std::vector<std::string> sensors_;
    LatestLookup lookup_;
};

/// Curated parameter access for chain construction.
class Params {
public:
    Params(const std::string& processor, const core::ParamMap& given)
        : processor_(processor), given_(given) {}

    core::Result<double> number(const std::string& key) {
        auto it = find(key);
        if (it == given_.end()) {
            return core::make_error(code::kParamMissing,
                                    processor_ + " requires parameter '" + key + "'");
        }
        if (!std::holds_alternative<double>(it->second)) {
            return core::make_error(code::kParamTypeMismatch,
                                    processor_ + " parameter '" + key + "' must be a number");
        }
        return std::get<double>(it->second);
    }

    core::Result<double> number_or(const std::string& key, double fallback) {
        auto it = find(key);
        if (it == given_.end()) return fallback;
        if (!std::holds_alternative<double>(it->second)) {
            return core::make_error(code::kParamTypeMismatch,
                                    processor_ + " parameter '" + key + "' must be a number");
        }
        return std::get<double>(it->second);
    }

    core::Result<std::string> text(const std::string& key) {
        auto it = find(key);
        if (it == given_.end()) {
            return core::make_error(code::kParamMissing,
                                    processor_ + " requires parameter '" + key + "'");
        }
        if (!std::holds_alternative<std::string>(it->second)) {
            return core::make_error(code::kParamTypeMismatch,
                                    processor_ + " parameter '" + key + "' must be text");
        }
        return std::get<std::string>(it->second);
    }

    /// Call after all reads: rejects parameters nobody consumed.
    core::Result<void> finish() {
        for (const auto& [k, _] : given_) {
            if (!consumed_.count(k)) {
                return core::make_error(code::kParamUnknown,
                                        processor_ + " does not accept parameter '" + k + "'");
            }
        }
        return core::Result<void>::success();
    }

private:
    core::ParamMap::const_iterator find(const std::string& key) {
        consumed_.insert(key);
        return given_.find(key);
    }

    std::string processor_;
    const core::ParamMap& given_;
    std::set<std::string> consumed_;
};

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string part;
    while (std::getline(ss, part, ',')) {
        while (!part.empty() && part.front() == ' ') part.erase(part.begin());
        while (!part.empty() && part.back() == ' ') part.pop_back();
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

core::Result<std::unique_ptr<Processor>> make_stage(const core::ProcessorSpec& spec,
                                                    const LatestLookup& lookup) {
    Params params(spec.name, spec.params);

    if (spec.name == "passthrough") {
        if (auto done = params.finish(); !done) return done.error();
        return std::unique_ptr<Processor>(new Passthrough());
    }
    if (spec.name == "moving_average") {
        auto window = params.number("window");
        if (!window) return window.error();
        if (auto done = params.finish(); !done) return done.error();
        if (window.value() < 1.0 || window.value() != std::floor(window.value())) {
            return core::make_error(code::kParamInvalid,
                                    "moving_average window must be a positive integer");
        }
        return std::unique_ptr<Processor>(new MovingAverage(static_cast<size_t>(window.value())));
    }
    if (spec.name == "rms_db") {
        auto floor_db = params.number_or("floor_db", -120.0);
        if (!floor_db) return floor_db.error();
        auto ref = params.number_or("ref", 1.0);
        if (!ref) return ref.error();
        if (auto done = params.finish(); !done) return done.error();
        if (ref.value() <= 0.0) {
            return core::make_error(code::kParamInvalid, "rms_db ref must be positive");
        }
        return std::unique_ptr<Processor>(new RmsDb(floor_db.value(), ref.value()));
    }
    if (spec.name == "filter_range") {
        auto min = params.number("min");
        if (!min) return min.error();
        auto max = params.number("max");
        if (!max) return max.error();
        if (auto done = params.finish(); !done) return done.error();
        if (min.value() > max.value()) {
            return core::make_error(code::kParamInvalid, "filter_range requires min <= max");
        }
        return std::unique_ptr<Processor>(new FilterRange(min.value(), max.value()));
    }
    if (spec.name == "fuse_mean") {
        auto sensors = params.text("sensors");
        if (!sensors) return sensors.error();
        if (auto done = params.finish(); !done) return done.error();
        auto names = split_names(sensors.value());
        if (names.empty()) {
            return core::make_error(code::kParamInvalid,
                                    "fuse_mean requires at least one sensor name");
        }
        return std::unique_ptr<Processor>(new FuseMean(std::move(names), lookup));
    }
    return core::make_error(code::kProcessorUnknown,
                            "processor '" + spec.name + "' is not registered");
}

} // namespace

ChainOutcome Chain::apply(const std::vector<core::Value>& input) {
    std::vector<core::Value> current = input;
    for (auto& stage : stages_) {
        auto outcome = stage->apply(current);
        if (!outcome.passed()) return outcome;
        current = outcome.take_values();
    }
    return ChainOutcome::pass(std::move(current));
}

std::set<std::string> processor_names() {
    return {"passthrough", "moving_average", "rms_db", "filter_range", "fuse_mean"};
}

core::Result<Chain> make_chain(const std::vector<core::ProcessorSpec>& specs,
                               LatestLookup lookup) {
    std::vector<std::unique_ptr<Processor>> stages;
    stages.reserve(specs.size());
    for (const auto& spec : specs) {
        auto stage = make_stage(spec, lookup);
        if (!stage) return stage.error();
        stages.push_back(stage.take());
    }
    return Chain(std::move(stages));
}

core::Result<double> rms_to_db(const std::vector<double>& frame, double floor_db, double ref) {
    if (frame.empty()) {
        return core::make_error(code::kEmptyFrame, "decibel conversion needs a non-empty frame");
    }
    double sum_sq = 0.0;
    for (double v : frame) sum_sq += v * v;
    const double rms = std::sqrt(sum_sq / static_cast<double>(frame.size()));
    if (rms <= 0.0) return floor_db;
    return std::max(floor_db, 20.0 * std::log10(rms / ref));
}

} // namespace sensemesh::processing
