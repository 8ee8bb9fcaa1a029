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

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sensemesh::processing {

namespace code {
inline constexpr const char* kProcessorUnknown = "PROCESSOR_UNKNOWN";
inline constexpr const char* kProcessorArity = "PROCESSOR_ARITY";
inline constexpr const char* kEmptyFrame = "EMPTY_FRAME";
inline constexpr const char* kParamMissing = "PARAM_MISSING";
inline constexpr const char* kParamTypeMismatch = "PARAM_TYPE_MISMATCH";
inline constexpr const char* kParamUnknown = "PARAM_UNKNOWN";
inline constexpr const char* kParamInvalid = "PARAM_INVALID";
} // namespace code

/// Result of pushing one value vector through a processor or a whole chain.
/// `filtered` means the element was deliberately dropped — not an error; the
/// caller must not assign it a sequence number.
class ChainOutcome {
public:
    static ChainOutcome pass(std::vector<core::Value> values) {
        ChainOutcome o;
        o.kind_ = Kind::passed;
        o.values_ = std::move(values);
        return o;
    }
    static ChainOutcome filtered() {
        ChainOutcome o;
        o.kind_ = Kind::filtered;
        return o;
    }
    static ChainOutcome fail(core::Error e) {
        ChainOutcome o;
        o.kind_ = Kind::failed;
        o.error_ = std::move(e);
        return o;
    }

    bool passed() const { return kind_ == Kind::passed; }
    bool was_filtered() const { return kind_ == Kind::filtered; }
    bool failed() const { return kind_ == Kind::failed; }

    const std::vector<core::Value>& values() const { return values_; }
    std::vector<core::Value> take_values() { return std::move(values_); }
    const core::Error& error() const { return error_; }

private:
    enum class Kind { passed, filtered, failed };
    Kind kind_ = Kind::filtered;
    std::vector<core::Value> values_;
    core::Error error_;
};

/// One chain stage. Stateful (e.g. moving averages); a chain instance belongs
/// to exactly one virtual sensor and is only ever driven from its sampling
/// task, so stages need no internal locking.
class Processor {
public:
    virtual ~Processor() = default;
    virtual ChainOutcome apply(const std::vector<core::Value>& input) = 0;
};

/// Resolves the most recent stored value vector of a co-located sensor, for
/// fusion stages. Returns nullopt when the sensor is unknown or still empty.
using LatestLookup =
    std::function<std::optional<std::vector<core::Value>>(const std::string& sensor)>;

/// Ordered processor pipeline. Stages run in declared order, each consuming
/// the previous stage's output; a filtered outcome short-circuits the rest.
class Chain {
public:
    Chain() = default;
    explicit Chain(std::vector<std::unique_ptr<Processor>> stages) : stages_(std::move(stages)) {}

    ChainOutcome apply(const std::vector<core::Value>& input);
    size_t size() const { return stages_.size(); }

private:
    std::vector<std::unique_ptr<Processor>> stages_;
};

/// Names instantiable via make_chain.
std::set<std::string> processor_names();

/// Builds a chain from specs, validating parameters up front. `lookup` is only
/// needed when the chain contains fusion stages.
core::Result<Chain> make_chain(const std::vector<core::ProcessorSpec>& specs,
                               LatestLookup lookup = {});

/// Standalone decibel conversion used both by the rms_db stage and by tests
/// that need an independent reference path.
core::Result<double> rms_to_db(const std::vector<double>& frame, double floor_db, double ref);

} // namespace sensemesh::processing
