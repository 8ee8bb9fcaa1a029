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

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace sensemesh::core {

/// Machine-readable error: a stable code plus a human-oriented message.
struct Error {
    std::string code;
    std::string message;

    bool operator==(const Error&) const = default;
};

/// Minimal expected-style result. Recoverable failures travel as values;
/// exceptions are reserved for programmer errors.
template <typename T>
class Result {
public:
    Result(T value) : value_(std::move(value)) {}
    Result(Error error) : error_(std::move(error)) {}

    bool ok() const { return value_.has_value(); }
    explicit operator bool() const { return ok(); }

    const T& value() const& {
        if (!value_) throw std::logic_error("Result::value on error: " + error_->code);
        return *value_;
    }
    T& value() & {
        if (!value_) throw std::logic_error("Result::value on error: " + error_->code);
        return *value_;
    }
    T&& take() {
        if (!value_) throw std::logic_error("Result::take on error: " + error_->code);
        return std::move(*value_);
    }

    const Error& error() const {
        if (!error_) throw std::logic_error("Result::error on ok result");
        return *error_;
    }

private:
    std::optional<T> value_;
    std::optional<Error> error_;
};

template <>
class Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)) {}

    static Result<void> success() { return {}; }

    bool ok() const { return !error_.has_value(); }
    explicit operator bool() const { return ok(); }

    const Error& error() const {
        if (!error_) throw std::logic_error("Result::error on ok result");
        return *error_;
    }

private:
    std::optional<Error> error_;
};

inline Error make_error(std::string code, std::string message) {
    return Error{std::move(code), std::move(message)};
}

} // namespace sensemesh::core
