/*
 * Copyright 2026 The tklab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tklab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model, training, pruning or experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Two tensors or parameter sets that must be shape-congruent are not.
class CongruenceError : public Error {
public:
    using Error::Error;
};

/// A loss or parameter became NaN/Inf. Carries where it happened.
class NumericError : public Error {
public:
    NumericError(const std::string& what, long epoch, long batch)
        : Error(what + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          epoch_(epoch), batch_(batch) {}

    long epoch() const noexcept { return epoch_; }
    long batch() const noexcept { return batch_; }

private:
    long epoch_;
    long batch_;
};

/// An invariant the engine guarantees was observed broken.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Correlation queried outside the domain where it is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was invoked before the stage it depends on.
class DependencyError : public Error {
public:
    DependencyError(const std::string& what, std::string stage)
        : Error(what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tklab
