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

#include <array>
#include <cstdint>

namespace tklab {

/// Purpose tags for independent random streams. Adding a consumer of one
/// stream never shifts the values seen by another.
enum class Stream : std::uint32_t {
    init = 1,
    shuffle = 2,
    augment = 3,
    reinit = 4,
    data = 5,
    split = 6,
    null_model = 7,
    centers = 8,
    probe = 9,
};

/// Counter-based generator (Philox4x32-10). The output at position i depends
/// only on (seed, stream, substream, i).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) noexcept;

    std::uint64_t next_u64() noexcept;
    std::uint32_t next_u32() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double low, double high) noexcept { return low + (high - low) * uniform(); }

    /// Standard normal via Box-Muller; portable across standard libraries.
    double normal() noexcept;

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    bool coin() noexcept { return (next_u32() & 1u) != 0; }

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int cursor_ = 4;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer; mixes a seed with a secondary index.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// One Philox4x32-10 block; exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

}  // namespace tklab
