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

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tklab/model.hpp"

namespace tklab {

/// Binary keep/prune pattern for one prunable parameter tensor.
struct MaskEntry {
    std::string name;
    Shape shape;
    std::vector<std::uint8_t> bits;  // one byte per weight, 0 or 1

    std::size_t size() const noexcept { return bits.size(); }
    std::size_t kept() const noexcept;
    bool operator==(const MaskEntry&) const = default;
};

/// Where a mask came from: algorithm name, config digest and free-form
/// algorithm parameters (rho, rounds, ...).
struct MaskMetadata {
    std::string algorithm;
    std::string config_digest;
    std::map<std::string, std::string> params;
    bool operator==(const MaskMetadata&) const = default;
};

struct Mask {
    std::vector<MaskEntry> entries;
    std::set<std::string> exempt_names;
    MaskMetadata metadata;

    const MaskEntry* find(const std::string& name) const;
    /// Same pattern and exemptions; metadata ignored.
    bool same_pattern(const Mask& other) const {
        return entries == other.entries && exempt_names == other.exempt_names;
    }
    bool operator==(const Mask&) const = default;
};

/// The first prunable entry when `exempt_first`, otherwise empty.
template <typename T>
std::set<std::string> exempt_set(const ParamSet<T>& params, bool exempt_first);

/// Mask of all ones over the prunable entries.
template <typename T>
Mask all_ones_mask(const ParamSet<T>& params, std::set<std::string> exempt_names = {});

/// Throws CongruenceError unless every prunable entry has a same-shape mask
/// entry in the same order and no other entries exist.
template <typename T>
void require_congruent(const ParamSet<T>& params, const Mask& mask);

/// Elementwise product on prunable entries; others untouched.
template <typename T>
ParamSet<T> apply_mask(ParamSet<T> params, const Mask& mask);

/// Zeros every masked-out position of `tensor` in place.
template <typename T>
void zero_masked(std::span<T> values, const MaskEntry& entry);

/// Fraction of zeros over all mask entries.
double sparsity(const Mask& mask);

struct LayerSparsity {
    std::string name;
    std::size_t size = 0;
    std::size_t zeros = 0;
    double sparsity = 0.0;
};
std::vector<LayerSparsity> per_layer_sparsity(const Mask& mask);

/// Mask with a one exactly where the weight is nonzero; exempt entries all ones.
template <typename T>
Mask mask_from_support(const ParamSet<T>& params, const std::set<std::string>& exempt_names);

struct MaskViolation {
    std::string name;
    std::size_t index = 0;
    double value = 0.0;
    std::string to_string() const;
};

/// First prunable weight that is nonzero at a masked-out position, if any.
/// Entries without a mask entry are unconstrained.
template <typename T>
std::optional<MaskViolation> assert_mask_invariant(const ParamSet<T>& params, const Mask& mask);

}  // namespace tklab
