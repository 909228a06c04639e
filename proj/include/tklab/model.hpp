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
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tklab/rng.hpp"
#include "tklab/tensor.hpp"

namespace tklab {

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    bool operator==(const DenseLayer&) const = default;
};

struct Conv2DLayer {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    std::size_t stride = 1;
    bool operator==(const Conv2DLayer&) const = default;
};

struct ReluLayer {
    bool operator==(const ReluLayer&) const = default;
};

struct FlattenLayer {
    bool operator==(const FlattenLayer&) const = default;
};

using Layer = std::variant<DenseLayer, Conv2DLayer, ReluLayer, FlattenLayer>;

std::string layer_kind(const Layer& layer);

/// Sequential network description. Shapes exclude the batch axis.
struct ModelSpec {
    Shape input_shape;
    std::size_t class_count = 0;
    std::vector<Layer> layers;

    bool operator==(const ModelSpec&) const = default;
};

/// Throws ConfigError unless adjacent layers compose, the final output is
/// (class_count) and at least one layer carries weights.
void validate(const ModelSpec& model);

/// Per-layer output shapes (without batch axis); validates on the way.
std::vector<Shape> layer_output_shapes(const ModelSpec& model);

/// Stable content digest of the model topology.
std::uint64_t model_digest(const ModelSpec& model);

/// Convenience: Dense/ReLU stack with the given hidden widths.
ModelSpec make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t classes);

enum class ProvenanceKind : std::uint8_t { init, reinit, rewind, pretrained, sparse_trained, finetuned };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::init;
    long epoch = 0;       // k for rewind, T for pretrained
    bool masked = false;  // carries the "(.) applied mask" annotation

    std::string to_string() const;
    static Provenance parse(const std::string& text);
    bool operator==(const Provenance&) const = default;
};

template <typename T>
struct ParamEntry {
    std::string name;
    Tensor<T> tensor;
    bool prunable = false;

    bool operator==(const ParamEntry&) const = default;
};

/// Ordered named weight tensors of one model instance.
template <typename T>
struct ParamSet {
    std::vector<ParamEntry<T>> entries;
    Provenance provenance;

    std::size_t size() const noexcept { return entries.size(); }
    ParamEntry<T>& operator[](std::size_t i) { return entries[i]; }
    const ParamEntry<T>& operator[](std::size_t i) const { return entries[i]; }

    const ParamEntry<T>* find(const std::string& name) const;

    /// Same weights, provenance ignored.
    bool same_values(const ParamSet& other) const { return entries == other.entries; }
    bool operator==(const ParamSet&) const = default;
};

/// Throws CongruenceError unless names, order and shapes agree entry-by-entry.
template <typename T, typename U>
void require_congruent(const ParamSet<T>& a, const ParamSet<U>& b) {
    if (a.size() != b.size()) {
        throw CongruenceError("parameter sets have " + std::to_string(a.size()) + " and " +
                              std::to_string(b.size()) + " entries");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape()) {
            throw CongruenceError("entry " + std::to_string(i) + " differs: " + a[i].name +
                                  shape_string(a[i].tensor.shape()) + " vs " + b[i].name +
                                  shape_string(b[i].tensor.shape()));
        }
    }
}

/// Parameter names and shapes the model owns, in topology order.
struct ParamLayout {
    std::string name;
    Shape shape;
    bool prunable = false;
    std::size_t fan_in = 0;
};
std::vector<ParamLayout> param_layout(const ModelSpec& model);

/// Zero-filled parameters with the model's layout.
template <typename T>
ParamSet<T> zero_params(const ModelSpec& model);

/// Weights i.i.d. uniform on [-sqrt(6/fan_in), +sqrt(6/fan_in)], biases zero.
template <typename T>
ParamSet<T> init_params(const ModelSpec& model, std::uint64_t seed, Stream stream = Stream::init);

/// Freshly drawn independent initialization used for random re-initialization.
template <typename T>
ParamSet<T> reinit_params(const ModelSpec& model, std::uint64_t seed);

inline constexpr std::uint64_t kReinitSeedMix = 0x5DEECE66DA3B9F17ull;

inline std::uint64_t reinit_seed(std::uint64_t seed) { return seed ^ kReinitSeedMix; }

}  // namespace tklab
