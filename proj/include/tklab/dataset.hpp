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
#include <filesystem>
#include <span>
#include <vector>

#include "tklab/optim.hpp"
#include "tklab/rng.hpp"
#include "tklab/tensor.hpp"

namespace tklab {

/// Labelled samples. inputs has shape (n, sample_shape...).
template <typename T>
struct Dataset {
    Tensor<T> inputs;
    std::vector<std::int32_t> labels;
    std::size_t class_count = 0;

    std::size_t size() const noexcept { return labels.size(); }
    Shape sample_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }

    /// Throws ConfigError if empty, mis-sized or a label is out of range.
    void validate() const;

    /// Samples at `indices`, in order.
    Dataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const Dataset&) const = default;
};

/// Convert between scalar precisions.
template <typename To, typename From>
Dataset<To> cast_dataset(const Dataset<From>& in) {
    Dataset<To> out;
    std::vector<To> values(in.inputs.values().begin(), in.inputs.values().end());
    out.inputs = Tensor<To>(in.inputs.shape(), std::move(values));
    out.labels = in.labels;
    out.class_count = in.class_count;
    return out;
}

/// Gaussian clusters around per-class centers that depend only on
/// (classes, dim). Label of sample i is i mod classes.
template <typename T>
Dataset<T> gen_blobs(std::size_t n, std::size_t classes, std::size_t dim, double spread, std::uint64_t seed);

/// Center of class `label` used by gen_blobs.
std::vector<double> blob_center(std::size_t label, std::size_t classes, std::size_t dim);

/// Two interleaved spirals in the plane, alternating labels 0,1,0,1,...
template <typename T>
Dataset<T> gen_spirals(std::size_t n, double turns, double noise, std::uint64_t seed);

/// Noise-free point of spiral `label` at curve parameter t in [0, 1]:
/// radius t, angle 2*pi*turns*t + pi*label.
std::array<double, 2> spiral_point(double t, int label, double turns);

/// Reads an IDX image file (magic 0x00000803, n x rows x cols bytes) and an
/// IDX label file (magic 0x00000801). Pixels are scaled to [0, 1]; samples
/// have shape (1, rows, cols).
template <typename T>
Dataset<T> load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Parse failure while reading an IDX file.
class IdxError : public Error {
public:
    enum class Kind { io, magic, truncated, count_mismatch };
    IdxError(Kind kind, const std::filesystem::path& file, const std::string& what)
        : Error(file.string() + ": " + what), kind_(kind), file_(file) {}
    Kind kind() const noexcept { return kind_; }
    const std::filesystem::path& file() const noexcept { return file_; }

private:
    Kind kind_;
    std::filesystem::path file_;
};

/// Writes IDX files; used by tests and for exporting subsets.
void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

/// Random horizontal flip (p = 0.5) and zero-padded random crop applied to
/// each sample of a (n, channels, height, width) batch. Labels are not part
/// of the batch and are therefore unchanged.
template <typename T>
Tensor<T> augment(const Tensor<T>& batch, const AugmentConfig& config, CounterRng& rng);

/// Mirror one (channels, height, width) image left-right.
template <typename T>
void flip_horizontal(std::span<T> image, std::size_t channels, std::size_t height, std::size_t width);

/// Crop a (channels, height, width) window from the image padded by `padding`
/// zeros on every side, starting at (dy, dx) in padded coordinates.
template <typename T>
std::vector<T> crop_padded(std::span<const T> image, std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t padding, std::size_t dy, std::size_t dx);

/// Deterministic permutation of [0, n) split into consecutive batches; the
/// last batch may be short.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

/// Uniform permutation of [0, n) by Fisher-Yates.
std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng);

template <typename T>
struct Split {
    Dataset<T> train;
    Dataset<T> test;
};

/// Held-out split with a dedicated seed: the first round(test_fraction * n)
/// samples of a permutation form the test set.
template <typename T>
Split<T> train_test_split(const Dataset<T>& data, double test_fraction, std::uint64_t seed);

}  // namespace tklab
