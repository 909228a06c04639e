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

#include "tklab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace tklab {

template <typename T>
void Dataset<T>::validate() const {
    if (labels.empty()) throw ConfigError("dataset is empty");
    if (inputs.rank() < 2 || inputs.dim(0) != labels.size()) {
        throw ConfigError("dataset inputs " + shape_string(inputs.shape()) + " do not match " +
                          std::to_string(labels.size()) + " labels");
    }
    for (const auto label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
            throw ConfigError("label " + std::to_string(label) + " outside [0, " + std::to_string(class_count) + ")");
        }
    }
}

template <typename T>
Dataset<T> Dataset<T>::subset(std::span<const std::size_t> indices) const {
    Shape shape = inputs.shape();
    const std::size_t stride = shape_size(sample_shape());
    shape[0] = indices.size();
    Dataset out;
    out.inputs = Tensor<T>(shape);
    out.labels.reserve(indices.size());
    out.class_count = class_count;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        std::copy_n(inputs.data() + src * stride, stride, out.inputs.data() + i * stride);
        out.labels.push_back(labels[src]);
    }
    return out;
}

std::vector<double> blob_center(std::size_t label, std::size_t classes, std::size_t dim) {
    CounterRng rng(static_cast<std::uint64_t>(classes) * 1000003u + dim, Stream::centers, label);
    std::vector<double> center(dim);
    for (double& c : center) c = 3.0 * rng.normal();
    return center;
}

template <typename T>
Dataset<T> gen_blobs(std::size_t n, std::size_t classes, std::size_t dim, double spread, std::uint64_t seed) {
    if (classes < 2 || n < classes) throw ConfigError("gen_blobs needs n >= classes >= 2");
    if (dim == 0) throw ConfigError("gen_blobs needs dim >= 1");
    if (spread < 0.0) throw ConfigError("gen_blobs spread must be non-negative");
    std::vector<std::vector<double>> centers;
    for (std::size_t c = 0; c < classes; ++c) centers.push_back(blob_center(c, classes, dim));

    Dataset<T> data;
    data.inputs = Tensor<T>({n, dim});
    data.class_count = classes;
    CounterRng rng(seed, Stream::data);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % classes;
        data.labels.push_back(static_cast<std::int32_t>(label));
        for (std::size_t d = 0; d < dim; ++d) {
            data.inputs[i * dim + d] = static_cast<T>(centers[label][d] + spread * rng.normal());
        }
    }
    return data;
}

std::array<double, 2> spiral_point(double t, int label, double turns) {
    const double angle = 2.0 * std::numbers::pi * turns * t + std::numbers::pi * label;
    return {t * std::cos(angle), t * std::sin(angle)};
}

template <typename T>
Dataset<T> gen_spirals(std::size_t n, double turns, double noise, std::uint64_t seed) {
    if (n < 2 || n % 2 != 0) throw ConfigError("gen_spirals needs an even n >= 2");
    if (!(turns > 0.0)) throw ConfigError("gen_spirals turns must be positive");
    if (noise < 0.0) throw ConfigError("gen_spirals noise must be non-negative");
    Dataset<T> data;
    data.inputs = Tensor<T>({n, 2});
    data.class_count = 2;
    CounterRng rng(seed, Stream::data);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double t = rng.uniform();
        auto p = spiral_point(t, label, turns);
        const double nx = rng.normal();
        const double ny = rng.normal();
        data.inputs[2 * i] = static_cast<T>(p[0] + noise * nx);
        data.inputs[2 * i + 1] = static_cast<T>(p[1] + noise * ny);
        data.labels.push_back(label);
    }
    return data;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IdxError(IdxError::Kind::io, path, "cannot open file");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path, std::uint8_t rank) {
    if (bytes.size() < 4) throw IdxError(IdxError::Kind::truncated, path, "file shorter than the IDX magic");
    if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 || bytes[3] != rank) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad IDX magic %02x %02x %02x %02x, expected 00 00 08 %02x", bytes[0],
                      bytes[1], bytes[2], bytes[3], rank);
        throw IdxError(IdxError::Kind::magic, path, buf);
    }
    if (bytes.size() < 4 + 4u * rank) throw IdxError(IdxError::Kind::truncated, path, "truncated IDX header");
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void push_be32(std::vector<std::uint8_t>& out, std::size_t value) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(value >> shift));
}

}  // namespace

template <typename T>
Dataset<T> load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto images = read_file(images_path);
    check_magic(images, images_path, 0x03);
    const std::size_t n = read_be32(images, 4);
    const std::size_t rows = read_be32(images, 8);
    const std::size_t cols = read_be32(images, 12);
    const std::size_t pixels = n * rows * cols;
    if (images.size() < 16 + pixels) {
        throw IdxError(IdxError::Kind::truncated, images_path,
                       "expected " + std::to_string(pixels) + " pixel bytes, found " + std::to_string(images.size() - 16));
    }

    const auto labels = read_file(labels_path);
    check_magic(labels, labels_path, 0x01);
    const std::size_t label_count = read_be32(labels, 4);
    if (labels.size() < 8 + label_count) {
        throw IdxError(IdxError::Kind::truncated, labels_path,
                       "expected " + std::to_string(label_count) + " labels, found " + std::to_string(labels.size() - 8));
    }
    if (label_count != n) {
        throw IdxError(IdxError::Kind::count_mismatch, labels_path,
                       std::to_string(label_count) + " labels for " + std::to_string(n) + " images in " +
                           images_path.string());
    }
    if (n == 0) throw IdxError(IdxError::Kind::truncated, images_path, "IDX file holds no samples");

    Dataset<T> data;
    data.inputs = Tensor<T>({n, 1, rows, cols});
    for (std::size_t i = 0; i < pixels; ++i) data.inputs[i] = static_cast<T>(images[16 + i]) / T{255};
    std::int32_t max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        data.labels.push_back(labels[8 + i]);
        max_label = std::max<std::int32_t>(max_label, labels[8 + i]);
    }
    data.class_count = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
    return data;
}

void write_idx_images(const std::filesystem::path& path, std::size_t rows, std::size_t cols,
                      std::span<const std::uint8_t> pixels) {
    if (rows == 0 || cols == 0 || pixels.size() % (rows * cols) != 0) {
        throw ConfigError("pixel count is not a multiple of rows*cols");
    }
    std::vector<std::uint8_t> bytes{0, 0, 0x08, 0x03};
    push_be32(bytes, pixels.size() / (rows * cols));
    push_be32(bytes, rows);
    push_be32(bytes, cols);
    bytes.insert(bytes.end(), pixels.begin(), pixels.end());
    write_bytes(path, bytes);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> bytes{0, 0, 0x08, 0x01};
    push_be32(bytes, labels.size());
    bytes.insert(bytes.end(), labels.begin(), labels.end());
    write_bytes(path, bytes);
}

template <typename T>
void flip_horizontal(std::span<T> image, std::size_t channels, std::size_t height, std::size_t width) {
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = 0; y < height; ++y) {
            T* row = image.data() + (c * height + y) * width;
            std::reverse(row, row + width);
        }
    }
}

template <typename T>
std::vector<T> crop_padded(std::span<const T> image, std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t padding, std::size_t dy, std::size_t dx) {
    std::vector<T> out(channels * height * width, T{0});
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t y = 0; y < height; ++y) {
            const long sy = static_cast<long>(y + dy) - static_cast<long>(padding);
            if (sy < 0 || sy >= static_cast<long>(height)) continue;
            for (std::size_t x = 0; x < width; ++x) {
                const long sx = static_cast<long>(x + dx) - static_cast<long>(padding);
                if (sx < 0 || sx >= static_cast<long>(width)) continue;
                out[(c * height + y) * width + x] = image[(c * height + static_cast<std::size_t>(sy)) * width +
                                                          static_cast<std::size_t>(sx)];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& batch, const AugmentConfig& config, CounterRng& rng) {
    if (!config.enabled()) return batch;
    if (batch.rank() != 4) {
        throw ConfigError("augmentation needs a (n, channels, height, width) batch, got " + shape_string(batch.shape()));
    }
    const std::size_t channels = batch.dim(1), height = batch.dim(2), width = batch.dim(3);
    if (config.crop_padding > std::min(height, width)) {
        throw ConfigError("crop padding " + std::to_string(config.crop_padding) + " exceeds image size");
    }
    Tensor<T> out = batch;
    const std::size_t stride = channels * height * width;
    for (std::size_t s = 0; s < batch.dim(0); ++s) {
        std::span<T> image(out.data() + s * stride, stride);
        if (config.horizontal_flip && rng.coin()) flip_horizontal(image, channels, height, width);
        if (config.crop_padding > 0) {
            const std::size_t span = 2 * config.crop_padding + 1;
            const std::size_t dy = rng.below(span);
            const std::size_t dx = rng.below(span);
            const auto cropped = crop_padded<T>(image, channels, height, width, config.crop_padding, dy, dx);
            std::copy(cropped.begin(), cropped.end(), image.begin());
        }
    }
    return out;
}

std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    CounterRng rng(epoch_seed, Stream::shuffle);
    const auto order = permutation(n, rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        out.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
    }
    return out;
}

template <typename T>
Split<T> train_test_split(const Dataset<T>& data, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
    const std::size_t n = data.size();
    const auto test_count = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
    if (test_count == 0 || test_count >= n) throw ConfigError("split leaves an empty train or test set");
    CounterRng rng(seed, Stream::split);
    const auto order = permutation(n, rng);
    const std::span<const std::size_t> all(order);
    return {data.subset(all.subspan(test_count)), data.subset(all.first(test_count))};
}

#define TKLAB_INSTANTIATE(T)                                                                                \
    template struct Dataset<T>;                                                                            \
    template Dataset<T> gen_blobs<T>(std::size_t, std::size_t, std::size_t, double, std::uint64_t);        \
    template Dataset<T> gen_spirals<T>(std::size_t, double, double, std::uint64_t);                        \
    template Dataset<T> load_idx<T>(const std::filesystem::path&, const std::filesystem::path&);           \
    template void flip_horizontal<T>(std::span<T>, std::size_t, std::size_t, std::size_t);                 \
    template std::vector<T> crop_padded<T>(std::span<const T>, std::size_t, std::size_t, std::size_t,      \
                                           std::size_t, std::size_t, std::size_t);                         \
    template Tensor<T> augment<T>(const Tensor<T>&, const AugmentConfig&, CounterRng&);                    \
    template Split<T> train_test_split<T>(const Dataset<T>&, double, std::uint64_t);
TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)
#undef TKLAB_INSTANTIATE

}  // namespace tklab
