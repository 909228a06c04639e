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
#include <filesystem>
#include <optional>
#include <string>

#include "tklab/mask.hpp"

namespace tklab {

enum class Precision : std::uint8_t { f32 = 1, f64 = 2 };

std::string to_string(Precision precision);
/// Accepts "f32"/"float" and "f64"/"double".
Precision parse_precision(const std::string& name);

template <typename T>
constexpr Precision precision_of();
template <>
constexpr Precision precision_of<float>() { return Precision::f32; }
template <>
constexpr Precision precision_of<double>() { return Precision::f64; }

class CheckpointError : public IoError {
public:
    enum class Kind { io, magic, version, precision, digest, truncated, format };
    CheckpointError(Kind kind, const std::filesystem::path& file, const std::string& what)
        : IoError(file.string() + ": " + what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
    std::uint32_t version = kCheckpointVersion;
    Precision precision = Precision::f32;
    std::uint64_t model_digest = 0;
    std::uint64_t config_digest = 0;
    Provenance provenance;
    long epoch = 0;
};

/// Weights and/or a mask. Either part may be empty: mask files carry no
/// tensors.
template <typename T>
struct Checkpoint {
    CheckpointHeader header;
    ParamSet<T> params;
    std::optional<Mask> mask;
};

/// Layout (little-endian): "TKLB", u32 version, u8 precision, u64 model
/// digest, u64 config digest, u8 provenance kind, i64 provenance epoch,
/// u8 masked flag, i64 epoch, u32 tensor count, tensors, u8 mask flag, mask.
/// A tensor is u16 name length, name, u8 rank, u64 dims, raw scalars. Mask
/// entries use the same header followed by bits packed LSB-first.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& checkpoint);

/// Reads the whole file before building anything. With an expected model
/// digest, a mismatch is a digest error.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path,
                              std::optional<std::uint64_t> expected_model_digest = std::nullopt);

/// Header only; used to discover the precision of a file.
CheckpointHeader peek_checkpoint(const std::filesystem::path& path);

/// Packs one byte per bit into LSB-first bytes, and back.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count);

}  // namespace tklab
