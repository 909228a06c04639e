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

#include "tklab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tklab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string to_string(Precision precision) { return precision == Precision::f64 ? "f64" : "f32"; }

Precision parse_precision(const std::string& name) {
    if (name == "f32" || name == "float") return Precision::f32;
    if (name == "f64" || name == "double") return Precision::f64;
    throw ConfigError("unknown precision '" + name + "'");
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    return out;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t count) {
    std::vector<std::uint8_t> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return out;
}

namespace {

class Writer {
public:
    template <typename V>
    void put(V v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.append(p, sizeof v);
    }
    void put_bytes(const void* data, std::size_t n) { bytes_.append(static_cast<const char*>(data), n); }
    void put_name(const std::string& s) {
        if (s.size() > 0xFFFF) throw ConfigError("name too long for a checkpoint: " + s);
        put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
        put_bytes(s.data(), s.size());
    }
    void put_shape(const Shape& shape) {
        put<std::uint8_t>(static_cast<std::uint8_t>(shape.size()));
        for (auto d : shape) put<std::uint64_t>(d);
    }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    Reader(const std::string& bytes, const std::filesystem::path& file) : bytes_(bytes), file_(file) {}

    template <typename V>
    V get() {
        V v;
        need(sizeof v);
        std::memcpy(&v, bytes_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    const char* take(std::size_t n) {
        need(n);
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::string get_name() {
        const auto n = get<std::uint16_t>();
        return std::string(take(n), n);
    }
    Shape get_shape() {
        const auto rank = get<std::uint8_t>();
        Shape shape(rank);
        for (auto& d : shape) {
            d = static_cast<std::size_t>(get<std::uint64_t>());
            if (d == 0) throw CheckpointError(CheckpointError::Kind::format, file_, "zero dimension");
        }
        return shape;
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) {
        if (bytes_.size() - pos_ < n) throw CheckpointError(CheckpointError::Kind::truncated, file_, "truncated file");
    }
    const std::string& bytes_;
    const std::filesystem::path& file_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, path, "cannot open checkpoint");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

CheckpointHeader read_header(Reader& r, const std::filesystem::path& path) {
    const char* magic = r.take(4);
    if (std::memcmp(magic, "TKLB", 4) != 0) throw CheckpointError(CheckpointError::Kind::magic, path, "bad magic");
    CheckpointHeader h;
    h.version = r.get<std::uint32_t>();
    if (h.version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::version, path,
                              "unsupported version " + std::to_string(h.version));
    }
    const auto precision = r.get<std::uint8_t>();
    if (precision != 1 && precision != 2) {
        throw CheckpointError(CheckpointError::Kind::format, path, "unknown precision code");
    }
    h.precision = static_cast<Precision>(precision);
    h.model_digest = r.get<std::uint64_t>();
    h.config_digest = r.get<std::uint64_t>();
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(ProvenanceKind::finetuned)) {
        throw CheckpointError(CheckpointError::Kind::format, path, "unknown provenance");
    }
    h.provenance.kind = static_cast<ProvenanceKind>(kind);
    h.provenance.epoch = static_cast<long>(r.get<std::int64_t>());
    h.provenance.masked = r.get<std::uint8_t>() != 0;
    h.epoch = static_cast<long>(r.get<std::int64_t>());
    return h;
}

bool is_prunable_name(const std::string& name) {
    return name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& checkpoint) {
    Writer w;
    w.put_bytes("TKLB", 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(precision_of<T>()));
    w.put<std::uint64_t>(checkpoint.header.model_digest);
    w.put<std::uint64_t>(checkpoint.header.config_digest);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(checkpoint.header.provenance.kind));
    w.put<std::int64_t>(checkpoint.header.provenance.epoch);
    w.put<std::uint8_t>(checkpoint.header.provenance.masked ? 1 : 0);
    w.put<std::int64_t>(checkpoint.header.epoch);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.params.size()));
    for (const auto& e : checkpoint.params.entries) {
        w.put_name(e.name);
        w.put_shape(e.tensor.shape());
        w.put_bytes(e.tensor.data(), e.tensor.size() * sizeof(T));
    }
    w.put<std::uint8_t>(checkpoint.mask ? 1 : 0);
    if (checkpoint.mask) {
        const Mask& m = *checkpoint.mask;
        w.put<std::uint32_t>(static_cast<std::uint32_t>(m.entries.size()));
        for (const auto& e : m.entries) {
            w.put_name(e.name);
            w.put_shape(e.shape);
            const auto packed = pack_bits(e.bits);
            w.put_bytes(packed.data(), packed.size());
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(m.exempt_names.size()));
        for (const auto& n : m.exempt_names) w.put_name(n);
        w.put_name(m.metadata.algorithm);
        w.put_name(m.metadata.config_digest);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(m.metadata.params.size()));
        for (const auto& [k, v] : m.metadata.params) {
            w.put_name(k);
            w.put_name(v);
        }
    }
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError(CheckpointError::Kind::io, path, "cannot write checkpoint");
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw CheckpointError(CheckpointError::Kind::io, path, "write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError(CheckpointError::Kind::io, path, "rename failed: " + ec.message());
}

CheckpointHeader peek_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    Reader r(bytes, path);
    return read_header(r, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_model_digest) {
    const std::string bytes = read_file(path);
    Reader r(bytes, path);
    Checkpoint<T> cp;
    cp.header = read_header(r, path);
    if (cp.header.precision != precision_of<T>()) {
        throw CheckpointError(CheckpointError::Kind::precision, path,
                              "checkpoint holds " + to_string(cp.header.precision) + " scalars, session uses " +
                                  to_string(precision_of<T>()));
    }
    if (expected_model_digest && *expected_model_digest != cp.header.model_digest) {
        throw CheckpointError(CheckpointError::Kind::digest, path, "model digest mismatch");
    }
    cp.params.provenance = cp.header.provenance;
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        ParamEntry<T> e;
        e.name = r.get_name();
        const Shape shape = r.get_shape();
        std::vector<T> values(shape_size(shape));
        const char* p = r.take(values.size() * sizeof(T));
        std::memcpy(values.data(), p, values.size() * sizeof(T));
        e.tensor = Tensor<T>(shape, std::move(values));
        e.prunable = is_prunable_name(e.name);
        cp.params.entries.push_back(std::move(e));
    }
    if (r.get<std::uint8_t>() != 0) {
        Mask m;
        const auto entries = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < entries; ++i) {
            MaskEntry e;
            e.name = r.get_name();
            e.shape = r.get_shape();
            const std::size_t n = shape_size(e.shape);
            const char* p = r.take((n + 7) / 8);
            e.bits = unpack_bits({reinterpret_cast<const std::uint8_t*>(p), (n + 7) / 8}, n);
            m.entries.push_back(std::move(e));
        }
        const auto exempt = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < exempt; ++i) m.exempt_names.insert(r.get_name());
        m.metadata.algorithm = r.get_name();
        m.metadata.config_digest = r.get_name();
        const auto params = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < params; ++i) {
            auto k = r.get_name();
            m.metadata.params[k] = r.get_name();
        }
        cp.mask = std::move(m);
    }
    if (!r.at_end()) throw CheckpointError(CheckpointError::Kind::format, path, "trailing bytes");
    return cp;
}

template void save_checkpoint<float>(const std::filesystem::path&, const Checkpoint<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&, std::optional<std::uint64_t>);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&, std::optional<std::uint64_t>);

}  // namespace tklab
