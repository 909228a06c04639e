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

#include "doctest.h"
#include "support.hpp"
#include "tklab/checkpoint.hpp"

#include <cstring>
#include <limits>

using namespace tklab;
namespace fs = std::filesystem;

namespace {

template <typename T>
Checkpoint<T> sample(const ModelSpec& m) {
    Checkpoint<T> cp;
    cp.header.precision = precision_of<T>();
    cp.header.model_digest = model_digest(m);
    cp.header.config_digest = 0x0123456789abcdefull;
    cp.header.provenance = {ProvenanceKind::rewind, 3, false};
    cp.header.epoch = 3;
    cp.params = init_params<T>(m, 5);
    cp.params.provenance = cp.header.provenance;
    cp.params[0].tensor[0] = -T{0};
    cp.params[0].tensor[1] = std::numeric_limits<T>::denorm_min();
    cp.params[0].tensor[2] = std::numeric_limits<T>::max();
    Mask mask = all_ones_mask(cp.params, {"dense0.weight"});
    for (std::size_t i = 0; i < mask.entries[1].size(); i += 3) mask.entries[1].bits[i] = 0;
    mask.metadata = {"one_shot", "abc", {{"target_sparsity", "0.33"}}};
    cp.mask = mask;
    return cp;
}

template <typename T>
bool bitwise(const ParamSet<T>& a, const ParamSet<T>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].prunable != b[i].prunable || a[i].tensor.shape() != b[i].tensor.shape()) {
            return false;
        }
        if (std::memcmp(a[i].tensor.data(), b[i].tensor.data(), a[i].tensor.size() * sizeof(T)) != 0) return false;
    }
    return a.provenance == b.provenance;
}

CheckpointError::Kind load_error(const fs::path& path, std::optional<std::uint64_t> digest = std::nullopt) {
    try {
        load_checkpoint<float>(path, digest);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("expected CheckpointError");
    return CheckpointError::Kind::io;
}

}  // namespace

TEST_CASE("bit packing is LSB first") {
    const std::vector<std::uint8_t> bits{1, 0, 1, 1, 0, 0, 0, 0, 1, 1};
    const auto packed = pack_bits(bits);
    CHECK(packed == std::vector<std::uint8_t>{0x0D, 0x03});
    CHECK(unpack_bits(packed, bits.size()) == bits);
}

TEST_CASE_TEMPLATE("checkpoint round trip is bit exact", T, float, double) {
    const auto dir = test::scratch_dir("ckpt-roundtrip");
    const auto m = make_mlp(3, {5, 4}, 2);
    const auto cp = sample<T>(m);
    save_checkpoint(dir / "a.tklb", cp);
    const auto back = load_checkpoint<T>(dir / "a.tklb", model_digest(m));
    CHECK(bitwise(back.params, cp.params));
    REQUIRE(back.mask.has_value());
    CHECK(*back.mask == *cp.mask);
    CHECK(back.header.config_digest == cp.header.config_digest);
    CHECK(back.header.provenance == cp.header.provenance);
    CHECK(back.header.epoch == 3);
    save_checkpoint(dir / "b.tklb", back);
    CHECK(test::slurp(dir / "a.tklb") == test::slurp(dir / "b.tklb"));
    CHECK(peek_checkpoint(dir / "a.tklb").precision == precision_of<T>());
    CHECK_FALSE(fs::exists(dir / "a.tklb.tmp"));
}

TEST_CASE("header layout") {
    const auto dir = test::scratch_dir("ckpt-layout");
    const auto m = make_mlp(3, {5}, 2);
    save_checkpoint(dir / "a.tklb", sample<float>(m));
    const std::string bytes = test::slurp(dir / "a.tklb");
    CHECK(bytes.substr(0, 4) == "TKLB");
    CHECK(bytes.substr(4, 4) == std::string("\x01\x00\x00\x00", 4));
    CHECK(bytes[8] == 1);
}

TEST_CASE("corrupt checkpoints fail with distinct errors") {
    const auto dir = test::scratch_dir("ckpt-corrupt");
    const auto m = make_mlp(3, {5}, 2);
    save_checkpoint(dir / "good.tklb", sample<float>(m));
    const std::string good = test::slurp(dir / "good.tklb");

    std::string magic = good;
    magic[1] = 'X';
    test::spit(dir / "magic.tklb", magic);
    CHECK(load_error(dir / "magic.tklb") == CheckpointError::Kind::magic);

    std::string version = good;
    version[4] = 9;
    test::spit(dir / "version.tklb", version);
    CHECK(load_error(dir / "version.tklb") == CheckpointError::Kind::version);

    test::spit(dir / "short.tklb", good.substr(0, good.size() - 5));
    CHECK(load_error(dir / "short.tklb") == CheckpointError::Kind::truncated);

    test::spit(dir / "long.tklb", good + "x");
    CHECK(load_error(dir / "long.tklb") == CheckpointError::Kind::format);

    CHECK(load_error(dir / "good.tklb", model_digest(m) + 1) == CheckpointError::Kind::digest);
    CHECK(load_error(dir / "absent.tklb") == CheckpointError::Kind::io);

    save_checkpoint(dir / "f64.tklb", sample<double>(m));
    CHECK(load_error(dir / "f64.tklb") == CheckpointError::Kind::precision);
}

TEST_CASE("precision names") {
    CHECK(parse_precision("f32") == Precision::f32);
    CHECK(parse_precision("double") == Precision::f64);
    CHECK(to_string(Precision::f64) == "f64");
    CHECK_THROWS_AS(parse_precision("f16"), ConfigError);
}
