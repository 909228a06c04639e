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

#include <filesystem>
#include <fstream>
#include <string>

#include "tklab/model.hpp"
#include "tklab/rng.hpp"

namespace tklab::test {

/// Single prunable layer with the given values.
template <typename T>
ParamSet<T> layer(std::vector<T> values, const std::string& name = "l.weight") {
    ParamSet<T> ps;
    const std::size_t n = values.size();
    ps.entries.push_back({name, Tensor<T>({n}, std::move(values)), true});
    return ps;
}

/// Independent uniform(-1, 1) weights over `sizes`, all prunable.
template <typename T>
ParamSet<T> random_layers(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    ParamSet<T> ps;
    CounterRng rng(seed, Stream::probe);
    for (std::size_t l = 0; l < sizes.size(); ++l) {
        std::vector<T> v(sizes[l]);
        for (T& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
        ps.entries.push_back({"layer" + std::to_string(l) + ".weight", Tensor<T>({sizes[l]}, std::move(v)), true});
    }
    return ps;
}

/// Fresh empty directory under the system temp directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("tklab-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace tklab::test
