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
#include <string>
#include <vector>

#include "tklab/checkpoint.hpp"
#include "tklab/regimes.hpp"

namespace tklab {

struct DatasetSpec {
    std::string kind = "spirals";  // spirals | blobs | idx
    std::size_t n = 1000;
    double turns = 2.0;
    double noise = 0.05;
    std::size_t classes = 3;
    std::size_t dim = 2;
    double spread = 0.5;
    std::uint64_t seed = 42;
    std::filesystem::path images;
    std::filesystem::path labels;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 7;
};

struct ExperimentConfig {
    ModelSpec model;
    DatasetSpec dataset;
    SuiteConfig suite;  // suite.config_digest is filled by parse_config
    std::filesystem::path output_dir = "out";
    Precision precision = Precision::f32;

    /// Content digest over everything that affects results (not the output
    /// directory or worker count).
    std::string digest;
};

/// Strict parse: unknown keys, wrong types and invalid values are
/// ConfigErrors. Relative IDX paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of the result-affecting fields; the digest hashes this.
std::string canonical_config(const ExperimentConfig& config);

/// Recomputes config.digest after fields were changed in code.
void stamp_digest(ExperimentConfig& config);

template <typename T>
Split<T> load_dataset(const DatasetSpec& spec);

}  // namespace tklab
