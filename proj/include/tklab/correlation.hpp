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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tklab/mask.hpp"

namespace tklab {

/// Largest-magnitude indices of one layer.
struct TopPIndexSet {
    std::size_t layer = 0;
    std::size_t domain_size = 0;
    double p = 0.0;
    std::vector<std::size_t> indices;  // ascending
};

/// max(1, round-half-up(p * domain)).
std::size_t top_p_count(std::size_t domain, double p);

/// Selects top_p_count(|domain|, p) indices of largest |w| from the domain
/// (`support` if given, else every index); ties go to the smaller index.
/// `count` overrides the set size.
template <typename T>
TopPIndexSet top_p_indices(std::span<const T> values, double p, const std::vector<std::size_t>* support = nullptr,
                           std::optional<std::size_t> count = std::nullopt);

enum class Scenario : std::uint8_t { dense_dense, sparse_sparse, sparse_dense };
std::string to_string(Scenario scenario);

struct LayerOverlap {
    std::string name;
    std::size_t domain_a = 0;
    std::size_t domain_b = 0;
    std::size_t set_size = 0;
    std::size_t intersection = 0;
};

struct CorrelationPoint {
    double p = 0.0;
    double r = 0.0;
    std::vector<LayerOverlap> layers;
};

struct CorrelationReport {
    Scenario scenario = Scenario::dense_dense;
    std::vector<CorrelationPoint> points;
    /// Monte-Carlo band for independent weights, one per point.
    std::vector<std::pair<double, double>> null_bands;

    std::string to_json() const;
};

inline const std::vector<double> kDefaultPGrid{0.1, 0.2, 0.3, 0.4, 0.5};

/// Overlap ratio of the top-p magnitude sets of a and b, summed over the
/// prunable entries and divided by the realized set sizes. With `supports`,
/// each layer's domain is the kept set of the mask on both sides.
template <typename T>
CorrelationPoint correlation_point(const ParamSet<T>& a, const ParamSet<T>& b, double p,
                                   const Mask* supports = nullptr);

template <typename T>
double correlation_indicator(const ParamSet<T>& a, const ParamSet<T>& b, double p, const Mask* supports = nullptr) {
    return correlation_point(a, b, p, supports).r;
}

/// Both sides restricted to the kept weights of `mask`. Throws
/// ConsistencyError if either side has a nonzero outside the mask.
template <typename T>
CorrelationPoint correlation_sparse_sparse(const ParamSet<T>& a, const ParamSet<T>& b, const Mask& mask, double p);

/// Sparse side over the kept weights, dense side over all weights, both
/// selecting round(p * N_l) indices. Throws DomainError unless p is below
/// 1 - s for the sparsest layer of the mask.
template <typename T>
CorrelationPoint correlation_sparse_dense(const ParamSet<T>& sparse, const Mask& mask, const ParamSet<T>& dense,
                                          double p);

/// 0.5% and 99.5% quantiles of R_p over `trials` pairs of independent random
/// weight sets with the given layer sizes.
std::pair<double, double> null_band(double p, std::span<const std::size_t> layer_sizes, std::size_t trials,
                                    std::uint64_t seed);

/// Dense-dense report over a p grid, optionally with null bands.
template <typename T>
CorrelationReport correlate_dense(const ParamSet<T>& a, const ParamSet<T>& b, const std::vector<double>& p_grid,
                                  std::size_t null_trials = 0, std::uint64_t null_seed = 0);

}  // namespace tklab
