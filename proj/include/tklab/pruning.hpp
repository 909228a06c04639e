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
#include <vector>

#include "tklab/dataset.hpp"
#include "tklab/mask.hpp"
#include "tklab/optim.hpp"

namespace tklab {

enum class PruneAlgorithm : std::uint8_t { one_shot, iterative, admm };

std::string to_string(PruneAlgorithm algorithm);
/// Throws ConfigError for an unknown name.
PruneAlgorithm parse_prune_algorithm(const std::string& name);

struct AdmmConfig {
    double rho = 1e-2;
    long outer_iters = 5;
    /// Epochs of W-training per outer iteration; defaults to T/5.
    std::optional<long> inner_epochs;
    /// Constant learning rate of the inner training; defaults to the last
    /// rate of the step schedule.
    std::optional<double> lr;
    bool operator==(const AdmmConfig&) const = default;
};

struct PruneConfig {
    PruneAlgorithm algorithm = PruneAlgorithm::one_shot;
    double target_sparsity = 0.5;
    long rounds = 3;
    /// Epochs per iterative round; defaults to the full T.
    std::optional<long> round_epochs;
    AdmmConfig admm;
    bool exempt_first = true;

    void validate() const;
    /// Content digest, stamped into mask metadata.
    std::string digest() const;
    bool operator==(const PruneConfig&) const = default;
};

/// max(1, round-half-up((1 - s) * n)).
std::size_t keep_count(std::size_t n, double target_sparsity);

/// Keep count of every layer; exempt layers keep everything.
std::vector<std::size_t> per_layer_keep_counts(std::span<const std::size_t> layer_sizes, double target_sparsity,
                                               const std::vector<bool>& exempt);

/// Ones at the k largest |w|; ties keep the smaller flat index.
template <typename T>
std::vector<std::uint8_t> topk_mask(std::span<const T> values, std::size_t k);

/// As topk_mask, but only positions with within[i] != 0 are candidates.
template <typename T>
std::vector<std::uint8_t> topk_mask_within(std::span<const T> values, std::span<const std::uint8_t> within,
                                           std::size_t k);

/// Keep counts for the prunable entries of `params`, in order.
template <typename T>
std::vector<std::size_t> keep_counts_for(const ParamSet<T>& params, double target_sparsity, bool exempt_first);

/// Per-layer magnitude pruning of trained weights.
template <typename T>
Mask one_shot_prune(const ParamSet<T>& theta_T, const PruneConfig& config);

/// Masks m_1..m_n of an iterative run, each nested in the previous one.
struct IterativeTrace {
    std::vector<Mask> rounds;
    long epochs_trained = 0;
};

/// Iterative magnitude pruning with reset to theta_0. Round j trains
/// apply_mask(theta_0, m_{j-1}) and keeps the (1-s)^(j/n) largest-magnitude
/// fraction of each layer. When `round1_trained` is given it stands in for
/// the first round (the dense run from theta_0), which must then match it.
template <typename T>
Mask iterative_prune(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_0,
                     const TrainConfig& train_config, const PruneConfig& config,
                     const ParamSet<T>* round1_trained = nullptr, IterativeTrace* trace = nullptr);

/// Euclidean projection onto the per-layer k-sparse set: keeps the
/// keep_counts[l] largest |.| of each prunable entry, zeroes the rest.
/// Non-prunable entries are copied unchanged.
template <typename T>
ParamSet<T> admm_project(const ParamSet<T>& w_plus_u, std::span<const std::size_t> keep_counts);

template <typename T>
struct AdmmState {
    ParamSet<T> W;
    ParamSet<T> Z;
    ParamSet<T> U;
    long iteration = 0;
};

struct AdmmTrace {
    /// ||W - Z||_2 over the constrained entries after each outer iteration.
    std::vector<double> primal_residual;
    long epochs_trained = 0;
};

/// ADMM pruning starting from theta_T; the mask is the support of the final
/// projection of W + U.
template <typename T>
Mask admm_prune(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_T,
                const TrainConfig& train_config, const PruneConfig& config, AdmmTrace* trace = nullptr,
                AdmmState<T>* final_state = nullptr);

/// Dispatches on config.algorithm. theta_0 is used by iterative pruning,
/// theta_T by the other two. Returns the number of training epochs spent
/// through `epochs_trained` when non-null.
template <typename T>
Mask generate_mask(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_0,
                   const ParamSet<T>& theta_T, const TrainConfig& train_config, const PruneConfig& config,
                   long* epochs_trained = nullptr);

}  // namespace tklab
