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
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tklab/correlation.hpp"
#include "tklab/pruning.hpp"
#include "tklab/train.hpp"

namespace tklab {

enum class Regime : std::uint8_t { pretrain, ticket, reinit, rewind, finetune };

std::string to_string(Regime regime);
/// Throws ConfigError for an unknown name.
Regime parse_regime(const std::string& name);

template <typename T>
struct PretrainResult {
    ParamSet<T> theta_T;
    /// theta_k keyed by k; k = 0 is theta_0 itself.
    std::map<long, ParamSet<T>> snapshots;
};

/// Dense training from theta_0 for config.epochs epochs. Stores the
/// snapshot at config.rewind_epoch when set.
template <typename T>
PretrainResult<T> pretrain(const ModelSpec& model, const ParamSet<T>& theta_0, const Dataset<T>& data,
                           const TrainConfig& config, const TrainHooks<T>& hooks = {});

/// apply_mask(start, mask) followed by masked training; the mask invariant
/// is checked at every epoch boundary. hooks.mask is ignored.
template <typename T>
ParamSet<T> sparse_train(const ModelSpec& model, const ParamSet<T>& start, const Mask& mask, const Dataset<T>& data,
                         const TrainConfig& config, TrainHooks<T> hooks = {});

/// Masked retraining of theta_T with the step schedule restarted;
/// config.epochs plays the role of T'.
template <typename T>
ParamSet<T> prune_and_finetune(const ModelSpec& model, const ParamSet<T>& theta_T, const Mask& mask,
                               const Dataset<T>& data, const TrainConfig& config, TrainHooks<T> hooks = {});

/// Thresholds and accuracies are fractions (0.005 is half a percentage point).
struct WinningVerdict {
    bool aspect1 = false;  // ticket within epsilon of the dense network
    bool aspect2 = false;  // ticket beats reinit by more than delta
    double epsilon = 0.005;
    double delta = 0.005;
    double acc_dense = 0.0;
    double acc_ticket = 0.0;
    double acc_reinit = 0.0;

    bool holds() const noexcept { return aspect1 && aspect2; }
};

WinningVerdict evaluate_winning_property(double acc_dense, double acc_ticket, double acc_reinit,
                                         double epsilon = 0.005, double delta = 0.005);

struct SuiteConfig {
    TrainConfig train;  // seed is replaced by each suite seed
    PruneConfig prune;  // algorithm and target_sparsity are set per cell
    std::vector<PruneAlgorithm> algorithms{PruneAlgorithm::one_shot};
    std::vector<double> sparsities{0.5};
    std::vector<std::uint64_t> seeds{1};
    std::vector<Regime> regimes{Regime::ticket, Regime::reinit, Regime::rewind, Regime::finetune};
    std::vector<double> p_grid = kDefaultPGrid;
    double p_sparse = 0.2;
    double epsilon = 0.005;
    double delta = 0.005;
    std::size_t null_trials = 0;
    std::optional<long> finetune_epochs;  // T'; defaults to T
    std::size_t workers = 1;
    std::string config_digest;

    void validate() const;
};

struct ReportRow {
    std::uint64_t seed = 0;
    double lr0 = 0.0;
    std::string algorithm;  // "none" for pretraining
    Regime regime = Regime::pretrain;
    double sparsity = 0.0;
    std::optional<double> accuracy;
    std::string error;
    /// At p_sparse: pretraining compares theta_T with theta_0 (dense-dense);
    /// sparse regimes compare the result with theta_0 and theta_T
    /// (sparse-dense) and with the masked start (sparse-sparse).
    std::optional<double> r_theta0;
    std::optional<double> r_thetaT;
    std::optional<double> r_start;
    std::optional<WinningVerdict> verdict;  // ticket rows with a reinit partner
};

struct AggregateRow {
    double lr0 = 0.0;
    std::string algorithm;
    Regime regime = Regime::pretrain;
    double sparsity = 0.0;
    std::vector<double> values;  // accuracies of the completed seeds
    std::size_t failed = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
    std::optional<WinningVerdict> verdict;
};

struct MaskRecord {
    std::uint64_t seed = 0;
    std::string algorithm;
    double sparsity = 0.0;
    long epochs_trained = 0;
    std::vector<LayerSparsity> layers;
    std::string error;
};

struct LabelledCorrelation {
    std::uint64_t seed = 0;
    std::string algorithm;
    Regime regime = Regime::pretrain;
    double sparsity = 0.0;
    std::string label;
    CorrelationReport report;
};

struct ExperimentReport {
    std::string config_digest;
    std::uint64_t reinit_seed_mix = kReinitSeedMix;
    std::vector<ReportRow> rows;
    std::vector<AggregateRow> aggregates;
    std::vector<MaskRecord> masks;
    std::vector<LabelledCorrelation> correlations;

    bool any_failed() const;
    const AggregateRow* find(const std::string& algorithm, Regime regime, double sparsity) const;
};

template <typename T>
struct SeedArtifacts {
    std::uint64_t seed = 0;
    std::optional<ParamSet<T>> theta_0;
    std::optional<ParamSet<T>> theta_T;
    std::optional<ParamSet<T>> theta_k;
    std::vector<std::pair<std::string, Mask>> masks;  // keyed "<alg>-s<rate>"
};

template <typename T>
struct SuiteResult {
    ExperimentReport report;
    std::vector<SeedArtifacts<T>> artifacts;
};

/// Pretrains once per seed, generates a mask per (algorithm, sparsity) and
/// runs every requested regime on it. Cells are independent tasks executed
/// on config.workers threads; results do not depend on scheduling. Errors
/// are recorded per cell.
template <typename T>
SuiteResult<T> run_regime_suite(const ModelSpec& model, const Split<T>& data, const SuiteConfig& config);

/// Groups rows by (lr0, algorithm, regime, sparsity) and computes mean,
/// sample standard deviation and the verdict on the seed means.
std::vector<AggregateRow> aggregate_rows(const std::vector<ReportRow>& rows, double epsilon, double delta);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Short sparsity tag used in artifact names, e.g. 0.5 -> "0.5".
std::string sparsity_tag(double sparsity);

}  // namespace tklab
