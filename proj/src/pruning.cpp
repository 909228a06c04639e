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

#include "tklab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tklab/digest.hpp"
#include "tklab/train.hpp"

namespace tklab {

std::string to_string(PruneAlgorithm algorithm) {
    switch (algorithm) {
        case PruneAlgorithm::one_shot: return "one_shot";
        case PruneAlgorithm::iterative: return "iterative";
        case PruneAlgorithm::admm: return "admm";
    }
    return "unknown";
}

PruneAlgorithm parse_prune_algorithm(const std::string& name) {
    if (name == "one_shot") return PruneAlgorithm::one_shot;
    if (name == "iterative") return PruneAlgorithm::iterative;
    if (name == "admm") return PruneAlgorithm::admm;
    throw ConfigError("unknown pruning algorithm '" + name + "'");
}

void PruneConfig::validate() const {
    if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) throw ConfigError("target_sparsity must lie in [0, 1)");
    if (rounds < 1) throw ConfigError("rounds must be at least 1");
    if (round_epochs && *round_epochs < 0) throw ConfigError("round_epochs must be non-negative");
    if (!(admm.rho > 0.0) || !std::isfinite(admm.rho)) throw ConfigError("admm.rho must be positive");
    if (admm.outer_iters < 1) throw ConfigError("admm.outer_iters must be at least 1");
    if (admm.inner_epochs && *admm.inner_epochs < 0) throw ConfigError("admm.inner_epochs must be non-negative");
    if (admm.lr && !(*admm.lr > 0.0)) throw ConfigError("admm.lr must be positive");
}

std::string PruneConfig::digest() const {
    std::ostringstream out;
    out.precision(17);
    out << "alg=" << to_string(algorithm) << ";s=" << target_sparsity << ";rounds=" << rounds
        << ";round_epochs=" << (round_epochs ? std::to_string(*round_epochs) : "T") << ";rho=" << admm.rho
        << ";outer=" << admm.outer_iters
        << ";inner=" << (admm.inner_epochs ? std::to_string(*admm.inner_epochs) : "T/5") << ";lr=";
    if (admm.lr) {
        out << *admm.lr;
    } else {
        out << "final";
    }
    out << ";exempt_first=" << exempt_first;
    return digest_hex(fnv1a64(out.str()));
}

namespace {

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9)); }

std::size_t keep_fraction_count(std::size_t n, double fraction) {
    return std::min(n, std::max<std::size_t>(1, round_half_up(fraction * static_cast<double>(n))));
}

template <typename T>
void check_provenance(const ParamSet<T>& params, ProvenanceKind expected, const char* what) {
    if (params.provenance.kind != expected) {
        throw ConfigError(std::string(what) + " expects " +
                          Provenance{expected, 0, false}.to_string() + " weights, got " +
                          params.provenance.to_string());
    }
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

// Cumulative keep fraction after round j of n.
double round_keep_fraction(double target_sparsity, long j, long n) {
    if (j == n) return 1.0 - target_sparsity;
    return std::pow(1.0 - target_sparsity, static_cast<double>(j) / static_cast<double>(n));
}

TrainConfig with_epochs(TrainConfig config, long epochs) {
    config.epochs = epochs;
    std::erase_if(config.milestones, [epochs](long m) { return m >= epochs; });
    config.rewind_epoch.reset();
    return config;
}

}  // namespace

std::size_t keep_count(std::size_t n, double target_sparsity) { return keep_fraction_count(n, 1.0 - target_sparsity); }

std::vector<std::size_t> per_layer_keep_counts(std::span<const std::size_t> layer_sizes, double target_sparsity,
                                               const std::vector<bool>& exempt) {
    if (!(target_sparsity >= 0.0 && target_sparsity < 1.0)) throw ConfigError("target_sparsity must lie in [0, 1)");
    if (exempt.size() != layer_sizes.size()) throw ConfigError("exempt flags and layer sizes differ in length");
    std::vector<std::size_t> out(layer_sizes.size());
    for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
        out[l] = exempt[l] ? layer_sizes[l] : keep_count(layer_sizes[l], target_sparsity);
    }
    return out;
}

template <typename T>
std::vector<std::uint8_t> topk_mask_within(std::span<const T> values, std::span<const std::uint8_t> within,
                                           std::size_t k) {
    std::vector<std::size_t> candidates;
    candidates.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (within.empty() || within[i]) candidates.push_back(i);
    }
    if (k > candidates.size()) throw ConfigError("topk: k exceeds the number of candidates");
    auto larger = [&](std::size_t a, std::size_t b) {
        const T x = std::abs(values[a]);
        const T y = std::abs(values[b]);
        return x > y || (x == y && a < b);
    };
    if (k < candidates.size()) {
        std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                         larger);
    }
    std::vector<std::uint8_t> bits(values.size(), 0);
    for (std::size_t i = 0; i < k; ++i) bits[candidates[i]] = 1;
    return bits;
}

template <typename T>
std::vector<std::uint8_t> topk_mask(std::span<const T> values, std::size_t k) {
    if (k < 1 || k > values.size()) throw ConfigError("topk: k must lie in [1, size]");
    return topk_mask_within<T>(values, {}, k);
}

template <typename T>
std::vector<std::size_t> keep_counts_for(const ParamSet<T>& params, double target_sparsity, bool exempt_first) {
    const auto exempt = exempt_set(params, exempt_first);
    std::vector<std::size_t> sizes;
    std::vector<bool> flags;
    for (const auto& e : params.entries) {
        if (!e.prunable) continue;
        sizes.push_back(e.tensor.size());
        flags.push_back(exempt.count(e.name) > 0);
    }
    return per_layer_keep_counts(sizes, target_sparsity, flags);
}

namespace {

// Magnitude mask keeping `counts[l]` of each prunable entry, optionally
// restricted to the support of `within`.
template <typename T>
Mask magnitude_mask(const ParamSet<T>& params, const std::vector<std::size_t>& counts, bool exempt_first,
                    const Mask* within) {
    Mask mask = all_ones_mask(params, exempt_set(params, exempt_first));
    std::size_t l = 0;
    for (auto& entry : mask.entries) {
        const auto& tensor = params.find(entry.name)->tensor;
        if (!mask.exempt_names.count(entry.name)) {
            std::span<const std::uint8_t> restrict_to;
            if (within) restrict_to = within->entries[l].bits;
            entry.bits = topk_mask_within<T>(tensor.values(), restrict_to, counts[l]);
        }
        ++l;
    }
    return mask;
}

}  // namespace

template <typename T>
Mask one_shot_prune(const ParamSet<T>& theta_T, const PruneConfig& config) {
    config.validate();
    check_provenance(theta_T, ProvenanceKind::pretrained, "one_shot_prune");
    Mask mask = magnitude_mask(theta_T, keep_counts_for(theta_T, config.target_sparsity, config.exempt_first),
                               config.exempt_first, nullptr);
    mask.metadata.algorithm = to_string(PruneAlgorithm::one_shot);
    mask.metadata.config_digest = config.digest();
    mask.metadata.params["target_sparsity"] = format_double(config.target_sparsity);
    return mask;
}

template <typename T>
Mask iterative_prune(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_0,
                     const TrainConfig& train_config, const PruneConfig& config, const ParamSet<T>* round1_trained,
                     IterativeTrace* trace) {
    config.validate();
    check_provenance(theta_0, ProvenanceKind::init, "iterative_prune");
    const long n = config.rounds;
    const TrainConfig round_config = with_epochs(train_config, config.round_epochs.value_or(train_config.epochs));
    Mask mask = all_ones_mask(theta_0, exempt_set(theta_0, config.exempt_first));
    if (trace) *trace = {};

    for (long j = 1; j <= n; ++j) {
        ParamSet<T> trained;
        if (j == 1 && round1_trained) {
            require_congruent(theta_0, *round1_trained);
            trained = *round1_trained;
        } else {
            TrainHooks<T> hooks;
            hooks.mask = &mask;
            try {
                trained = train(model, apply_mask(theta_0, mask), data, round_config, hooks);
            } catch (const NumericError& e) {
                throw NumericError("iterative round " + std::to_string(j) + ": " + e.what(), e.epoch(), e.batch());
            }
            if (trace) trace->epochs_trained += round_config.epochs;
        }
        const double fraction = round_keep_fraction(config.target_sparsity, j, n);
        std::vector<std::size_t> counts;
        for (const auto& entry : mask.entries) {
            const std::size_t size = entry.size();
            counts.push_back(mask.exempt_names.count(entry.name) ? size : keep_fraction_count(size, fraction));
        }
        Mask next = magnitude_mask(trained, counts, config.exempt_first, &mask);
        mask = std::move(next);
        if (trace) trace->rounds.push_back(mask);
    }

    mask.metadata.algorithm = to_string(PruneAlgorithm::iterative);
    mask.metadata.config_digest = config.digest();
    mask.metadata.params["target_sparsity"] = format_double(config.target_sparsity);
    mask.metadata.params["rounds"] = std::to_string(n);
    mask.metadata.params["per_round_rate"] =
        format_double(1.0 - std::pow(1.0 - config.target_sparsity, 1.0 / static_cast<double>(n)));
    mask.metadata.params["round_epochs"] = std::to_string(round_config.epochs);
    if (trace) trace->rounds.back().metadata = mask.metadata;
    return mask;
}

template <typename T>
ParamSet<T> admm_project(const ParamSet<T>& w_plus_u, std::span<const std::size_t> keep_counts) {
    ParamSet<T> z = w_plus_u;
    std::size_t l = 0;
    for (auto& entry : z.entries) {
        if (!entry.prunable) continue;
        if (l >= keep_counts.size()) throw CongruenceError("admm_project: fewer keep counts than prunable entries");
        const auto bits = topk_mask<T>(entry.tensor.values(), keep_counts[l++]);
        T* v = entry.tensor.data();
        for (std::size_t i = 0; i < bits.size(); ++i) {
            if (!bits[i]) v[i] = T(0);
        }
    }
    if (l != keep_counts.size()) throw CongruenceError("admm_project: more keep counts than prunable entries");
    return z;
}

template <typename T>
Mask admm_prune(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_T,
                const TrainConfig& train_config, const PruneConfig& config, AdmmTrace* trace,
                AdmmState<T>* final_state) {
    config.validate();
    check_provenance(theta_T, ProvenanceKind::pretrained, "admm_prune");
    const auto exempt = exempt_set(theta_T, config.exempt_first);
    const auto counts = keep_counts_for(theta_T, config.target_sparsity, config.exempt_first);
    const long inner = config.admm.inner_epochs.value_or(train_config.epochs / 5);
    const double inner_lr =
        config.admm.lr.value_or(train_config.epochs > 0 ? lr_at(train_config.epochs - 1, train_config) : train_config.lr0);
    const TrainConfig inner_config = with_epochs(train_config, inner);
    const T rho = static_cast<T>(config.admm.rho);

    // Exempt and non-prunable entries are unconstrained; their Z and U stay
    // unused.
    std::vector<bool> constrained(theta_T.size());
    for (std::size_t i = 0; i < theta_T.size(); ++i) {
        constrained[i] = theta_T[i].prunable && !exempt.count(theta_T[i].name);
    }

    AdmmState<T> state;
    state.W = theta_T;
    ParamSet<T> projected = state.W;
    state.Z = admm_project(state.W, counts);
    state.U = theta_T;
    for (auto& e : state.U.entries) e.tensor.fill(T(0));
    if (trace) *trace = {};

    for (long it = 0; it < config.admm.outer_iters; ++it) {
        TrainHooks<T> hooks;
        hooks.epoch_offset = train_config.epochs + it * inner;
        hooks.lr_schedule = [inner_lr](long) { return inner_lr; };
        hooks.adjust_grads = [&](const ParamSet<T>& w, ParamSet<T>& g) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (!constrained[i]) continue;
                const T* wp = w[i].tensor.data();
                const T* zp = state.Z[i].tensor.data();
                const T* up = state.U[i].tensor.data();
                T* gp = g[i].tensor.data();
                for (std::size_t k = 0; k < w[i].tensor.size(); ++k) gp[k] += rho * (wp[k] - zp[k] + up[k]);
            }
        };
        try {
            state.W = train(model, state.W, data, inner_config, hooks);
        } catch (const NumericError& e) {
            throw NumericError("admm outer iteration " + std::to_string(it + 1) + ": " + e.what(), e.epoch(),
                               e.batch());
        }
        if (trace) trace->epochs_trained += inner;

        projected = state.W;
        for (std::size_t i = 0; i < projected.size(); ++i) {
            auto a = projected[i].tensor.values();
            const auto b = state.U[i].tensor.values();
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        }
        state.Z = admm_project(projected, counts);
        double residual = 0.0;
        for (std::size_t i = 0; i < state.W.size(); ++i) {
            if (!constrained[i]) continue;
            const auto w = state.W[i].tensor.values();
            const auto z = state.Z[i].tensor.values();
            auto u = state.U[i].tensor.values();
            for (std::size_t k = 0; k < w.size(); ++k) {
                const T r = w[k] - z[k];
                u[k] += r;
                residual += static_cast<double>(r) * static_cast<double>(r);
            }
        }
        state.iteration = it + 1;
        if (trace) trace->primal_residual.push_back(std::sqrt(residual));
    }

    // Support of the final Z, taken as the top-k selection that produced it
    // so incidental zeros cannot shrink it.
    Mask mask = magnitude_mask(projected, counts, config.exempt_first, nullptr);
    mask.metadata.algorithm = to_string(PruneAlgorithm::admm);
    mask.metadata.config_digest = config.digest();
    mask.metadata.params["target_sparsity"] = format_double(config.target_sparsity);
    mask.metadata.params["rho"] = format_double(config.admm.rho);
    mask.metadata.params["outer_iters"] = std::to_string(config.admm.outer_iters);
    mask.metadata.params["inner_epochs"] = std::to_string(inner);
    mask.metadata.params["inner_lr"] = format_double(inner_lr);
    if (final_state) *final_state = std::move(state);
    return mask;
}

template <typename T>
Mask generate_mask(const ModelSpec& model, const Dataset<T>& data, const ParamSet<T>& theta_0,
                   const ParamSet<T>& theta_T, const TrainConfig& train_config, const PruneConfig& config,
                   long* epochs_trained) {
    long spent = 0;
    Mask mask;
    switch (config.algorithm) {
        case PruneAlgorithm::one_shot:
            mask = one_shot_prune(theta_T, config);
            break;
        case PruneAlgorithm::iterative: {
            // theta_T is exactly the first round when rounds run the full T.
            const bool reuse = !config.round_epochs || *config.round_epochs == train_config.epochs;
            IterativeTrace trace;
            mask = iterative_prune(model, data, theta_0, train_config, config, reuse ? &theta_T : nullptr, &trace);
            spent = trace.epochs_trained;
            break;
        }
        case PruneAlgorithm::admm: {
            AdmmTrace trace;
            mask = admm_prune(model, data, theta_T, train_config, config, &trace);
            spent = trace.epochs_trained;
            break;
        }
        default:
            throw ConfigError("unknown pruning algorithm");
    }
    if (epochs_trained) *epochs_trained = spent;
    return mask;
}

#define TKLAB_INSTANTIATE(T)                                                                                        \
    template std::vector<std::uint8_t> topk_mask<T>(std::span<const T>, std::size_t);                              \
    template std::vector<std::uint8_t> topk_mask_within<T>(std::span<const T>, std::span<const std::uint8_t>,      \
                                                           std::size_t);                                           \
    template std::vector<std::size_t> keep_counts_for<T>(const ParamSet<T>&, double, bool);                        \
    template Mask one_shot_prune<T>(const ParamSet<T>&, const PruneConfig&);                                       \
    template Mask iterative_prune<T>(const ModelSpec&, const Dataset<T>&, const ParamSet<T>&, const TrainConfig&,  \
                                     const PruneConfig&, const ParamSet<T>*, IterativeTrace*);                     \
    template ParamSet<T> admm_project<T>(const ParamSet<T>&, std::span<const std::size_t>);                        \
    template Mask admm_prune<T>(const ModelSpec&, const Dataset<T>&, const ParamSet<T>&, const TrainConfig&,       \
                                const PruneConfig&, AdmmTrace*, AdmmState<T>*);                                    \
    template Mask generate_mask<T>(const ModelSpec&, const Dataset<T>&, const ParamSet<T>&, const ParamSet<T>&,    \
                                   const TrainConfig&, const PruneConfig&, long*);

TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)

}  // namespace tklab
