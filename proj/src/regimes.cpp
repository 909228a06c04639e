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

#include "tklab/regimes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

namespace tklab {

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::pretrain: return "pretrain";
        case Regime::ticket: return "ticket";
        case Regime::reinit: return "reinit";
        case Regime::rewind: return "rewind";
        case Regime::finetune: return "finetune";
    }
    return "unknown";
}

Regime parse_regime(const std::string& name) {
    for (Regime r : {Regime::pretrain, Regime::ticket, Regime::reinit, Regime::rewind, Regime::finetune}) {
        if (to_string(r) == name) return r;
    }
    throw ConfigError("unknown regime '" + name + "'");
}

template <typename T>
PretrainResult<T> pretrain(const ModelSpec& model, const ParamSet<T>& theta_0, const Dataset<T>& data,
                           const TrainConfig& config, const TrainHooks<T>& hooks) {
    if (theta_0.provenance.kind != ProvenanceKind::init) {
        throw ConfigError("pretrain expects init weights, got " + theta_0.provenance.to_string());
    }
    PretrainResult<T> result;
    TrainHooks<T> h = hooks;
    h.mask = nullptr;
    if (config.rewind_epoch) {
        const long k = *config.rewind_epoch;
        if (k == 0) {
            result.snapshots[0] = theta_0;
            result.snapshots[0].provenance = {ProvenanceKind::rewind, 0, false};
        }
        h.on_epoch_end = [&result, k, user = hooks.on_epoch_end](long epoch, const ParamSet<T>& params) {
            if (epoch == k) {
                auto& snap = result.snapshots[k];
                snap = params;
                snap.provenance = {ProvenanceKind::rewind, k, false};
            }
            if (user) user(epoch, params);
        };
    }
    result.theta_T = train(model, theta_0, data, config, h);
    result.theta_T.provenance = {ProvenanceKind::pretrained, config.epochs, false};
    return result;
}

template <typename T>
ParamSet<T> sparse_train(const ModelSpec& model, const ParamSet<T>& start, const Mask& mask, const Dataset<T>& data,
                         const TrainConfig& config, TrainHooks<T> hooks) {
    require_congruent(start, mask);
    hooks.mask = &mask;
    ParamSet<T> out = train(model, apply_mask(start, mask), data, config, hooks);
    out.provenance = {ProvenanceKind::sparse_trained, config.epochs, true};
    return out;
}

template <typename T>
ParamSet<T> prune_and_finetune(const ModelSpec& model, const ParamSet<T>& theta_T, const Mask& mask,
                               const Dataset<T>& data, const TrainConfig& config, TrainHooks<T> hooks) {
    if (theta_T.provenance.kind != ProvenanceKind::pretrained) {
        throw ConfigError("prune_and_finetune expects pretrained weights, got " + theta_T.provenance.to_string());
    }
    require_congruent(theta_T, mask);
    hooks.mask = &mask;
    ParamSet<T> out = train(model, apply_mask(theta_T, mask), data, config, hooks);
    out.provenance = {ProvenanceKind::finetuned, config.epochs, true};
    return out;
}

WinningVerdict evaluate_winning_property(double acc_dense, double acc_ticket, double acc_reinit, double epsilon,
                                         double delta) {
    WinningVerdict v;
    v.epsilon = epsilon;
    v.delta = delta;
    v.acc_dense = acc_dense;
    v.acc_ticket = acc_ticket;
    v.acc_reinit = acc_reinit;
    v.aspect1 = acc_ticket >= acc_dense - epsilon;
    v.aspect2 = acc_ticket - acc_reinit > delta;
    return v;
}

void SuiteConfig::validate() const {
    train.validate();
    prune.validate();
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (algorithms.empty()) throw ConfigError("at least one pruning algorithm is required");
    if (sparsities.empty()) throw ConfigError("sparsity grid is empty");
    for (double s : sparsities) {
        if (!(s >= 0.0 && s < 1.0)) throw ConfigError("sparsities must lie in [0, 1)");
    }
    for (double p : p_grid) {
        if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p grid values must lie in (0, 1]");
    }
    if (!(p_sparse > 0.0 && p_sparse <= 1.0)) throw ConfigError("p_sparse must lie in (0, 1]");
    if (std::find(regimes.begin(), regimes.end(), Regime::rewind) != regimes.end() && !train.rewind_epoch) {
        throw ConfigError("the rewind regime needs train.rewind_epoch");
    }
    if (finetune_epochs && *finetune_epochs < 0) throw ConfigError("finetune_epochs must be non-negative");
    if (workers == 0) throw ConfigError("workers must be at least 1");
}

bool ExperimentReport::any_failed() const {
    return std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.error.empty(); });
}

const AggregateRow* ExperimentReport::find(const std::string& algorithm, Regime regime, double sparsity) const {
    for (const auto& a : aggregates) {
        if (a.algorithm == algorithm && a.regime == regime && a.sparsity == sparsity) return &a;
    }
    return nullptr;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string sparsity_tag(double sparsity) {
    std::ostringstream out;
    out << sparsity;
    return out.str();
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ReportRow>& rows, double epsilon, double delta) {
    std::vector<AggregateRow> out;
    auto find = [&](const ReportRow& r) -> AggregateRow& {
        for (auto& a : out) {
            if (a.lr0 == r.lr0 && a.algorithm == r.algorithm && a.regime == r.regime && a.sparsity == r.sparsity) {
                return a;
            }
        }
        AggregateRow a;
        a.lr0 = r.lr0;
        a.algorithm = r.algorithm;
        a.regime = r.regime;
        a.sparsity = r.sparsity;
        out.push_back(std::move(a));
        return out.back();
    };
    for (const auto& r : rows) {
        auto& a = find(r);
        if (r.accuracy) {
            a.values.push_back(*r.accuracy);
        } else {
            ++a.failed;
        }
    }
    for (auto& a : out) {
        const double n = static_cast<double>(a.values.size());
        if (a.values.empty()) continue;
        double sum = 0.0;
        for (double v : a.values) sum += v;
        a.mean = sum / n;
        double ss = 0.0;
        for (double v : a.values) ss += (v - a.mean) * (v - a.mean);
        a.std = a.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    for (auto& a : out) {
        if (a.regime != Regime::ticket || a.values.empty()) continue;
        const AggregateRow* dense = nullptr;
        const AggregateRow* reinit = nullptr;
        for (const auto& b : out) {
            if (b.lr0 != a.lr0 || b.values.empty()) continue;
            if (b.regime == Regime::pretrain) dense = &b;
            if (b.regime == Regime::reinit && b.algorithm == a.algorithm && b.sparsity == a.sparsity) reinit = &b;
        }
        if (dense && reinit) a.verdict = evaluate_winning_property(dense->mean, a.mean, reinit->mean, epsilon, delta);
    }
    return out;
}

namespace {

template <typename T>
struct SeedState {
    std::optional<ParamSet<T>> theta_0;
    std::optional<PretrainResult<T>> pretrained;
    std::string error;
};

template <typename T>
struct MaskState {
    std::optional<Mask> mask;
    long epochs = 0;
    std::string error;
};

struct CellKey {
    std::size_t seed = 0;
    std::size_t algorithm = 0;
    std::size_t sparsity = 0;
    Regime regime = Regime::ticket;
};

std::string describe(const std::exception& e) {
    std::string kind = "error";
    if (dynamic_cast<const NumericError*>(&e)) kind = "numeric";
    else if (dynamic_cast<const ConsistencyError*>(&e)) kind = "consistency";
    else if (dynamic_cast<const ConfigError*>(&e)) kind = "config";
    else if (dynamic_cast<const DomainError*>(&e)) kind = "domain";
    return kind + ": " + e.what();
}

TrainConfig with_seed(TrainConfig config, std::uint64_t seed) {
    config.seed = seed;
    return config;
}

}  // namespace

template <typename T>
SuiteResult<T> run_regime_suite(const ModelSpec& model, const Split<T>& data, const SuiteConfig& config) {
    config.validate();
    validate(model);
    const std::size_t n_seeds = config.seeds.size();
    const std::size_t n_alg = config.algorithms.size();
    const std::size_t n_sp = config.sparsities.size();

    // Stage 1: one dense pretraining run per seed.
    std::vector<SeedState<T>> seeds(n_seeds);
    parallel_for(n_seeds, config.workers, [&](std::size_t i) {
        const std::uint64_t seed = config.seeds[i];
        try {
            seeds[i].theta_0 = init_params<T>(model, seed);
            seeds[i].pretrained = pretrain(model, *seeds[i].theta_0, data.train, with_seed(config.train, seed));
        } catch (const std::exception& e) {
            seeds[i].error = describe(e);
        }
    });

    // Stage 2: masks per (seed, algorithm, sparsity).
    std::vector<MaskState<T>> masks(n_seeds * n_alg * n_sp);
    auto mask_index = [&](std::size_t s, std::size_t a, std::size_t p) { return (s * n_alg + a) * n_sp + p; };
    parallel_for(masks.size(), config.workers, [&](std::size_t idx) {
        const std::size_t p = idx % n_sp;
        const std::size_t a = (idx / n_sp) % n_alg;
        const std::size_t s = idx / (n_sp * n_alg);
        auto& out = masks[idx];
        if (!seeds[s].pretrained) {
            out.error = "dependency: pretraining failed";
            return;
        }
        PruneConfig prune = config.prune;
        prune.algorithm = config.algorithms[a];
        prune.target_sparsity = config.sparsities[p];
        try {
            out.mask = generate_mask(model, data.train, *seeds[s].theta_0, seeds[s].pretrained->theta_T,
                                     with_seed(config.train, config.seeds[s]), prune, &out.epochs);
        } catch (const std::exception& e) {
            out.error = describe(e);
        }
    });

    // Stage 3: regime cells.
    std::vector<CellKey> cells;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        for (std::size_t a = 0; a < n_alg; ++a) {
            for (std::size_t p = 0; p < n_sp; ++p) {
                for (Regime r : config.regimes) {
                    if (r != Regime::pretrain) cells.push_back({s, a, p, r});
                }
            }
        }
    }
    std::vector<ReportRow> cell_rows(cells.size());
    std::vector<std::vector<LabelledCorrelation>> cell_corr(cells.size());
    TrainConfig finetune_base = config.train;
    if (config.finetune_epochs) {
        finetune_base.epochs = *config.finetune_epochs;
        std::erase_if(finetune_base.milestones, [&](long m) { return m >= finetune_base.epochs; });
        finetune_base.rewind_epoch.reset();
    }

    parallel_for(cells.size(), config.workers, [&](std::size_t c) {
        const CellKey key = cells[c];
        const std::uint64_t seed = config.seeds[key.seed];
        ReportRow& row = cell_rows[c];
        row.seed = seed;
        row.lr0 = config.train.lr0;
        row.algorithm = to_string(config.algorithms[key.algorithm]);
        row.regime = key.regime;
        row.sparsity = config.sparsities[key.sparsity];
        const auto& ms = masks[mask_index(key.seed, key.algorithm, key.sparsity)];
        if (!ms.mask) {
            row.error = ms.error.rfind("dependency", 0) == 0 ? ms.error : "dependency: mask generation failed";
            return;
        }
        const Mask& mask = *ms.mask;
        const auto& st = seeds[key.seed];
        try {
            const TrainConfig tc = with_seed(config.train, seed);
            ParamSet<T> start;
            ParamSet<T> result;
            switch (key.regime) {
                case Regime::ticket:
                    start = *st.theta_0;
                    result = sparse_train(model, start, mask, data.train, tc);
                    break;
                case Regime::reinit:
                    start = reinit_params<T>(model, seed);
                    result = sparse_train(model, start, mask, data.train, tc);
                    break;
                case Regime::rewind:
                    start = st.pretrained->snapshots.at(*config.train.rewind_epoch);
                    result = sparse_train(model, start, mask, data.train, tc);
                    break;
                case Regime::finetune:
                    start = st.pretrained->theta_T;
                    result = prune_and_finetune(model, start, mask, data.train, with_seed(finetune_base, seed));
                    break;
                case Regime::pretrain:
                    break;
            }
            row.accuracy = accuracy(model, result, data.test);
            const double p = config.p_sparse;
            const ParamSet<T> masked_start = apply_mask(start, mask);
            auto add = [&](const std::string& label, Scenario scenario, CorrelationPoint point) {
                LabelledCorrelation lc{seed, row.algorithm, key.regime, row.sparsity, label, {}};
                lc.report.scenario = scenario;
                lc.report.points.push_back(std::move(point));
                cell_corr[c].push_back(std::move(lc));
            };
            const auto rs = correlation_sparse_sparse(result, masked_start, mask, p);
            row.r_start = rs.r;
            add("result~start*mask", Scenario::sparse_sparse, rs);
            try {
                const auto r0 = correlation_sparse_dense(result, mask, *st.theta_0, p);
                const auto rT = correlation_sparse_dense(result, mask, st.pretrained->theta_T, p);
                row.r_theta0 = r0.r;
                row.r_thetaT = rT.r;
                add("result~theta0", Scenario::sparse_dense, r0);
                add("result~thetaT", Scenario::sparse_dense, rT);
            } catch (const DomainError&) {
                // p outside the sparse-dense domain for this sparsity; left blank.
            }
        } catch (const std::exception& e) {
            row.accuracy.reset();
            row.error = describe(e);
        }
    });

    SuiteResult<T> out;
    ExperimentReport& report = out.report;
    report.config_digest = config.config_digest;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const std::uint64_t seed = config.seeds[s];
        ReportRow row;
        row.seed = seed;
        row.lr0 = config.train.lr0;
        row.algorithm = "none";
        row.regime = Regime::pretrain;
        row.sparsity = 0.0;
        SeedArtifacts<T> art;
        art.seed = seed;
        art.theta_0 = seeds[s].theta_0;
        if (seeds[s].pretrained) {
            const auto& pre = *seeds[s].pretrained;
            art.theta_T = pre.theta_T;
            if (config.train.rewind_epoch) art.theta_k = pre.snapshots.at(*config.train.rewind_epoch);
            try {
                row.accuracy = accuracy(model, pre.theta_T, data.test);
                row.r_theta0 = correlation_indicator(pre.theta_T, *seeds[s].theta_0, config.p_sparse);
                row.r_thetaT = 1.0;
                LabelledCorrelation lc{seed, "none", Regime::pretrain, 0.0, "theta0~thetaT", {}};
                std::uint64_t null_seed = derive_seed(seed, 0x6E756C6Cu);
                lc.report = correlate_dense(*seeds[s].theta_0, pre.theta_T, config.p_grid, config.null_trials, null_seed);
                report.correlations.push_back(std::move(lc));
            } catch (const std::exception& e) {
                row.accuracy.reset();
                row.error = describe(e);
            }
        } else {
            row.error = seeds[s].error;
        }
        report.rows.push_back(std::move(row));

        for (std::size_t a = 0; a < n_alg; ++a) {
            for (std::size_t p = 0; p < n_sp; ++p) {
                const auto& ms = masks[mask_index(s, a, p)];
                MaskRecord rec;
                rec.seed = seed;
                rec.algorithm = to_string(config.algorithms[a]);
                rec.sparsity = config.sparsities[p];
                rec.epochs_trained = ms.epochs;
                rec.error = ms.error;
                if (ms.mask) {
                    rec.layers = per_layer_sparsity(*ms.mask);
                    art.masks.emplace_back(rec.algorithm + "-s" + sparsity_tag(rec.sparsity), *ms.mask);
                }
                report.masks.push_back(std::move(rec));
            }
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (cells[c].seed != s) continue;
            report.rows.push_back(cell_rows[c]);
            for (auto& lc : cell_corr[c]) report.correlations.push_back(std::move(lc));
        }
        out.artifacts.push_back(std::move(art));
    }

    // Per-seed verdicts on ticket rows.
    for (auto& row : report.rows) {
        if (row.regime != Regime::ticket || !row.accuracy) continue;
        const ReportRow* dense = nullptr;
        const ReportRow* reinit = nullptr;
        for (const auto& other : report.rows) {
            if (other.seed != row.seed || !other.accuracy) continue;
            if (other.regime == Regime::pretrain) dense = &other;
            if (other.regime == Regime::reinit && other.algorithm == row.algorithm && other.sparsity == row.sparsity) {
                reinit = &other;
            }
        }
        if (dense && reinit) {
            row.verdict = evaluate_winning_property(*dense->accuracy, *row.accuracy, *reinit->accuracy,
                                                    config.epsilon, config.delta);
        }
    }
    report.aggregates = aggregate_rows(report.rows, config.epsilon, config.delta);
    return out;
}

#define TKLAB_INSTANTIATE(T)                                                                                        \
    template PretrainResult<T> pretrain<T>(const ModelSpec&, const ParamSet<T>&, const Dataset<T>&,                \
                                           const TrainConfig&, const TrainHooks<T>&);                              \
    template ParamSet<T> sparse_train<T>(const ModelSpec&, const ParamSet<T>&, const Mask&, const Dataset<T>&,     \
                                         const TrainConfig&, TrainHooks<T>);                                       \
    template ParamSet<T> prune_and_finetune<T>(const ModelSpec&, const ParamSet<T>&, const Mask&,                  \
                                               const Dataset<T>&, const TrainConfig&, TrainHooks<T>);              \
    template SuiteResult<T> run_regime_suite<T>(const ModelSpec&, const Split<T>&, const SuiteConfig&);

TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)

}  // namespace tklab
