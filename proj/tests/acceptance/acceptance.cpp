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

// Acceptance suite. Prints one PASS/FAIL line per criterion; the exit status
// is nonzero if any criterion fails. Arguments select a subset, e.g. "1 4".

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tklab/checkpoint.hpp"
#include "tklab/config.hpp"
#include "tklab/correlation.hpp"
#include "tklab/harness.hpp"
#include "tklab/network.hpp"
#include "tklab/pruning.hpp"
#include "tklab/regimes.hpp"

using namespace tklab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, a);
    return buf;
}

std::string pct(double fraction) { return fmt("%.2f%%", 100.0 * fraction); }

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------- 1

Verdict correlation_calibration() {
    const auto start = Clock::now();
    const ModelSpec model = make_mlp(10, {40, 30}, 4);
    bool identity = true;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto theta = init_params<float>(model, seed);
        for (double p : kDefaultPGrid) identity = identity && correlation_indicator(theta, theta, p) == 1.0;
    }

    constexpr std::size_t kN = 10000;
    constexpr std::size_t kTrials = 1000;
    const std::vector<std::size_t> sizes{kN};
    auto random_layer = [&](std::uint64_t substream) {
        ParamSet<float> ps;
        CounterRng rng(2024, Stream::probe, substream);
        std::vector<float> v(kN);
        for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
        ps.entries.push_back({"layer.weight", Tensor<float>({kN}, std::move(v)), true});
        return ps;
    };

    std::vector<std::pair<double, double>> bands;
    for (double p : kDefaultPGrid) bands.push_back(null_band(p, sizes, 10000, 99));
    std::vector<std::vector<double>> r(kDefaultPGrid.size());
    for (std::size_t t = 0; t < kTrials; ++t) {
        const auto a = random_layer(2 * t);
        const auto b = random_layer(2 * t + 1);
        for (std::size_t i = 0; i < kDefaultPGrid.size(); ++i) {
            r[i].push_back(correlation_indicator(a, b, kDefaultPGrid[i]));
        }
    }
    bool means_ok = true;
    std::size_t inside = 0;
    std::ostringstream os;
    os << "identity " << (identity ? "exact" : "BROKEN") << "; mean R:";
    for (std::size_t i = 0; i < kDefaultPGrid.size(); ++i) {
        const double m = mean(r[i]);
        means_ok = means_ok && std::abs(m - kDefaultPGrid[i]) <= 0.01;
        for (double x : r[i]) inside += (x >= bands[i].first && x <= bands[i].second) ? 1 : 0;
        os << " " << fmt("%.4f", m);
    }
    const double coverage = static_cast<double>(inside) / static_cast<double>(kTrials * kDefaultPGrid.size());
    const double elapsed = seconds_since(start);
    os << "; inside band " << pct(coverage) << "; " << fmt("%.1fs", elapsed);
    return {identity && means_ok && coverage >= 0.99 && elapsed < 10.0, os.str()};
}

// ---------------------------------------------------------------- 2

struct GradProbe {
    std::size_t probes = 0;
    double worst = 0.0;
};

double loss_of(const ModelSpec& model, const ParamSet<double>& params, const Tensor<double>& batch,
               const std::vector<std::int32_t>& labels) {
    return loss_and_grads(model, params, batch, labels).loss;
}

double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Probes `count` random parameter entries of the tensors selected by `pick`
// and, when `inputs` is set, `count` random input entries.
GradProbe probe_gradients(const ModelSpec& model, std::uint64_t seed, std::size_t batch_size, std::size_t count,
                          const std::function<bool(const std::string&)>& pick, bool inputs) {
    constexpr double kStep = 1e-4;
    auto params = init_params<double>(model, seed);
    CounterRng rng(seed, Stream::probe);
    for (auto& e : params.entries) {
        for (double& v : e.tensor.values()) v += 0.1 * rng.normal();
    }
    Shape shape{batch_size};
    shape.insert(shape.end(), model.input_shape.begin(), model.input_shape.end());
    Tensor<double> batch(shape);
    for (double& v : batch.values()) v = rng.normal();
    std::vector<std::int32_t> labels(batch_size);
    for (auto& l : labels) l = static_cast<std::int32_t>(rng.below(model.class_count));

    const auto exact = loss_and_grads(model, params, batch, labels, inputs);
    GradProbe out;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (pick(params[i].name)) candidates.push_back(i);
    }
    for (std::size_t n = 0; n < count && !candidates.empty(); ++n) {
        const std::size_t e = candidates[rng.below(candidates.size())];
        const std::size_t k = rng.below(params[e].tensor.size());
        const double saved = params[e].tensor[k];
        params[e].tensor[k] = saved + kStep;
        const double up = loss_of(model, params, batch, labels);
        params[e].tensor[k] = saved - kStep;
        const double down = loss_of(model, params, batch, labels);
        params[e].tensor[k] = saved;
        out.worst = std::max(out.worst, rel_error(exact.grads[e].tensor[k], (up - down) / (2 * kStep)));
        ++out.probes;
    }
    if (inputs) {
        for (std::size_t n = 0; n < count; ++n) {
            const std::size_t k = rng.below(batch.size());
            const double saved = batch[k];
            batch[k] = saved + kStep;
            const double up = loss_of(model, params, batch, labels);
            batch[k] = saved - kStep;
            const double down = loss_of(model, params, batch, labels);
            batch[k] = saved;
            out.worst = std::max(out.worst, rel_error(exact.input_grads[k], (up - down) / (2 * kStep)));
            ++out.probes;
        }
    }
    return out;
}

Verdict gradient_checks() {
    const auto start = Clock::now();
    auto any = [](const std::string&) { return true; };
    auto none = [](const std::string&) { return false; };

    ModelSpec dense{{6}, 3, {DenseLayer{6, 5}, ReluLayer{}, DenseLayer{5, 4}, ReluLayer{}, DenseLayer{4, 3}}};
    ModelSpec conv{{2, 7, 7}, 3,
                   {Conv2DLayer{2, 3, 3, 1}, ReluLayer{}, Conv2DLayer{3, 2, 2, 2}, FlattenLayer{},
                    DenseLayer{2 * 2 * 2, 3}}};
    ModelSpec relu{{8}, 3, {ReluLayer{}, DenseLayer{8, 3}}};
    ModelSpec flatten{{2, 3, 3}, 3, {FlattenLayer{}, DenseLayer{18, 3}}};

    struct Case {
        const char* name;
        GradProbe probe;
    };
    std::vector<Case> cases{
        {"dense", probe_gradients(dense, 11, 4, 80, any, true)},
        {"conv2d", probe_gradients(conv, 12, 3, 80,
                                   [](const std::string& n) { return n.rfind("conv", 0) == 0; },
                                   true)},
        {"relu", probe_gradients(relu, 13, 4, 80, none, true)},
        {"flatten", probe_gradients(flatten, 14, 4, 80, none, true)},
    };
    bool ok = true;
    std::ostringstream os;
    for (const auto& c : cases) {
        ok = ok && c.probe.probes >= 50 && c.probe.worst <= 1e-5;
        os << c.name << " " << c.probe.probes << " probes max rel " << fmt("%.1e", c.probe.worst) << "; ";
    }
    const double elapsed = seconds_since(start);
    os << fmt("%.1fs", elapsed);
    return {ok && elapsed < 30.0, os.str()};
}

// ---------------------------------------------------------------- 3

Verdict mask_invariance() {
    const ModelSpec model = make_mlp(2, {64}, 2);
    const auto split = train_test_split(gen_spirals<float>(400, 1.0, 0.05, 3), 0.2, 7);
    TrainConfig tc;
    tc.epochs = 20;
    tc.lr0 = 0.05;
    tc.milestones = {10, 15};
    tc.batch_size = 32;
    tc.seed = 5;
    tc.rewind_epoch = 2;
    const auto theta_0 = init_params<float>(model, tc.seed);
    const auto pre = pretrain(model, theta_0, split.train, tc);
    const auto& theta_2 = pre.snapshots.at(2);
    const auto reinit = reinit_params<float>(model, tc.seed);

    std::size_t boundaries = 0;
    std::size_t violations = 0;
    double worst_drift = 0.0;
    for (double s : {0.3, 0.5, 0.7, 0.9}) {
        PruneConfig pc;
        pc.target_sparsity = s;
        pc.exempt_first = false;
        const Mask mask = one_shot_prune(pre.theta_T, pc);
        TrainHooks<float> hooks;
        hooks.on_epoch_end = [&](long, const ParamSet<float>& params) {
            ++boundaries;
            if (assert_mask_invariant(params, mask)) ++violations;
            worst_drift = std::max(worst_drift,
                                   std::abs(sparsity(mask_from_support(params, mask.exempt_names)) - sparsity(mask)));
        };
        sparse_train(model, theta_0, mask, split.train, tc, hooks);
        sparse_train(model, reinit, mask, split.train, tc, hooks);
        sparse_train(model, theta_2, mask, split.train, tc, hooks);
        prune_and_finetune(model, pre.theta_T, mask, split.train, tc, hooks);
    }
    std::ostringstream os;
    os << boundaries << " epoch boundaries, " << violations << " violations, max drift " << worst_drift;
    return {boundaries == 4 * 4 * 20 && violations == 0 && worst_drift == 0.0, os.str()};
}

// ---------------------------------------------------------------- 4

bool keep_counts_honored(const ParamSet<float>& params, const Mask& mask, double s, bool exempt_first) {
    const auto expected = keep_counts_for(params, s, exempt_first);
    if (expected.size() != mask.entries.size()) return false;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (mask.entries[i].kept() != expected[i]) return false;
    }
    return true;
}

bool nested(const Mask& inner, const Mask& outer) {
    for (std::size_t i = 0; i < inner.entries.size(); ++i) {
        for (std::size_t k = 0; k < inner.entries[i].size(); ++k) {
            if (inner.entries[i].bits[k] && !outer.entries[i].bits[k]) return false;
        }
    }
    return true;
}

Verdict pruning_exactness() {
    const auto start = Clock::now();
    const ModelSpec model = make_mlp(8, {40, 30, 20}, 3);
    const auto split = train_test_split(gen_blobs<float>(300, 3, 8, 1.0, 4), 0.2, 7);
    TrainConfig tc;
    tc.epochs = 4;
    tc.lr0 = 0.05;
    tc.milestones = {2};
    tc.batch_size = 32;
    tc.seed = 9;
    const auto theta_0 = init_params<float>(model, tc.seed);
    const auto theta_T = pretrain(model, theta_0, split.train, tc).theta_T;

    std::size_t masks = 0;
    std::size_t honored = 0;
    bool nesting = true;
    for (bool exempt_first : {true, false}) {
        for (double s : {0.3, 0.5, 0.7, 0.9}) {
            for (auto alg : {PruneAlgorithm::one_shot, PruneAlgorithm::iterative, PruneAlgorithm::admm}) {
                PruneConfig pc;
                pc.algorithm = alg;
                pc.target_sparsity = s;
                pc.exempt_first = exempt_first;
                pc.admm.outer_iters = 3;
                pc.admm.inner_epochs = 1;
                Mask mask;
                if (alg == PruneAlgorithm::iterative) {
                    IterativeTrace trace;
                    mask = iterative_prune(model, split.train, theta_0, tc, pc, &theta_T, &trace);
                    for (std::size_t j = 1; j < trace.rounds.size(); ++j) {
                        nesting = nesting && nested(trace.rounds[j], trace.rounds[j - 1]);
                    }
                    nesting = nesting && !trace.rounds.empty() && trace.rounds.back().same_pattern(mask);
                } else {
                    mask = generate_mask(model, split.train, theta_0, theta_T, tc, pc);
                }
                ++masks;
                honored += keep_counts_honored(theta_T, mask, s, exempt_first) ? 1 : 0;
            }
        }
    }

    PruneConfig zero;
    zero.target_sparsity = 0.0;
    const bool all_ones = sparsity(one_shot_prune(theta_T, zero)) == 0.0;

    std::size_t beaten = 0;
    std::size_t competitors = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        CounterRng rng(77, Stream::probe, t);
        const std::size_t n = 10 + rng.below(190);
        const std::size_t k = 1 + rng.below(n);
        std::vector<float> v(n);
        for (float& x : v) x = static_cast<float>(rng.normal());
        ParamSet<float> x;
        x.entries.push_back({"t.weight", Tensor<float>({n}, v), true});
        const std::vector<std::size_t> keep{k};
        const auto z = admm_project(x, keep);
        double dz = 0.0;
        for (std::size_t i = 0; i < n; ++i) dz += std::pow(double(v[i]) - double(z[0].tensor[i]), 2);
        for (std::size_t c = 0; c < 1000; ++c) {
            std::vector<std::size_t> idx(n);
            for (std::size_t i = 0; i < n; ++i) idx[i] = i;
            for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
            std::vector<double> y(n, 0.0);
            // Even competitors copy x on their support, the best any support can do.
            for (std::size_t i = 0; i < k; ++i) y[idx[i]] = (c % 2 == 0) ? double(v[idx[i]]) : rng.normal();
            double dy = 0.0;
            for (std::size_t i = 0; i < n; ++i) dy += std::pow(double(v[i]) - y[i], 2);
            ++competitors;
            beaten += dz <= dy ? 1 : 0;
        }
    }

    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << honored << "/" << masks << " masks honor keep counts; nested " << (nesting ? "yes" : "NO")
       << "; s=0 all-ones " << (all_ones ? "yes" : "NO") << "; projection beats " << beaten << "/" << competitors
       << "; " << fmt("%.1fs", elapsed);
    return {honored == masks && nesting && all_ones && beaten == competitors && elapsed < 20.0, os.str()};
}

// ---------------------------------------------------------------- 5-9

// Two-spirals desk setup shared by criteria 5 to 9.
constexpr double kLr0 = 0.1;
constexpr std::size_t kSeeds = 5;
constexpr long kRewind = 4;  // T / 15
constexpr double kP = 0.2;

ModelSpec desk_model() { return make_mlp(2, {128, 128, 128}, 2); }

const Split<float>& desk_data() {
    static const Split<float> split = train_test_split(gen_spirals<float>(4000, 2.4, 0.02, 42), 0.2, 7);
    return split;
}

TrainConfig desk_train(double lr0, std::uint64_t seed) {
    TrainConfig tc;
    tc.epochs = 60;
    tc.lr0 = lr0;
    tc.milestones = {30, 45};
    tc.batch_size = 64;
    tc.weight_decay = 3e-3;
    tc.seed = seed;
    tc.rewind_epoch = kRewind;
    return tc;
}

std::string cell(PruneAlgorithm alg, const char* regime, double s) {
    return to_string(alg) + "/" + regime + "/" + fmt("%.1f", s);
}

struct DeskSeed {
    double dense = 0.0;
    double r_theta0_thetaT = 0.0;
    std::map<std::string, double> acc;
    double r_ft_theta0 = 0.0;
    double r_ft_thetaT = 0.0;
};

// `full` runs the high-lr protocol (all algorithms, the sparsity grid,
// fine-tuning and rewinding); otherwise only the iterative ticket/reinit pair
// at 0.5.
DeskSeed run_desk_seed(double lr0, std::uint64_t seed, bool full) {
    const ModelSpec model = desk_model();
    const auto& data = desk_data();
    const TrainConfig tc = desk_train(lr0, seed);
    const auto theta_0 = init_params<float>(model, seed);
    const auto pre = pretrain(model, theta_0, data.train, tc);
    const auto& theta_T = pre.theta_T;

    DeskSeed out;
    out.dense = accuracy(model, theta_T, data.test);
    out.r_theta0_thetaT = correlation_indicator(theta_0, theta_T, kP);

    std::vector<PruneAlgorithm> algorithms{PruneAlgorithm::iterative};
    std::vector<double> sparsities{0.5};
    if (full) {
        algorithms = {PruneAlgorithm::one_shot, PruneAlgorithm::iterative, PruneAlgorithm::admm};
        sparsities = {0.3, 0.5, 0.7};
    }
    for (auto alg : algorithms) {
        for (double s : sparsities) {
            PruneConfig pc;
            pc.algorithm = alg;
            pc.target_sparsity = s;
            const Mask mask = generate_mask(model, data.train, theta_0, theta_T, tc, pc);
            const bool mid = s == 0.5;
            out.acc[cell(alg, "ticket", s)] =
                accuracy(model, sparse_train(model, theta_0, mask, data.train, tc), data.test);
            if (alg == PruneAlgorithm::iterative && mid) {
                const auto reinit = reinit_params<float>(model, seed);
                out.acc[cell(alg, "reinit", s)] =
                    accuracy(model, sparse_train(model, reinit, mask, data.train, tc), data.test);
            }
            if (!full) continue;
            const auto ft = prune_and_finetune(model, theta_T, mask, data.train, tc);
            out.acc[cell(alg, "finetune", s)] = accuracy(model, ft, data.test);
            if (alg == PruneAlgorithm::one_shot && mid) {
                out.r_ft_theta0 = correlation_sparse_dense(ft, mask, theta_0, kP).r;
                out.r_ft_thetaT = correlation_sparse_dense(ft, mask, theta_T, kP).r;
            }
            if (alg == PruneAlgorithm::admm && mid) {
                out.acc[cell(alg, "rewind", s)] = accuracy(
                    model, sparse_train(model, pre.snapshots.at(kRewind), mask, data.train, tc), data.test);
            }
        }
    }
    return out;
}

struct Desk {
    std::vector<DeskSeed> high;
    std::vector<DeskSeed> low;
    double seconds = 0.0;

    double mean_acc(const std::vector<DeskSeed>& runs, const std::string& key) const {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.acc.at(key));
        return mean(v);
    }
};

const Desk& desk() {
    static const Desk d = [] {
        const auto start = Clock::now();
        Desk out;
        for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
            out.high.push_back(run_desk_seed(kLr0, seed, true));
            out.low.push_back(run_desk_seed(kLr0 / 10, seed, false));
            std::fprintf(stderr, "  desk seed %llu done (%.0fs)\n", static_cast<unsigned long long>(seed),
                         seconds_since(start));
        }
        out.seconds = seconds_since(start);
        return out;
    }();
    return d;
}

Verdict lr_correlation() {
    const Desk& d = desk();
    std::size_t higher = 0;
    std::vector<double> high_r;
    std::ostringstream os;
    os << "R(theta0,thetaT) at p=0.2 high/low:";
    for (std::size_t i = 0; i < kSeeds; ++i) {
        higher += d.low[i].r_theta0_thetaT > d.high[i].r_theta0_thetaT ? 1 : 0;
        high_r.push_back(d.high[i].r_theta0_thetaT);
        os << " " << fmt("%.3f", d.high[i].r_theta0_thetaT) << "/" << fmt("%.3f", d.low[i].r_theta0_thetaT);
    }
    const double m = mean(high_r);
    os << "; low > high in " << higher << "/" << kSeeds << "; high mean " << fmt("%.4f", m) << "; desk "
       << fmt("%.0fs", d.seconds);
    return {higher >= 4 && std::abs(m - kP) <= 0.05, os.str()};
}

Verdict winning_property() {
    const Desk& d = desk();
    const std::string ticket = cell(PruneAlgorithm::iterative, "ticket", 0.5);
    const std::string reinit = cell(PruneAlgorithm::iterative, "reinit", 0.5);
    auto dense = [](const std::vector<DeskSeed>& runs) {
        std::vector<double> v;
        for (const auto& r : runs) v.push_back(r.dense);
        return mean(v);
    };
    const auto low = evaluate_winning_property(dense(d.low), d.mean_acc(d.low, ticket), d.mean_acc(d.low, reinit));
    const double high_gap = d.mean_acc(d.high, ticket) - d.mean_acc(d.high, reinit);
    std::ostringstream os;
    os << "low lr dense/ticket/reinit " << pct(low.acc_dense) << "/" << pct(low.acc_ticket) << "/"
       << pct(low.acc_reinit) << " aspect2 " << (low.aspect2 ? "holds" : "fails") << "; high lr ticket-reinit "
       << fmt("%+.2f pp", 100.0 * high_gap);
    return {low.aspect2 && std::abs(high_gap) <= 0.005, os.str()};
}

Verdict finetune_dominance() {
    const Desk& d = desk();
    bool ok = true;
    std::ostringstream os;
    for (auto alg : {PruneAlgorithm::one_shot, PruneAlgorithm::iterative, PruneAlgorithm::admm}) {
        os << to_string(alg) << " ft-ticket";
        for (double s : {0.3, 0.5, 0.7}) {
            const double gap = d.mean_acc(d.high, cell(alg, "finetune", s)) - d.mean_acc(d.high, cell(alg, "ticket", s));
            ok = ok && gap >= 0.0;
            os << " " << fmt("%+.2f", 100.0 * gap);
        }
        os << " pp; ";
    }
    const double admm = d.mean_acc(d.high, cell(PruneAlgorithm::admm, "finetune", 0.7));
    const double one_shot = d.mean_acc(d.high, cell(PruneAlgorithm::one_shot, "finetune", 0.7));
    os << "ft at 0.7 admm/one_shot " << pct(admm) << "/" << pct(one_shot);
    return {ok && admm >= one_shot, os.str()};
}

Verdict finetune_correlation() {
    const Desk& d = desk();
    std::vector<double> r0;
    std::vector<double> rT;
    for (const auto& r : d.high) {
        r0.push_back(r.r_ft_theta0);
        rT.push_back(r.r_ft_thetaT);
    }
    const double m0 = mean(r0);
    const double mT = mean(rT);
    std::ostringstream os;
    os << "R(ft, theta0) " << fmt("%.4f", m0) << "; R(ft, thetaT) " << fmt("%.4f", mT);
    return {std::abs(m0 - kP) <= 0.05 && mT >= kP + 0.15, os.str()};
}

Verdict rewind_ordering() {
    const Desk& d = desk();
    const double ft = d.mean_acc(d.high, cell(PruneAlgorithm::admm, "finetune", 0.5));
    const double rw = d.mean_acc(d.high, cell(PruneAlgorithm::admm, "rewind", 0.5));
    const double tk = d.mean_acc(d.high, cell(PruneAlgorithm::admm, "ticket", 0.5));
    std::ostringstream os;
    os << "finetune/rewind(k=" << kRewind << ")/ticket " << pct(ft) << "/" << pct(rw) << "/" << pct(tk);
    return {ft >= rw && rw >= tk && ft - tk > 0.005, os.str()};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
bool bitwise_equal(const ParamSet<T>& a, const ParamSet<T>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape()) return false;
        if (std::memcmp(a[i].tensor.data(), b[i].tensor.data(), a[i].tensor.size() * sizeof(T)) != 0) return false;
    }
    return a.provenance == b.provenance;
}

const char* kDeterminismConfig = R"({
  "model": {"inputs": 2, "hidden": [24, 24], "classes": 2},
  "dataset": {"kind": "spirals", "n": 400, "turns": 1.0, "noise": 0.05},
  "train": {"epochs": 6, "lr0": 0.05, "milestones": [3, 5], "batch_size": 32, "rewind_epoch": 1},
  "prune": {"algorithms": ["one_shot", "iterative", "admm"], "rounds": 2, "admm": {"inner_epochs": 1}},
  "sparsities": [0.5, 0.8],
  "seeds": [1, 2, 3],
  "null_trials": 100
})";

Verdict determinism() {
    const auto start = Clock::now();
    const fs::path root = fs::current_path() / "acceptance-determinism";
    fs::remove_all(root);
    fs::create_directories(root);

    const ModelSpec model = make_mlp(3, {7, 5}, 2);
    auto params = init_params<double>(model, 3);
    params.entries[0].tensor[0] = -0.0;
    params.entries[0].tensor[1] = 1e-310;
    PruneConfig pc;
    auto theta_T = params;
    theta_T.provenance = {ProvenanceKind::pretrained, 6, false};
    Checkpoint<double> ck{{}, params, one_shot_prune(theta_T, pc)};
    ck.header.precision = Precision::f64;
    ck.header.model_digest = model_digest(model);
    save_checkpoint(root / "a.tklb", ck);
    const auto loaded = load_checkpoint<double>(root / "a.tklb", model_digest(model));
    save_checkpoint(root / "b.tklb", loaded);
    const bool round_trip = bitwise_equal(loaded.params, params) && loaded.mask && loaded.mask->same_pattern(*ck.mask) &&
                            slurp(root / "a.tklb") == slurp(root / "b.tklb");

    auto run = [&](const std::string& name, std::size_t workers) {
        ExperimentConfig config = parse_config(kDeterminismConfig);
        config.output_dir = root / name;
        RunOptions options;
        options.workers = workers;
        options.force = true;
        run_experiment(config, options);
        return std::vector<std::string>{slurp(root / name / "raw.csv"), slurp(root / name / "aggregate.csv"),
                                        slurp(root / name / "report.json")};
    };
    const auto first = run("w1-a", 1);
    const auto second = run("w1-b", 1);
    const auto parallel = run("w4", 4);
    const bool same_raw = !first[0].empty() && first[0] == second[0];
    const bool same_parallel = first == parallel;
    const double elapsed = seconds_since(start);
    fs::remove_all(root);

    std::ostringstream os;
    os << "checkpoint round-trip " << (round_trip ? "bit-exact" : "DIFFERS") << "; rerun raw.csv "
       << (same_raw ? "identical" : "DIFFERS") << "; workers 1 vs 4 " << (same_parallel ? "identical" : "DIFFER")
       << "; " << fmt("%.1fs", elapsed);
    return {round_trip && same_raw && same_parallel && elapsed < 60.0, os.str()};
}

struct Criterion {
    int id;
    const char* title;
    Verdict (*check)();
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "correlation identity and null calibration", correlation_calibration},
        {2, "finite-difference gradient checks", gradient_checks},
        {3, "mask invariance during sparse training", mask_invariance},
        {4, "pruning algorithm exactness", pruning_exactness},
        {5, "learning rate vs initial-weight correlation", lr_correlation},
        {6, "winning property at low but not high lr", winning_property},
        {7, "fine-tuning dominates tickets", finetune_dominance},
        {8, "fine-tuned weights track thetaT, not theta0", finetune_correlation},
        {9, "finetune >= rewind >= ticket under ADMM masks", rewind_ordering},
        {10, "engineering determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += v.pass ? 0 : 1;
        std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.title, v.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
