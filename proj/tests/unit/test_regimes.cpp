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
#include "tklab/regimes.hpp"

using namespace tklab;

namespace {

struct Fixture {
    ModelSpec model = make_mlp(2, {16, 16}, 2);
    Split<float> data = train_test_split(gen_spirals<float>(160, 1.0, 0.05, 3), 0.25, 7);
    TrainConfig tc = [] {
        TrainConfig c;
        c.epochs = 4;
        c.lr0 = 0.05;
        c.milestones = {3};
        c.batch_size = 16;
        c.seed = 11;
        c.rewind_epoch = 2;
        return c;
    }();
    ParamSet<float> theta_0 = init_params<float>(model, 11);
};

Mask half_mask(const ParamSet<float>& theta_T) {
    PruneConfig c;
    c.target_sparsity = 0.5;
    return one_shot_prune(theta_T, c);
}

}  // namespace

TEST_CASE("pretraining") {
    Fixture f;
    auto zero = f.tc;
    zero.epochs = 0;
    zero.rewind_epoch.reset();
    CHECK(pretrain(f.model, f.theta_0, f.data.train, zero).theta_T.same_values(f.theta_0));

    ParamSet<float> live;
    TrainHooks<float> hooks;
    hooks.on_epoch_end = [&](long e, const ParamSet<float>& p) {
        if (e == 2) live = p;
    };
    const auto r = pretrain(f.model, f.theta_0, f.data.train, f.tc, hooks);
    CHECK(r.snapshots.at(2).same_values(live));
    CHECK(r.snapshots.at(2).provenance == Provenance{ProvenanceKind::rewind, 2, false});
    CHECK(r.theta_T.provenance.kind == ProvenanceKind::pretrained);
    CHECK(r.theta_T == pretrain(f.model, f.theta_0, f.data.train, f.tc).theta_T);
    CHECK_THROWS_AS(pretrain(f.model, r.theta_T, f.data.train, f.tc), ConfigError);

    auto k0 = f.tc;
    k0.rewind_epoch = 0;
    CHECK(pretrain(f.model, f.theta_0, f.data.train, k0).snapshots.at(0).same_values(f.theta_0));
}

TEST_CASE("sparse training") {
    Fixture f;
    const auto theta_T = pretrain(f.model, f.theta_0, f.data.train, f.tc).theta_T;
    const Mask ones = all_ones_mask(f.theta_0);
    CHECK(sparse_train(f.model, f.theta_0, ones, f.data.train, f.tc).same_values(theta_T));

    Mask zeros = ones;
    for (auto& e : zeros.entries) std::fill(e.bits.begin(), e.bits.end(), 0);
    long checked = 0;
    TrainHooks<float> hooks;
    hooks.on_epoch_end = [&](long, const ParamSet<float>& p) {
        ++checked;
        for (const auto& e : p.entries) {
            if (!e.prunable) continue;
            for (float v : e.tensor.values()) REQUIRE(v == 0.0f);
        }
    };
    sparse_train(f.model, f.theta_0, zeros, f.data.train, f.tc, hooks);
    CHECK(checked == f.tc.epochs);

    const Mask m = half_mask(theta_T);
    const auto ticket = sparse_train(f.model, f.theta_0, m, f.data.train, f.tc);
    const auto reinit = sparse_train(f.model, reinit_params<float>(f.model, 11), m, f.data.train, f.tc);
    CHECK(sparsity(mask_from_support(ticket, m.exempt_names)) == sparsity(m));
    CHECK(sparsity(mask_from_support(reinit, m.exempt_names)) == sparsity(m));
    CHECK(ticket.provenance == Provenance{ProvenanceKind::sparse_trained, f.tc.epochs, true});

    // Identical starts give identical results whatever the regime label.
    CHECK(sparse_train(f.model, reinit_params<float>(f.model, 11), m, f.data.train, f.tc) == reinit);
}

TEST_CASE("rewinding to epoch zero is the ticket regime") {
    Fixture f;
    auto k0 = f.tc;
    k0.rewind_epoch = 0;
    const auto r = pretrain(f.model, f.theta_0, f.data.train, k0);
    const Mask m = half_mask(r.theta_T);
    CHECK(sparse_train(f.model, r.snapshots.at(0), m, f.data.train, f.tc)
              .same_values(sparse_train(f.model, f.theta_0, m, f.data.train, f.tc)));
}

TEST_CASE("pruning and fine-tuning") {
    Fixture f;
    const auto theta_T = pretrain(f.model, f.theta_0, f.data.train, f.tc).theta_T;
    const Mask m = half_mask(theta_T);
    auto zero = f.tc;
    zero.epochs = 0;
    CHECK(prune_and_finetune(f.model, theta_T, m, f.data.train, zero).same_values(apply_mask(theta_T, m)));

    const auto ft = prune_and_finetune(f.model, theta_T, m, f.data.train, f.tc);
    CHECK(sparsity(mask_from_support(ft, m.exempt_names)) == sparsity(m));
    CHECK(ft.provenance.kind == ProvenanceKind::finetuned);

    const Mask ones = all_ones_mask(theta_T);
    CHECK(prune_and_finetune(f.model, theta_T, ones, f.data.train, f.tc)
              .same_values(train(f.model, theta_T, f.data.train, f.tc)));
    CHECK_THROWS_AS(prune_and_finetune(f.model, f.theta_0, m, f.data.train, f.tc), ConfigError);
}

TEST_CASE("winning property verdicts") {
    const auto low = evaluate_winning_property(0.8962, 0.9004, 0.88);
    CHECK(low.aspect1);
    CHECK(low.aspect2);
    CHECK(low.holds());
    const auto high = evaluate_winning_property(0.917, 0.905, 0.904);
    CHECK_FALSE(high.aspect2);
    CHECK_FALSE(high.holds());
    const auto tie = evaluate_winning_property(0.9, 0.9, 0.9);
    CHECK(tie.aspect1);
    CHECK_FALSE(tie.aspect2);
}

TEST_CASE("suite collapses to dense training at sparsity zero") {
    Fixture f;
    SuiteConfig s;
    s.train = f.tc;
    s.sparsities = {0.0};
    s.seeds = {1};
    s.regimes = {Regime::ticket, Regime::finetune};
    const auto result = run_regime_suite(f.model, f.data, s);
    const auto& rows = result.report.rows;
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].regime == Regime::pretrain);
    CHECK(rows[1].accuracy == rows[0].accuracy);
    CHECK(rows[2].accuracy.has_value());
}

TEST_CASE("suite rows, aggregates and scheduling independence") {
    Fixture f;
    SuiteConfig s;
    s.train = f.tc;
    s.algorithms = {PruneAlgorithm::one_shot, PruneAlgorithm::iterative};
    s.prune.rounds = 2;
    s.sparsities = {0.5};
    s.seeds = {1, 2, 3, 4, 5};
    const auto serial = run_regime_suite(f.model, f.data, s);
    // Per seed: pretrain plus 2 algorithms x 4 regimes.
    CHECK(serial.report.rows.size() == 5 * (1 + 2 * 4));
    CHECK_FALSE(serial.report.any_failed());
    const auto* ticket = serial.report.find("one_shot", Regime::ticket, 0.5);
    REQUIRE(ticket != nullptr);
    CHECK(ticket->values.size() == 5);
    CHECK(ticket->verdict.has_value());
    double mean = 0.0;
    for (double v : ticket->values) mean += v / 5.0;
    CHECK(ticket->mean == doctest::Approx(mean));
    CHECK(ticket->std > 0.0);

    s.workers = 3;
    const auto parallel = run_regime_suite(f.model, f.data, s);
    REQUIRE(parallel.report.rows.size() == serial.report.rows.size());
    for (std::size_t i = 0; i < serial.report.rows.size(); ++i) {
        CHECK(parallel.report.rows[i].accuracy == serial.report.rows[i].accuracy);
        CHECK(parallel.report.rows[i].r_theta0 == serial.report.rows[i].r_theta0);
    }
}

TEST_CASE("a failing cell is recorded and the rest still run") {
    Fixture f;
    SuiteConfig s;
    s.train = f.tc;
    s.train.lr0 = 1e30;
    s.seeds = {1};
    s.finetune_epochs = 1;
    s.regimes = {Regime::finetune};
    const auto result = run_regime_suite(f.model, f.data, s);
    CHECK(result.report.any_failed());
    CHECK_FALSE(result.report.rows.empty());
    for (const auto& row : result.report.rows) {
        if (!row.error.empty()) CHECK_FALSE(row.accuracy.has_value());
    }
}

TEST_CASE("sample standard deviation and verdicts on seed means") {
    std::vector<ReportRow> rows;
    auto add = [&](std::uint64_t seed, Regime regime, double acc) {
        ReportRow r;
        r.seed = seed;
        r.lr0 = 0.1;
        r.algorithm = regime == Regime::pretrain ? "none" : "one_shot";
        r.regime = regime;
        r.sparsity = regime == Regime::pretrain ? 0.0 : 0.5;
        r.accuracy = acc;
        rows.push_back(r);
    };
    add(1, Regime::pretrain, 0.90);
    add(2, Regime::pretrain, 0.92);
    add(1, Regime::ticket, 0.91);
    add(2, Regime::ticket, 0.93);
    add(1, Regime::reinit, 0.80);
    add(2, Regime::reinit, 0.84);
    const auto agg = aggregate_rows(rows, 0.005, 0.005);
    const AggregateRow* ticket = nullptr;
    for (const auto& a : agg) {
        if (a.regime == Regime::ticket) ticket = &a;
    }
    REQUIRE(ticket != nullptr);
    CHECK(ticket->mean == doctest::Approx(0.92));
    CHECK(ticket->std == doctest::Approx(std::sqrt(0.0002)));
    REQUIRE(ticket->verdict.has_value());
    CHECK(ticket->verdict->holds());
}
