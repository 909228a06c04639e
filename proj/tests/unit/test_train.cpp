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
#include "tklab/train.hpp"

#include <cmath>

using namespace tklab;

namespace {

ParamSet<double> two_entries() {
    ParamSet<double> p;
    p.entries.push_back({"a.weight", Tensor<double>({3}, {1.0, -2.0, 0.5}), true});
    p.entries.push_back({"a.bias", Tensor<double>({2}, {0.25, -0.75}), false});
    return p;
}

ParamSet<double> grads_of(const ParamSet<double>& p, double g) {
    auto out = p;
    for (auto& e : out.entries) e.tensor.fill(g);
    return out;
}

}  // namespace

TEST_CASE("zero learning rate updates velocity only") {
    auto p = two_entries();
    auto g = grads_of(p, 0.5);
    auto v = VelocityState<double>::zeros_like(p);
    const auto before = p;
    sgd_step(p, g, v, 0.0, 0.9);
    CHECK(p == before);
    for (const auto& b : v.buffers) {
        for (double x : b.values()) CHECK(x == 0.5);
    }
}

TEST_CASE("plain SGD is w - lr * g exactly") {
    auto p = two_entries();
    auto g = grads_of(p, 0.125);
    auto v = VelocityState<double>::zeros_like(p);
    const auto before = p;
    sgd_step(p, g, v, 0.1, 0.0);
    for (std::size_t e = 0; e < p.size(); ++e) {
        for (std::size_t k = 0; k < p[e].tensor.size(); ++k) CHECK(p[e].tensor[k] == before[e].tensor[k] - 0.1 * 0.125);
    }
}

TEST_CASE("momentum accumulates") {
    auto p = two_entries();
    auto v = VelocityState<double>::zeros_like(p);
    auto g = grads_of(p, 1.0);
    sgd_step(p, g, v, 0.1, 0.9);
    g = grads_of(p, 1.0);
    sgd_step(p, g, v, 0.1, 0.9);
    CHECK(v.buffers[0][0] == doctest::Approx(1.9));
    CHECK(p[0].tensor[0] == doctest::Approx(1.0 - 0.1 - 0.19));
}

TEST_CASE("a zero mask is an absorbing state") {
    auto p = two_entries();
    Mask mask = all_ones_mask(p);
    std::fill(mask.entries[0].bits.begin(), mask.entries[0].bits.end(), 0);
    auto v = VelocityState<double>::zeros_like(p);
    for (int step = 0; step < 100; ++step) {
        auto g = grads_of(p, 0.3 + step);
        sgd_step(p, g, v, 0.1, 0.9, &mask);
        for (double w : p[0].tensor.values()) REQUIRE(w == 0.0);
        for (double x : v.buffers[0].values()) REQUIRE(x == 0.0);
    }
    CHECK(p[1].tensor[0] != 0.25);
}

TEST_CASE("step schedule") {
    TrainConfig c;
    c.lr0 = 0.1;
    c.milestones = {80, 120};
    c.decay_factor = 0.1;
    CHECK(lr_at(0, c) == doctest::Approx(0.1));
    CHECK(lr_at(79, c) == doctest::Approx(0.1));
    CHECK(lr_at(80, c) == doctest::Approx(0.01));
    CHECK(lr_at(149, c) == doctest::Approx(0.001));
    double last = lr_at(0, c);
    for (long e = 1; e < 150; ++e) {
        CHECK(lr_at(e, c) <= last);
        last = lr_at(e, c);
    }
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_NOTHROW(c.validate());
    c = {};
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.milestones = {120, 80};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.weight_decay = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.rewind_epoch = 150;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("accuracy counts argmax hits") {
    const ModelSpec m{{2}, 3, {DenseLayer{2, 3}}};
    auto p = zero_params<float>(m);
    p[1].tensor = Tensor<float>({3}, {0.0f, 1.0f, 0.5f});
    Dataset<float> d;
    d.inputs = Tensor<float>({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    d.labels = {1, 1, 1, 1};
    d.class_count = 3;
    CHECK(accuracy(m, p, d) == 1.0);
    d.labels = {0, 1, 2, 1};
    CHECK(accuracy(m, p, d) == 0.5);
    d = d.subset(std::vector<std::size_t>{0});
    CHECK(accuracy(m, p, d) == 0.0);
}

TEST_CASE("random weights score near chance on balanced data") {
    // Labels cycle through the classes independently of the Gaussian inputs,
    // so the hit count is Binomial(1000, 1/c) whatever the network predicts.
    const std::size_t c = 4;
    const auto m = make_mlp(4, {16}, c);
    Dataset<float> d;
    d.inputs = Tensor<float>({1000, 4});
    CounterRng rng(3, Stream::probe);
    for (float& v : d.inputs.values()) v = static_cast<float>(rng.normal());
    for (std::size_t i = 0; i < 1000; ++i) d.labels.push_back(static_cast<std::int32_t>(i % c));
    d.class_count = c;
    const double acc = accuracy(m, init_params<float>(m, 21), d);
    CHECK(std::abs(acc - 0.25) <= 5 * std::sqrt(0.25 * 0.75 / 1000.0));
}

TEST_CASE("training is deterministic and learns") {
    const auto m = make_mlp(2, {16}, 3);
    const auto d = gen_blobs<float>(300, 3, 2, 0.3, 4);
    TrainConfig c;
    c.epochs = 5;
    c.lr0 = 0.05;
    c.milestones = {3};
    c.batch_size = 16;
    c.seed = 2;
    const auto start = init_params<float>(m, 2);
    std::vector<double> losses;
    TrainHooks<float> hooks;
    hooks.epoch_losses = &losses;
    const auto a = train(m, start, d, c, hooks);
    const auto b = train(m, start, d, c);
    CHECK(a.same_values(b));
    REQUIRE(losses.size() == 5);
    CHECK(losses.back() < losses.front());
    CHECK(accuracy(m, a, d) > 0.9);
}

TEST_CASE("zero epochs return the start unchanged") {
    const auto m = make_mlp(2, {4}, 2);
    const auto d = gen_spirals<float>(20, 1.0, 0.0, 1);
    TrainConfig c;
    c.epochs = 0;
    const auto start = init_params<float>(m, 1);
    CHECK(train(m, start, d, c).same_values(start));
}

TEST_CASE("weight decay shrinks weights when the data gradient is zero") {
    const ModelSpec m{{2}, 2, {DenseLayer{2, 2}}};
    Dataset<double> d;
    d.inputs = Tensor<double>({2, 2});
    d.labels = {0, 1};
    d.class_count = 2;
    auto start = init_params<double>(m, 1);
    TrainConfig c;
    c.epochs = 1;
    c.lr0 = 0.1;
    c.milestones = {};
    c.momentum = 0.0;
    c.batch_size = 2;
    c.weight_decay = 0.5;
    const auto out = train(m, start, d, c);
    for (std::size_t k = 0; k < 4; ++k) CHECK(out[0].tensor[k] == doctest::Approx(start[0].tensor[k] * 0.95));
}

TEST_CASE("masked training zeroes pruned positions of an unmasked start") {
    const auto m = make_mlp(2, {4}, 2);
    const auto d = gen_spirals<float>(20, 1.0, 0.0, 1);
    auto start = init_params<float>(m, 1);
    Mask mask = all_ones_mask(start);
    mask.entries[0].bits[0] = 0;
    TrainConfig c;
    c.epochs = 1;
    c.milestones = {};
    c.batch_size = 4;
    TrainHooks<float> hooks;
    hooks.mask = &mask;
    // Masked positions are zeroed by the optimizer, so training from an
    // unmasked start still satisfies the invariant.
    const auto out = train(m, start, d, c, hooks);
    CHECK(out[0].tensor[0] == 0.0f);
    CHECK_FALSE(assert_mask_invariant(out, mask).has_value());
}
