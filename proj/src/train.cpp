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

#include "tklab/train.hpp"

#include <cstdio>
#include <numeric>

namespace tklab {

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, long epoch) {
    return derive_seed(seed, static_cast<std::uint64_t>(epoch));
}

namespace {

template <typename T>
void add_weight_decay(const ParamSet<T>& params, ParamSet<T>& grads, T lambda) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const T* w = params[i].tensor.data();
        T* g = grads[i].tensor.data();
        for (std::size_t k = 0; k < params[i].tensor.size(); ++k) g[k] += lambda * w[k];
    }
}

}  // namespace

template <typename T>
ParamSet<T> train(const ModelSpec& model, ParamSet<T> params, const Dataset<T>& data, const TrainConfig& config,
                  const TrainHooks<T>& hooks) {
    config.validate();
    data.validate();
    if (hooks.mask) params = apply_mask(std::move(params), *hooks.mask);
    const Provenance provenance = params.provenance;
    auto velocity = VelocityState<T>::zeros_like(params);

    for (long epoch = 0; epoch < config.epochs; ++epoch) {
        const long stream_epoch = hooks.epoch_offset + epoch;
        const double lr = hooks.lr_schedule ? hooks.lr_schedule(epoch) : lr_at(epoch, config);
        CounterRng augment_rng(config.seed, Stream::augment, static_cast<std::uint64_t>(stream_epoch));
        const auto order = batches(data.size(), config.batch_size, epoch_shuffle_seed(config.seed, stream_epoch));
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); ++b) {
            Dataset<T> batch = data.subset(order[b]);
            if (config.augment.enabled()) batch.inputs = augment(batch.inputs, config.augment, augment_rng);
            auto result = loss_and_grads(model, params, batch.inputs, batch.labels, false, epoch, static_cast<long>(b));
            if (config.weight_decay > 0.0) add_weight_decay(params, result.grads, static_cast<T>(config.weight_decay));
            if (hooks.adjust_grads) hooks.adjust_grads(params, result.grads);
            sgd_step(params, result.grads, velocity, lr, config.momentum, hooks.mask);
            loss_sum += result.loss * static_cast<double>(batch.size());
        }
        for (const auto& e : params.entries) {
            if (!e.tensor.all_finite()) throw NumericError("non-finite weight in " + e.name, epoch, -1);
        }
        if (hooks.mask) {
            if (auto violation = assert_mask_invariant(params, *hooks.mask)) {
                throw ConsistencyError("mask invariant broken after epoch " + std::to_string(epoch + 1) + ": " +
                                       violation->to_string());
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(data.size());
        if (hooks.epoch_losses) hooks.epoch_losses->push_back(mean_loss);
        if (config.log_epochs) std::fprintf(stderr, "epoch %ld lr %.6g loss %.6f\n", epoch + 1, lr, mean_loss);
        if (hooks.on_epoch_end) hooks.on_epoch_end(epoch + 1, params);
    }
    params.provenance = provenance;
    return params;
}

template <typename T>
double accuracy(const ModelSpec& model, const ParamSet<T>& params, const Dataset<T>& data) {
    data.validate();
    constexpr std::size_t kChunk = 512;
    std::size_t correct = 0;
    std::vector<std::size_t> indices;
    for (std::size_t start = 0; start < data.size(); start += kChunk) {
        const std::size_t end = std::min(data.size(), start + kChunk);
        indices.resize(end - start);
        std::iota(indices.begin(), indices.end(), start);
        const Dataset<T> chunk = data.subset(indices);
        const auto predicted = argmax_rows(forward(model, params, chunk.inputs));
        for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == chunk.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

template ParamSet<float> train<float>(const ModelSpec&, ParamSet<float>, const Dataset<float>&, const TrainConfig&,
                                      const TrainHooks<float>&);
template ParamSet<double> train<double>(const ModelSpec&, ParamSet<double>, const Dataset<double>&,
                                        const TrainConfig&, const TrainHooks<double>&);
template double accuracy<float>(const ModelSpec&, const ParamSet<float>&, const Dataset<float>&);
template double accuracy<double>(const ModelSpec&, const ParamSet<double>&, const Dataset<double>&);

}  // namespace tklab
