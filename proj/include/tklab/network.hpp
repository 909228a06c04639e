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
#include <span>

#include "tklab/model.hpp"

namespace tklab {

/// Logits of shape (batch, class_count). The batch tensor has shape
/// (batch, input_shape...).
template <typename T>
Tensor<T> forward(const ModelSpec& model, const ParamSet<T>& params, const Tensor<T>& batch);

template <typename T>
struct LossAndGrads {
    double loss = 0.0;
    ParamSet<T> grads;       // congruent with params
    Tensor<T> input_grads;   // d loss / d batch, only when requested
};

/// Mean softmax cross-entropy and its reverse-mode gradients. The epoch and
/// batch indices only label a NumericError if the loss is not finite.
template <typename T>
LossAndGrads<T> loss_and_grads(const ModelSpec& model, const ParamSet<T>& params, const Tensor<T>& batch,
                               std::span<const std::int32_t> labels, bool want_input_grads = false,
                               long epoch = -1, long batch_index = -1);

/// Mean softmax cross-entropy of logits (rows = samples). Writes d loss / d
/// logits into `dlogits` when it is non-null.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels, Tensor<T>* dlogits);

/// Index of the largest logit in each row; ties go to the smaller index.
template <typename T>
std::vector<std::int32_t> argmax_rows(const Tensor<T>& logits);

}  // namespace tklab
