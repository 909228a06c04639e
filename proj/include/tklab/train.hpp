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

#include <functional>
#include <vector>

#include "tklab/dataset.hpp"
#include "tklab/mask.hpp"
#include "tklab/network.hpp"
#include "tklab/optim.hpp"

namespace tklab {

template <typename T>
struct TrainHooks {
    /// Held fixed for the whole run; support(params) within support(mask) is
    /// verified at every epoch boundary.
    const Mask* mask = nullptr;
    /// Added to the epoch index when deriving per-epoch shuffle/augment seeds.
    long epoch_offset = 0;
    /// Called after each completed epoch with the count of completed epochs.
    std::function<void(long, const ParamSet<T>&)> on_epoch_end;
    /// Extra gradient terms, applied after backprop and before the step.
    std::function<void(const ParamSet<T>&, ParamSet<T>&)> adjust_grads;
    /// Replaces the step schedule when set.
    std::function<double(long)> lr_schedule;
    /// Mean training loss per epoch, appended when non-null.
    std::vector<double>* epoch_losses = nullptr;
};

/// Seed of the batch order in epoch `epoch` of a run with `seed`.
std::uint64_t epoch_shuffle_seed(std::uint64_t seed, long epoch);

/// Runs config.epochs epochs of minibatch SGD with momentum from `start`.
/// A pure function of its arguments.
template <typename T>
ParamSet<T> train(const ModelSpec& model, ParamSet<T> start, const Dataset<T>& data, const TrainConfig& config,
                  const TrainHooks<T>& hooks = {});

/// Fraction of samples whose argmax logit (ties to the smaller class) equals
/// the label.
template <typename T>
double accuracy(const ModelSpec& model, const ParamSet<T>& params, const Dataset<T>& data);

}  // namespace tklab
