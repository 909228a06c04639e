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
#include <vector>

#include "tklab/mask.hpp"
#include "tklab/model.hpp"

namespace tklab {

struct AugmentConfig {
    bool horizontal_flip = false;
    std::size_t crop_padding = 0;  // 0 disables cropping

    bool enabled() const noexcept { return horizontal_flip || crop_padding > 0; }
    bool operator==(const AugmentConfig&) const = default;
};

/// Step-schedule SGD with momentum. Defaults mirror the usual CIFAR
/// protocol: 150 epochs, decay by 10 after epochs 80 and 120, momentum 0.9,
/// batch 128.
struct TrainConfig {
    long epochs = 150;
    double lr0 = 0.1;
    std::vector<long> milestones{80, 120};
    double decay_factor = 0.1;
    double momentum = 0.9;
    /// Coupled L2 penalty: lambda * w is added to every gradient. 0 disables.
    double weight_decay = 0.0;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;
    std::optional<long> rewind_epoch;
    AugmentConfig augment;
    bool log_epochs = false;

    /// Throws ConfigError on an inconsistent configuration. epochs may be 0.
    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// lr0 * decay_factor^(number of milestones <= epoch).
double lr_at(long epoch, const TrainConfig& config);

/// Momentum buffers, one per parameter entry, starting at zero.
template <typename T>
struct VelocityState {
    std::vector<Tensor<T>> buffers;

    static VelocityState zeros_like(const ParamSet<T>& params);
};

/// v <- momentum * v + g;  w <- w - lr * v.  With a mask, gradients,
/// velocity and weights at masked-out positions are held at exactly zero
/// before and after the update.
template <typename T>
void sgd_step(ParamSet<T>& params, ParamSet<T>& grads, VelocityState<T>& velocity, double lr, double momentum,
              const Mask* mask = nullptr);

}  // namespace tklab
