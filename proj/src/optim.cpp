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

#include "tklab/optim.hpp"

#include <algorithm>
#include <cmath>

namespace tklab {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be positive");
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay_factor must lie in (0, 1)");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be non-negative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
        if (milestones[i] < 0) throw ConfigError("milestones must be non-negative");
        if (i > 0 && milestones[i] <= milestones[i - 1]) throw ConfigError("milestones must be strictly increasing");
        if (epochs > 0 && milestones[i] >= epochs) throw ConfigError("milestones must be below epochs");
    }
    if (rewind_epoch && (*rewind_epoch < 0 || (*rewind_epoch >= epochs && epochs > 0))) {
        throw ConfigError("rewind_epoch must lie in [0, epochs)");
    }
}

double lr_at(long epoch, const TrainConfig& config) {
    const auto passed = std::count_if(config.milestones.begin(), config.milestones.end(),
                                      [epoch](long m) { return m <= epoch; });
    return config.lr0 * std::pow(config.decay_factor, static_cast<double>(passed));
}

template <typename T>
VelocityState<T> VelocityState<T>::zeros_like(const ParamSet<T>& params) {
    VelocityState v;
    for (const auto& e : params.entries) v.buffers.emplace_back(e.tensor.shape());
    return v;
}

template <typename T>
void sgd_step(ParamSet<T>& params, ParamSet<T>& grads, VelocityState<T>& velocity, double lr, double momentum,
              const Mask* mask) {
    if (grads.size() != params.size() || velocity.buffers.size() != params.size()) {
        throw CongruenceError("sgd_step: params, grads and velocity differ in entry count");
    }
    const T step = static_cast<T>(lr);
    const T mu = static_cast<T>(momentum);
    std::size_t mask_index = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].tensor;
        auto& g = grads[i].tensor;
        auto& v = velocity.buffers[i];
        if (w.shape() != g.shape() || w.shape() != v.shape()) {
            throw CongruenceError("sgd_step: shape mismatch at " + params[i].name);
        }
        const MaskEntry* m = nullptr;
        if (mask != nullptr && params[i].prunable) {
            if (mask_index >= mask->entries.size() || mask->entries[mask_index].name != params[i].name) {
                throw CongruenceError("sgd_step: mask does not cover " + params[i].name);
            }
            m = &mask->entries[mask_index++];
        }
        if (m) {
            zero_masked(g.values(), *m);
            zero_masked(v.values(), *m);
            zero_masked(w.values(), *m);
        }
        T* wp = w.data();
        T* vp = v.data();
        const T* gp = g.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            vp[k] = mu * vp[k] + gp[k];
            wp[k] -= step * vp[k];
        }
        if (m) {
            zero_masked(v.values(), *m);
            zero_masked(w.values(), *m);
        }
    }
}

template struct VelocityState<float>;
template struct VelocityState<double>;
template void sgd_step<float>(ParamSet<float>&, ParamSet<float>&, VelocityState<float>&, double, double, const Mask*);
template void sgd_step<double>(ParamSet<double>&, ParamSet<double>&, VelocityState<double>&, double, double,
                               const Mask*);

}  // namespace tklab
