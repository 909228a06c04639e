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

#include "tklab/mask.hpp"

#include <algorithm>
#include <sstream>

namespace tklab {

std::size_t MaskEntry::kept() const noexcept {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

const MaskEntry* Mask::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

template <typename T>
std::set<std::string> exempt_set(const ParamSet<T>& params, bool exempt_first) {
    if (!exempt_first) return {};
    for (const auto& e : params.entries) {
        if (e.prunable) return {e.name};
    }
    return {};
}

template <typename T>
Mask all_ones_mask(const ParamSet<T>& params, std::set<std::string> exempt_names) {
    Mask mask;
    for (const auto& e : params.entries) {
        if (!e.prunable) continue;
        mask.entries.push_back({e.name, e.tensor.shape(), std::vector<std::uint8_t>(e.tensor.size(), 1)});
    }
    mask.exempt_names = std::move(exempt_names);
    return mask;
}

template <typename T>
void require_congruent(const ParamSet<T>& params, const Mask& mask) {
    std::size_t next = 0;
    for (const auto& e : params.entries) {
        if (!e.prunable) continue;
        if (next >= mask.entries.size()) throw CongruenceError("mask has no entry for " + e.name);
        const MaskEntry& m = mask.entries[next++];
        if (m.name != e.name || m.shape != e.tensor.shape() || m.bits.size() != e.tensor.size()) {
            throw CongruenceError("mask entry " + m.name + shape_string(m.shape) + " does not match parameter " +
                                  e.name + shape_string(e.tensor.shape()));
        }
    }
    if (next != mask.entries.size()) throw CongruenceError("mask has entries for unknown parameters");
}

template <typename T>
void zero_masked(std::span<T> values, const MaskEntry& entry) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!entry.bits[i]) values[i] = T{0};
    }
}

template <typename T>
ParamSet<T> apply_mask(ParamSet<T> params, const Mask& mask) {
    require_congruent(params, mask);
    std::size_t next = 0;
    for (auto& e : params.entries) {
        if (!e.prunable) continue;
        zero_masked(e.tensor.values(), mask.entries[next++]);
    }
    params.provenance.masked = true;
    return params;
}

double sparsity(const Mask& mask) {
    std::size_t total = 0;
    std::size_t kept = 0;
    for (const auto& e : mask.entries) {
        total += e.size();
        kept += e.kept();
    }
    if (total == 0) return 0.0;
    return 1.0 - static_cast<double>(kept) / static_cast<double>(total);
}

std::vector<LayerSparsity> per_layer_sparsity(const Mask& mask) {
    std::vector<LayerSparsity> out;
    for (const auto& e : mask.entries) {
        const std::size_t zeros = e.size() - e.kept();
        out.push_back({e.name, e.size(), zeros,
                       e.size() ? static_cast<double>(zeros) / static_cast<double>(e.size()) : 0.0});
    }
    return out;
}

template <typename T>
Mask mask_from_support(const ParamSet<T>& params, const std::set<std::string>& exempt_names) {
    Mask mask;
    mask.exempt_names = exempt_names;
    for (const auto& e : params.entries) {
        if (!e.prunable) continue;
        MaskEntry m{e.name, e.tensor.shape(), std::vector<std::uint8_t>(e.tensor.size(), 1)};
        if (!exempt_names.contains(e.name)) {
            for (std::size_t i = 0; i < e.tensor.size(); ++i) m.bits[i] = e.tensor[i] != T{0} ? 1 : 0;
        }
        mask.entries.push_back(std::move(m));
    }
    return mask;
}

std::string MaskViolation::to_string() const {
    std::ostringstream os;
    os << name << "[" << index << "] = " << value << " outside mask support";
    return os.str();
}

template <typename T>
std::optional<MaskViolation> assert_mask_invariant(const ParamSet<T>& params, const Mask& mask) {
    for (const auto& e : params.entries) {
        if (!e.prunable) continue;
        const MaskEntry* m = mask.find(e.name);
        if (m == nullptr) continue;
        if (m->bits.size() != e.tensor.size()) {
            throw CongruenceError("mask entry " + m->name + " does not match parameter size");
        }
        for (std::size_t i = 0; i < e.tensor.size(); ++i) {
            if (!m->bits[i] && e.tensor[i] != T{0}) {
                return MaskViolation{e.name, i, static_cast<double>(e.tensor[i])};
            }
        }
    }
    return std::nullopt;
}

#define TKLAB_INSTANTIATE(T)                                                                            \
    template std::set<std::string> exempt_set<T>(const ParamSet<T>&, bool);                            \
    template Mask all_ones_mask<T>(const ParamSet<T>&, std::set<std::string>);                         \
    template void require_congruent<T>(const ParamSet<T>&, const Mask&);                               \
    template void zero_masked<T>(std::span<T>, const MaskEntry&);                                      \
    template ParamSet<T> apply_mask<T>(ParamSet<T>, const Mask&);                                      \
    template Mask mask_from_support<T>(const ParamSet<T>&, const std::set<std::string>&);              \
    template std::optional<MaskViolation> assert_mask_invariant<T>(const ParamSet<T>&, const Mask&);
TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)
#undef TKLAB_INSTANTIATE

}  // namespace tklab
