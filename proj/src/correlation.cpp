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

#include "tklab/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "tklab/rng.hpp"

namespace tklab {

std::size_t top_p_count(std::size_t domain, double p) {
    const auto rounded = static_cast<std::size_t>(std::floor(p * static_cast<double>(domain) + 0.5 + 1e-9));
    return std::min(domain, std::max<std::size_t>(1, rounded));
}

template <typename T>
TopPIndexSet top_p_indices(std::span<const T> values, double p, const std::vector<std::size_t>* support,
                           std::optional<std::size_t> count) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
    std::vector<std::size_t> domain;
    if (support) {
        if (support->empty()) throw ConfigError("top_p_indices: empty support");
        domain = *support;
    } else {
        domain.resize(values.size());
        std::iota(domain.begin(), domain.end(), std::size_t{0});
    }
    const std::size_t k = count.value_or(top_p_count(domain.size(), p));
    if (k < 1 || k > domain.size()) {
        throw DomainError("top-p set of " + std::to_string(k) + " indices requested from a domain of " +
                          std::to_string(domain.size()));
    }
    std::vector<std::pair<T, std::size_t>> keyed(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) keyed[i] = {std::abs(values[domain[i]]), domain[i]};
    auto larger = [](const std::pair<T, std::size_t>& a, const std::pair<T, std::size_t>& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    };
    if (k < keyed.size()) {
        std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end(), larger);
    }
    std::vector<std::uint8_t> chosen(values.size(), 0);
    for (std::size_t i = 0; i < k; ++i) chosen[keyed[i].second] = 1;
    domain.clear();
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        if (chosen[i]) domain.push_back(i);
    }
    TopPIndexSet out;
    out.domain_size = support ? support->size() : values.size();
    out.p = p;
    out.indices = std::move(domain);
    return out;
}

std::string to_string(Scenario scenario) {
    switch (scenario) {
        case Scenario::dense_dense: return "dense_dense";
        case Scenario::sparse_sparse: return "sparse_sparse";
        case Scenario::sparse_dense: return "sparse_dense";
    }
    return "unknown";
}

namespace {

std::size_t intersection_size(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::size_t i = 0, j = 0, n = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

std::vector<std::size_t> kept_indices(const MaskEntry& entry) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entry.bits.size(); ++i) {
        if (entry.bits[i]) out.push_back(i);
    }
    return out;
}

void finish(CorrelationPoint& point) {
    std::size_t inter = 0, total = 0;
    for (const auto& l : point.layers) {
        inter += l.intersection;
        total += l.set_size;
    }
    point.r = total == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(total);
}

template <typename T>
void require_support(const ParamSet<T>& params, const Mask& mask, const char* side) {
    if (auto violation = assert_mask_invariant(params, mask)) {
        throw ConsistencyError(std::string(side) + " weights leave the mask support: " + violation->to_string());
    }
}

}  // namespace

template <typename T>
CorrelationPoint correlation_point(const ParamSet<T>& a, const ParamSet<T>& b, double p, const Mask* supports) {
    require_congruent(a, b);
    if (supports) require_congruent(a, *supports);
    CorrelationPoint point;
    point.p = p;
    std::size_t l = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].prunable) continue;
        std::vector<std::size_t> domain;
        if (supports) {
            domain = kept_indices(supports->entries[l]);
            if (domain.empty()) {
                ++l;
                continue;
            }
        }
        const auto* dom = supports ? &domain : nullptr;
        const auto sa = top_p_indices<T>(a[i].tensor.values(), p, dom);
        const auto sb = top_p_indices<T>(b[i].tensor.values(), p, dom);
        point.layers.push_back({a[i].name, sa.domain_size, sb.domain_size, sa.indices.size(),
                                intersection_size(sa.indices, sb.indices)});
        ++l;
    }
    finish(point);
    return point;
}

template <typename T>
CorrelationPoint correlation_sparse_sparse(const ParamSet<T>& a, const ParamSet<T>& b, const Mask& mask, double p) {
    require_congruent(a, mask);
    require_support(a, mask, "first");
    require_support(b, mask, "second");
    return correlation_point(a, b, p, &mask);
}

template <typename T>
CorrelationPoint correlation_sparse_dense(const ParamSet<T>& sparse, const Mask& mask, const ParamSet<T>& dense,
                                          double p) {
    require_congruent(sparse, dense);
    require_congruent(sparse, mask);
    require_support(sparse, mask, "sparse");
    double worst = 0.0;
    for (const auto& layer : per_layer_sparsity(mask)) worst = std::max(worst, layer.sparsity);
    if (!(p < 1.0 - worst)) {
        throw DomainError("sparse-dense correlation needs p < 1 - sparsity (p = " + std::to_string(p) +
                          ", sparsity = " + std::to_string(worst) + ")");
    }
    CorrelationPoint point;
    point.p = p;
    std::size_t l = 0;
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        if (!sparse[i].prunable) continue;
        const auto domain = kept_indices(mask.entries[l++]);
        const std::size_t k = top_p_count(sparse[i].tensor.size(), p);
        const auto ss = top_p_indices<T>(sparse[i].tensor.values(), p, &domain, k);
        const auto sd = top_p_indices<T>(dense[i].tensor.values(), p, nullptr, k);
        point.layers.push_back({sparse[i].name, ss.domain_size, sd.domain_size, k,
                                intersection_size(ss.indices, sd.indices)});
    }
    finish(point);
    return point;
}

std::pair<double, double> null_band(double p, std::span<const std::size_t> layer_sizes, std::size_t trials,
                                    std::uint64_t seed) {
    if (trials < 1) throw ConfigError("null_band needs at least one trial");
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
    // The top-p set of i.i.d. continuous weights is a uniform k-subset, so
    // the overlap of two independent sets is hypergeometric: draw k items
    // without replacement from N of which k are marked.
    std::vector<double> values(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        CounterRng rng(seed, Stream::null_model, t);
        std::size_t inter = 0, total = 0;
        for (const std::size_t n : layer_sizes) {
            if (n == 0) continue;
            const std::size_t k = top_p_count(n, p);
            std::size_t marked = k, remaining = n;
            for (std::size_t d = 0; d < k; ++d) {
                if (rng.below(remaining) < marked) {
                    ++inter;
                    --marked;
                }
                --remaining;
            }
            total += k;
        }
        values[t] = total == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(total);
    }
    std::sort(values.begin(), values.end());
    const double last = static_cast<double>(trials - 1);
    const auto lo = static_cast<std::size_t>(std::floor(0.005 * last));
    const auto hi = static_cast<std::size_t>(std::ceil(0.995 * last));
    return {values[lo], values[hi]};
}

template <typename T>
CorrelationReport correlate_dense(const ParamSet<T>& a, const ParamSet<T>& b, const std::vector<double>& p_grid,
                                  std::size_t null_trials, std::uint64_t null_seed) {
    CorrelationReport report;
    report.scenario = Scenario::dense_dense;
    std::vector<std::size_t> sizes;
    for (const auto& e : a.entries) {
        if (e.prunable) sizes.push_back(e.tensor.size());
    }
    for (const double p : p_grid) {
        report.points.push_back(correlation_point(a, b, p));
        if (null_trials > 0) report.null_bands.push_back(null_band(p, sizes, null_trials, null_seed));
    }
    return report;
}

std::string CorrelationReport::to_json() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& point = points[i];
        nlohmann::ordered_json row;
        row["scenario"] = to_string(scenario);
        row["p"] = point.p;
        row["r_p"] = point.r;
        row["null_expectation"] = point.p;
        if (i < null_bands.size()) row["null_band"] = {null_bands[i].first, null_bands[i].second};
        nlohmann::ordered_json layers = nlohmann::ordered_json::array();
        for (const auto& l : point.layers) {
            layers.push_back({{"name", l.name},
                              {"domain_a", l.domain_a},
                              {"domain_b", l.domain_b},
                              {"set_size", l.set_size},
                              {"intersection", l.intersection}});
        }
        row["layers"] = std::move(layers);
        rows.push_back(std::move(row));
    }
    return rows.dump(2);
}

#define TKLAB_INSTANTIATE(T)                                                                                         \
    template TopPIndexSet top_p_indices<T>(std::span<const T>, double, const std::vector<std::size_t>*,             \
                                           std::optional<std::size_t>);                                            \
    template CorrelationPoint correlation_point<T>(const ParamSet<T>&, const ParamSet<T>&, double, const Mask*);    \
    template CorrelationPoint correlation_sparse_sparse<T>(const ParamSet<T>&, const ParamSet<T>&, const Mask&,     \
                                                           double);                                                 \
    template CorrelationPoint correlation_sparse_dense<T>(const ParamSet<T>&, const Mask&, const ParamSet<T>&,      \
                                                          double);                                                  \
    template CorrelationReport correlate_dense<T>(const ParamSet<T>&, const ParamSet<T>&, const std::vector<double>&, \
                                                  std::size_t, std::uint64_t);

TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)

}  // namespace tklab
