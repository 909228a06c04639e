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

#include "tklab/model.hpp"

#include <cmath>
#include <sstream>

#include "tklab/digest.hpp"

namespace tklab {

std::string shape_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

std::string layer_kind(const Layer& layer) {
    struct Visitor {
        std::string operator()(const DenseLayer&) const { return "dense"; }
        std::string operator()(const Conv2DLayer&) const { return "conv2d"; }
        std::string operator()(const ReluLayer&) const { return "relu"; }
        std::string operator()(const FlattenLayer&) const { return "flatten"; }
    };
    return std::visit(Visitor{}, layer);
}

namespace {

Shape output_shape(const Layer& layer, const Shape& in, std::size_t index) {
    const auto fail = [&](const std::string& why) {
        throw ConfigError("layer " + std::to_string(index) + " (" + layer_kind(layer) + "): " + why +
                          ", input shape " + shape_string(in));
    };
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (d->in == 0 || d->out == 0) fail("dense sizes must be positive");
        if (in.size() != 1 || in[0] != d->in) fail("expects input (" + std::to_string(d->in) + ")");
        return {d->out};
    }
    if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
        if (c->in_channels == 0 || c->out_channels == 0 || c->kernel_size == 0 || c->stride == 0) {
            fail("conv2d sizes must be positive");
        }
        if (in.size() != 3 || in[0] != c->in_channels) fail("expects (channels, height, width) input");
        if (in[1] < c->kernel_size || in[2] < c->kernel_size) fail("kernel larger than input");
        return {c->out_channels, (in[1] - c->kernel_size) / c->stride + 1,
                (in[2] - c->kernel_size) / c->stride + 1};
    }
    if (std::holds_alternative<ReluLayer>(layer)) return in;
    return {shape_size(in)};
}

bool has_weights(const Layer& layer) {
    return std::holds_alternative<DenseLayer>(layer) || std::holds_alternative<Conv2DLayer>(layer);
}

}  // namespace

std::vector<Shape> layer_output_shapes(const ModelSpec& model) {
    if (model.input_shape.empty() || shape_size(model.input_shape) == 0) {
        throw ConfigError("model input shape must be non-empty with positive dimensions");
    }
    if (model.class_count < 2) throw ConfigError("model needs at least two classes");
    std::vector<Shape> shapes;
    Shape current = model.input_shape;
    bool weighted = false;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        current = output_shape(model.layers[i], current, i);
        weighted = weighted || has_weights(model.layers[i]);
        shapes.push_back(current);
    }
    if (!weighted) throw ConfigError("model has no weight-bearing layer");
    if (current != Shape{model.class_count}) {
        throw ConfigError("model output shape " + shape_string(current) + " does not match class count " +
                          std::to_string(model.class_count));
    }
    return shapes;
}

void validate(const ModelSpec& model) { (void)layer_output_shapes(model); }

std::uint64_t model_digest(const ModelSpec& model) {
    std::ostringstream os;
    os << "in" << shape_string(model.input_shape) << ";classes=" << model.class_count;
    for (const Layer& layer : model.layers) {
        os << ";" << layer_kind(layer);
        if (const auto* d = std::get_if<DenseLayer>(&layer)) os << "(" << d->in << "," << d->out << ")";
        if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
            os << "(" << c->in_channels << "," << c->out_channels << "," << c->kernel_size << "," << c->stride << ")";
        }
    }
    return fnv1a64(os.str());
}

ModelSpec make_mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t classes) {
    ModelSpec model;
    model.input_shape = {inputs};
    model.class_count = classes;
    std::size_t width = inputs;
    for (const std::size_t h : hidden) {
        model.layers.emplace_back(DenseLayer{width, h});
        model.layers.emplace_back(ReluLayer{});
        width = h;
    }
    model.layers.emplace_back(DenseLayer{width, classes});
    return model;
}

std::string Provenance::to_string() const {
    std::string out;
    switch (kind) {
        case ProvenanceKind::init: out = "init"; break;
        case ProvenanceKind::reinit: out = "reinit"; break;
        case ProvenanceKind::rewind: out = "rewind(" + std::to_string(epoch) + ")"; break;
        case ProvenanceKind::pretrained: out = "pretrained(" + std::to_string(epoch) + ")"; break;
        case ProvenanceKind::sparse_trained: out = "sparse_trained"; break;
        case ProvenanceKind::finetuned: out = "finetuned"; break;
    }
    return masked ? out + "*mask" : out;
}

Provenance Provenance::parse(const std::string& text) {
    Provenance p;
    std::string body = text;
    const std::string suffix = "*mask";
    if (body.size() > suffix.size() && body.compare(body.size() - suffix.size(), suffix.size(), suffix) == 0) {
        p.masked = true;
        body.resize(body.size() - suffix.size());
    }
    const auto with_epoch = [&](const std::string& head, ProvenanceKind kind) {
        if (body.rfind(head + "(", 0) != 0 || body.back() != ')') return false;
        p.kind = kind;
        p.epoch = std::stol(body.substr(head.size() + 1, body.size() - head.size() - 2));
        return true;
    };
    if (body == "init") p.kind = ProvenanceKind::init;
    else if (body == "reinit") p.kind = ProvenanceKind::reinit;
    else if (body == "sparse_trained") p.kind = ProvenanceKind::sparse_trained;
    else if (body == "finetuned") p.kind = ProvenanceKind::finetuned;
    else if (!with_epoch("rewind", ProvenanceKind::rewind) && !with_epoch("pretrained", ProvenanceKind::pretrained)) {
        throw ConfigError("unknown provenance tag '" + text + "'");
    }
    return p;
}

template <typename T>
const ParamEntry<T>* ParamSet<T>::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

std::vector<ParamLayout> param_layout(const ModelSpec& model) {
    validate(model);
    std::vector<ParamLayout> layout;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const std::string prefix = layer_kind(model.layers[i]) + std::to_string(i);
        if (const auto* d = std::get_if<DenseLayer>(&model.layers[i])) {
            layout.push_back({prefix + ".weight", {d->out, d->in}, true, d->in});
            layout.push_back({prefix + ".bias", {d->out}, false, d->in});
        } else if (const auto* c = std::get_if<Conv2DLayer>(&model.layers[i])) {
            const std::size_t fan_in = c->in_channels * c->kernel_size * c->kernel_size;
            layout.push_back({prefix + ".weight", {c->out_channels, c->in_channels, c->kernel_size, c->kernel_size},
                              true, fan_in});
            layout.push_back({prefix + ".bias", {c->out_channels}, false, fan_in});
        }
    }
    return layout;
}

template <typename T>
ParamSet<T> zero_params(const ModelSpec& model) {
    ParamSet<T> params;
    for (auto& slot : param_layout(model)) {
        params.entries.push_back({slot.name, Tensor<T>(slot.shape), slot.prunable});
    }
    return params;
}

template <typename T>
ParamSet<T> init_params(const ModelSpec& model, std::uint64_t seed, Stream stream) {
    ParamSet<T> params;
    const auto layout = param_layout(model);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        Tensor<T> tensor(layout[i].shape);
        if (layout[i].prunable) {
            const double bound = std::sqrt(6.0 / static_cast<double>(layout[i].fan_in));
            CounterRng rng(seed, stream, i);
            for (T& v : tensor.values()) v = static_cast<T>(rng.uniform(-bound, bound));
        }
        params.entries.push_back({layout[i].name, std::move(tensor), layout[i].prunable});
    }
    params.provenance = {stream == Stream::reinit ? ProvenanceKind::reinit : ProvenanceKind::init, 0, false};
    return params;
}

template <typename T>
ParamSet<T> reinit_params(const ModelSpec& model, std::uint64_t seed) {
    return init_params<T>(model, reinit_seed(seed), Stream::reinit);
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template ParamSet<float> zero_params<float>(const ModelSpec&);
template ParamSet<double> zero_params<double>(const ModelSpec&);
template ParamSet<float> init_params<float>(const ModelSpec&, std::uint64_t, Stream);
template ParamSet<double> init_params<double>(const ModelSpec&, std::uint64_t, Stream);
template ParamSet<float> reinit_params<float>(const ModelSpec&, std::uint64_t);
template ParamSet<double> reinit_params<double>(const ModelSpec&, std::uint64_t);

}  // namespace tklab
