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

#include "tklab/network.hpp"

#include <Eigen/Core>
#include <cmath>

namespace tklab {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void check_batch(const ModelSpec& model, const Tensor<T>& batch) {
    const Shape& s = batch.shape();
    if (s.size() != model.input_shape.size() + 1 || s[0] == 0 ||
        !std::equal(model.input_shape.begin(), model.input_shape.end(), s.begin() + 1)) {
        throw ConfigError("batch shape " + shape_string(s) + " does not match model input " +
                          shape_string(model.input_shape));
    }
}

template <typename T>
void check_params(const ModelSpec& model, const ParamSet<T>& params) {
    const auto layout = param_layout(model);
    if (layout.size() != params.size()) {
        throw CongruenceError("parameter set has " + std::to_string(params.size()) + " entries, model needs " +
                              std::to_string(layout.size()));
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].name != params[i].name || layout[i].shape != params[i].tensor.shape()) {
            throw CongruenceError("parameter " + params[i].name + shape_string(params[i].tensor.shape()) +
                                  " does not match model slot " + layout[i].name + shape_string(layout[i].shape));
        }
    }
}

Shape with_batch(std::size_t batch, const Shape& s) {
    Shape out{batch};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

struct ConvGeometry {
    std::size_t channels, height, width, kernel, stride, out_h, out_w;
    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry geometry(const Conv2DLayer& c, const Shape& in) {
    return {in[0], in[1], in[2], c.kernel_size, c.stride, (in[1] - c.kernel_size) / c.stride + 1,
            (in[2] - c.kernel_size) / c.stride + 1};
}

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const T* src = image + (c * g.height + oy * g.stride + ki) * g.width + kj;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) row[oy * g.out_w + ox] = src[ox * g.stride];
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const T* row = cols + ((c * g.kernel + ki) * g.kernel + kj) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    T* dst = image + (c * g.height + oy * g.stride + ki) * g.width + kj;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) dst[ox * g.stride] += row[oy * g.out_w + ox];
                }
            }
        }
    }
}

/// Runs the layers, keeping every layer input for the backward pass.
template <typename T>
struct Tape {
    std::vector<Shape> in_shapes;          // per layer, without batch axis
    std::vector<Tensor<T>> inputs;         // per layer
    std::vector<std::size_t> param_index;  // first ParamSet entry of layer, or npos
    Tensor<T> output;
};

template <typename T>
Tape<T> run_forward(const ModelSpec& model, const ParamSet<T>& params, const Tensor<T>& batch, bool keep) {
    check_batch(model, batch);
    check_params(model, params);
    const std::size_t n = batch.dim(0);
    const auto out_shapes = layer_output_shapes(model);

    Tape<T> tape;
    Tensor<T> current = batch;
    Shape in_shape = model.input_shape;
    std::size_t next_param = 0;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const Layer& layer = model.layers[li];
        Tensor<T> out(with_batch(n, out_shapes[li]));
        std::size_t pidx = static_cast<std::size_t>(-1);

        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            pidx = next_param;
            next_param += 2;
            ConstMatMap<T> x(current.data(), n, d->in);
            ConstMatMap<T> w(params[pidx].tensor.data(), d->out, d->in);
            Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(params[pidx + 1].tensor.data(), d->out);
            MatMap<T> y(out.data(), n, d->out);
            y.noalias() = x * w.transpose();
            y.rowwise() += b;
        } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
            pidx = next_param;
            next_param += 2;
            const ConvGeometry g = geometry(*c, in_shape);
            ConstMatMap<T> w(params[pidx].tensor.data(), c->out_channels, g.patch());
            Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(params[pidx + 1].tensor.data(), c->out_channels);
            std::vector<T> cols(g.patch() * g.positions());
            const std::size_t in_stride = shape_size(in_shape);
            const std::size_t out_stride = c->out_channels * g.positions();
            for (std::size_t s = 0; s < n; ++s) {
                im2col(current.data() + s * in_stride, g, cols.data());
                ConstMatMap<T> col_mat(cols.data(), g.patch(), g.positions());
                MatMap<T> y(out.data() + s * out_stride, c->out_channels, g.positions());
                y.noalias() = w * col_mat;
                y.colwise() += b;
            }
        } else if (std::holds_alternative<ReluLayer>(layer)) {
            for (std::size_t i = 0; i < current.size(); ++i) out[i] = current[i] > T{0} ? current[i] : T{0};
        } else {
            std::copy(current.values().begin(), current.values().end(), out.values().begin());
        }

        if (keep) {
            tape.in_shapes.push_back(in_shape);
            tape.param_index.push_back(pidx);
            tape.inputs.push_back(std::move(current));
        }
        current = std::move(out);
        in_shape = out_shapes[li];
    }
    tape.output = std::move(current);
    return tape;
}

}  // namespace

template <typename T>
Tensor<T> forward(const ModelSpec& model, const ParamSet<T>& params, const Tensor<T>& batch) {
    return run_forward(model, params, batch, false).output;
}

template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels, Tensor<T>* dlogits) {
    const std::size_t n = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != n) throw ConfigError("label count does not match batch size");
    if (dlogits) *dlogits = Tensor<T>(logits.shape());
    double total = 0.0;
    std::vector<double> prob(classes);
    for (std::size_t s = 0; s < n; ++s) {
        const std::int32_t label = labels[s];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw ConfigError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
        }
        const T* row = logits.data() + s * classes;
        double peak = row[0];
        for (std::size_t k = 1; k < classes; ++k) peak = std::max(peak, static_cast<double>(row[k]));
        double z = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            prob[k] = std::exp(static_cast<double>(row[k]) - peak);
            z += prob[k];
        }
        total += std::log(z) + peak - static_cast<double>(row[label]);
        if (dlogits) {
            T* g = dlogits->data() + s * classes;
            for (std::size_t k = 0; k < classes; ++k) {
                const double p = prob[k] / z - (static_cast<std::size_t>(label) == k ? 1.0 : 0.0);
                g[k] = static_cast<T>(p / static_cast<double>(n));
            }
        }
    }
    return total / static_cast<double>(n);
}

template <typename T>
LossAndGrads<T> loss_and_grads(const ModelSpec& model, const ParamSet<T>& params, const Tensor<T>& batch,
                               std::span<const std::int32_t> labels, bool want_input_grads, long epoch,
                               long batch_index) {
    Tape<T> tape = run_forward(model, params, batch, true);
    LossAndGrads<T> result;
    Tensor<T> grad;
    result.loss = softmax_cross_entropy(tape.output, labels, &grad);
    if (!std::isfinite(result.loss)) throw NumericError("non-finite training loss", epoch, batch_index);

    result.grads = params;
    result.grads.provenance = params.provenance;
    for (auto& e : result.grads.entries) e.tensor.fill(T{0});

    const std::size_t n = batch.dim(0);
    for (std::size_t li = model.layers.size(); li-- > 0;) {
        const Layer& layer = model.layers[li];
        const Tensor<T>& input = tape.inputs[li];
        Tensor<T> grad_in(input.shape());
        const bool need_input_grad = li > 0 || want_input_grads;

        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            const std::size_t p = tape.param_index[li];
            ConstMatMap<T> dy(grad.data(), n, d->out);
            ConstMatMap<T> x(input.data(), n, d->in);
            ConstMatMap<T> w(params[p].tensor.data(), d->out, d->in);
            MatMap<T> dw(result.grads[p].tensor.data(), d->out, d->in);
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(result.grads[p + 1].tensor.data(), d->out);
            dw.noalias() = dy.transpose() * x;
            db = dy.colwise().sum();
            if (need_input_grad) {
                MatMap<T> dx(grad_in.data(), n, d->in);
                dx.noalias() = dy * w;
            }
        } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
            const std::size_t p = tape.param_index[li];
            const ConvGeometry g = geometry(*c, tape.in_shapes[li]);
            ConstMatMap<T> w(params[p].tensor.data(), c->out_channels, g.patch());
            MatMap<T> dw(result.grads[p].tensor.data(), c->out_channels, g.patch());
            Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db(result.grads[p + 1].tensor.data(), c->out_channels);
            std::vector<T> cols(g.patch() * g.positions());
            std::vector<T> dcols(g.patch() * g.positions());
            const std::size_t in_stride = shape_size(tape.in_shapes[li]);
            const std::size_t out_stride = c->out_channels * g.positions();
            for (std::size_t s = 0; s < n; ++s) {
                im2col(input.data() + s * in_stride, g, cols.data());
                ConstMatMap<T> col_mat(cols.data(), g.patch(), g.positions());
                ConstMatMap<T> dy(grad.data() + s * out_stride, c->out_channels, g.positions());
                dw.noalias() += dy * col_mat.transpose();
                db += dy.rowwise().sum();
                if (need_input_grad) {
                    MatMap<T> dcol_mat(dcols.data(), g.patch(), g.positions());
                    dcol_mat.noalias() = w.transpose() * dy;
                    col2im_add(dcols.data(), g, grad_in.data() + s * in_stride);
                }
            }
        } else if (std::holds_alternative<ReluLayer>(layer)) {
            for (std::size_t i = 0; i < input.size(); ++i) grad_in[i] = input[i] > T{0} ? grad[i] : T{0};
        } else {
            std::copy(grad.values().begin(), grad.values().end(), grad_in.values().begin());
        }
        grad = std::move(grad_in);
    }
    if (want_input_grads) result.input_grads = std::move(grad);
    return result;
}

template <typename T>
std::vector<std::int32_t> argmax_rows(const Tensor<T>& logits) {
    const std::size_t n = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    std::vector<std::int32_t> out(n);
    for (std::size_t s = 0; s < n; ++s) {
        const T* row = logits.data() + s * classes;
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes; ++k) {
            if (row[k] > row[best]) best = k;
        }
        out[s] = static_cast<std::int32_t>(best);
    }
    return out;
}

#define TKLAB_INSTANTIATE(T)                                                                                  \
    template Tensor<T> forward<T>(const ModelSpec&, const ParamSet<T>&, const Tensor<T>&);                  \
    template LossAndGrads<T> loss_and_grads<T>(const ModelSpec&, const ParamSet<T>&, const Tensor<T>&,       \
                                               std::span<const std::int32_t>, bool, long, long);            \
    template double softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::int32_t>, Tensor<T>*);  \
    template std::vector<std::int32_t> argmax_rows<T>(const Tensor<T>&);
TKLAB_INSTANTIATE(float)
TKLAB_INSTANTIATE(double)
#undef TKLAB_INSTANTIATE

}  // namespace tklab
