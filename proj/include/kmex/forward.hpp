#pragma once

#include "kmex/weights.hpp"

#include <cmath>
#include <vector>

namespace kmex {

/// All activations of one forward pass: entry 0 is the input, entry i+1
/// the output of layers[i].
template <class Scalar>
using ActivationTrace = std::vector<Tensor<Scalar>>;

/// Numerically safe softmax; the reduction runs in double regardless of
/// the storage scalar.
template <class Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
    const double peak = static_cast<double>(logits.maxCoeff());
    Vector<double> e(logits.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(static_cast<double>(logits[i]) - peak);
        total += e[i];
    }
    Vector<Scalar> out(logits.size());
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        out[i] = static_cast<Scalar>(e[i] / total);
    }
    return out;
}

/// Unfold conv input into a matrix of patches: rows index
/// (in_channel, kernel_row, kernel_col), columns index output positions
/// row-major. Out-of-image taps (padding) are zero.
template <class Scalar>
MatrixRX<Scalar> im2col(const Tensor<Scalar>& x, const LayerSpec& conv,
                        const TensorShape& out_shape) {
    const int kh = conv.kernel_h, kw = conv.kernel_w;
    const int oh = out_shape.height, ow = out_shape.width;
    MatrixRX<Scalar> cols = MatrixRX<Scalar>::Zero(
        static_cast<Eigen::Index>(conv.in_channels) * kh * kw,
        static_cast<Eigen::Index>(oh) * ow);
    for (int c = 0; c < conv.in_channels; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kh + i) * kw + j;
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * conv.stride + i - conv.pad;
                    if (sy < 0 || sy >= x.shape.height) continue;
                    for (int px = 0; px < ow; ++px) {
                        const int sx = px * conv.stride + j - conv.pad;
                        if (sx < 0 || sx >= x.shape.width) continue;
                        cols(row, static_cast<Eigen::Index>(y) * ow + px) = x(c, sy, sx);
                    }
                }
            }
        }
    }
    return cols;
}

/// Scatter-add of a patch matrix back onto the input grid (adjoint of
/// im2col); used by conv backward passes.
template <class Scalar>
void col2im_add(const MatrixRX<Scalar>& cols, const LayerSpec& conv,
                const TensorShape& out_shape, Tensor<Scalar>& grad_in) {
    const int kh = conv.kernel_h, kw = conv.kernel_w;
    const int oh = out_shape.height, ow = out_shape.width;
    for (int c = 0; c < conv.in_channels; ++c) {
        for (int i = 0; i < kh; ++i) {
            for (int j = 0; j < kw; ++j) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kh + i) * kw + j;
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * conv.stride + i - conv.pad;
                    if (sy < 0 || sy >= grad_in.shape.height) continue;
                    for (int px = 0; px < ow; ++px) {
                        const int sx = px * conv.stride + j - conv.pad;
                        if (sx < 0 || sx >= grad_in.shape.width) continue;
                        grad_in(c, sy, sx) += cols(row, static_cast<Eigen::Index>(y) * ow + px);
                    }
                }
            }
        }
    }
}

/// Argmax input index (lowest flat index on ties) of each 2x2 pool window.
template <class Scalar>
std::vector<Eigen::Index> maxpool2_argmax(const Tensor<Scalar>& x,
                                          const TensorShape& out_shape) {
    std::vector<Eigen::Index> winners(out_shape.size());
    Eigen::Index at = 0;
    for (int c = 0; c < out_shape.channels; ++c) {
        for (int y = 0; y < out_shape.height; ++y) {
            for (int px = 0; px < out_shape.width; ++px) {
                Eigen::Index best = -1;
                Scalar best_value{};
                for (int dy = 0; dy < 2; ++dy) {
                    for (int dx = 0; dx < 2; ++dx) {
                        const Eigen::Index flat =
                            (static_cast<Eigen::Index>(c) * x.shape.height + 2 * y + dy) *
                                x.shape.width +
                            2 * px + dx;
                        const Scalar v = x.data[flat];
                        if (best < 0 || v > best_value) {
                            best = flat;
                            best_value = v;
                        }
                    }
                }
                winners[at++] = best;
            }
        }
    }
    return winners;
}

template <class Scalar>
Tensor<Scalar> apply_layer(const LayerSpec& layer, const LayerParams<Scalar>* params,
                           const Tensor<Scalar>& x, const TensorShape& out_shape) {
    Tensor<Scalar> out(out_shape);
    switch (layer.kind) {
        case LayerKind::dense:
            out.data = params->weight * x.data + params->bias;
            break;
        case LayerKind::conv2d: {
            const MatrixRX<Scalar> cols = im2col(x, layer, out_shape);
            MatrixRX<Scalar> y = params->weight * cols;  // [out_ch, oh*ow]
            y.colwise() += params->bias;
            out.data = Eigen::Map<const Vector<Scalar>>(y.data(), y.size());
            break;
        }
        case LayerKind::relu:
            out.data = x.data.cwiseMax(Scalar(0));
            break;
        case LayerKind::maxpool2: {
            const auto winners = maxpool2_argmax(x, out_shape);
            for (Eigen::Index i = 0; i < out.data.size(); ++i) {
                out.data[i] = x.data[winners[i]];
            }
            break;
        }
        case LayerKind::global_avgpool: {
            const Eigen::Index plane =
                static_cast<Eigen::Index>(x.shape.height) * x.shape.width;
            for (int c = 0; c < x.shape.channels; ++c) {
                double total = 0.0;
                for (Eigen::Index i = 0; i < plane; ++i) {
                    total += static_cast<double>(x.data[c * plane + i]);
                }
                out.data[c] = static_cast<Scalar>(total / static_cast<double>(plane));
            }
            break;
        }
        case LayerKind::flatten:
            out.data = x.data;
            break;
        case LayerKind::softmax:
            out.data = softmax<Scalar>(x.data);
            break;
    }
    return out;
}

template <class Scalar>
ActivationTrace<Scalar> forward(const LayerStack& stack, const WeightStore<Scalar>& weights,
                                const Tensor<Scalar>& x) {
    require(x.shape == stack.input, "forward: input shape ", x.shape.str(),
            " does not match model input ", stack.input.str());
    validate_weights(stack, weights);
    const auto shapes = output_shapes(stack);
    ActivationTrace<Scalar> trace;
    trace.reserve(stack.layers.size() + 1);
    trace.push_back(x);
    int param_at = 0;
    for (int i = 0; i < stack.layer_count(); ++i) {
        const LayerParams<Scalar>* params =
            stack.layers[i].parameterized() ? &weights.params[param_at++] : nullptr;
        trace.push_back(apply_layer(stack.layers[i], params, trace.back(), shapes[i]));
    }
    return trace;
}

/// Encoder output for one input, flattened to a D-vector. A cut of 0
/// means the identity encoder: the embedding is the flattened input.
template <class Scalar>
Vector<Scalar> embed(const LayerStack& stack, const WeightStore<Scalar>& weights,
                     const Tensor<Scalar>& x) {
    validate(stack);
    if (stack.encoder_cut == 0) return x.data;
    // Run only the encoder prefix.
    const auto shapes = output_shapes(stack);
    Tensor<Scalar> cur = x;
    int param_at = 0;
    for (int i = 0; i < stack.encoder_cut; ++i) {
        const LayerParams<Scalar>* params =
            stack.layers[i].parameterized() ? &weights.params[param_at++] : nullptr;
        cur = apply_layer(stack.layers[i], params, cur, shapes[i]);
    }
    return cur.data;
}

template <class Scalar>
Vector<Scalar> class_probabilities(const LayerStack& stack,
                                   const WeightStore<Scalar>& weights,
                                   const Tensor<Scalar>& x) {
    return forward(stack, weights, x).back().data;
}

/// Argmax with lowest-index tie-breaking.
template <class Scalar>
int argmax_index(const Vector<Scalar>& v) {
    int best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

}  // namespace kmex
