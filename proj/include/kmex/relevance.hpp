#pragma once

#include "kmex/forward.hpp"
#include "kmex/similarity.hpp"

#include <string>
#include <vector>

namespace kmex {

/// Pixel-level relevance over the model input, plus bookkeeping for the
/// conservation check and degenerate-denominator fallbacks.
template <class Scalar>
struct RelevanceMap {
    TensorShape shape;
    Vector<Scalar> values;
    double seeded = 0.0;
    std::vector<std::string> flags;

    double total() const {
        double t = 0.0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            t += static_cast<double>(values[i]);
        }
        return t;
    }
    /// Relative drift between the seeded amount and the input-map sum.
    double drift() const {
        const double denom = std::max(std::abs(seeded), 1e-30);
        return std::abs(total() - seeded) / denom;
    }
};

namespace detail {

inline double stabilized(double z, double epsilon) {
    return z + (z >= 0.0 ? epsilon : -epsilon);
}

}  // namespace detail

/// Propagate relevance from trace[position] down to the model input.
/// Rules: epsilon on dense layers, positive-contribution (alpha=1,
/// beta=0) on conv layers, flat on the first conv layer, winner-take-all
/// through maxpool, proportional through average pooling, copy-through
/// relu where the activation is positive. Degenerate all-zero
/// denominators fall back to a uniform (flat) split and are flagged.
template <class Scalar>
RelevanceMap<Scalar> relevance_backward(const LayerStack& stack,
                                        const WeightStore<Scalar>& weights,
                                        const ActivationTrace<Scalar>& trace,
                                        int position, Vector<Scalar> relevance,
                                        double epsilon = 1e-6) {
    require(position >= 0 && position < static_cast<int>(trace.size()),
            "relevance: position ", position, " outside trace of length ", trace.size());
    require(relevance.size() == trace[position].data.size(),
            "relevance: seed size ", relevance.size(), " does not match activation size ",
            trace[position].data.size());

    RelevanceMap<Scalar> map;
    map.seeded = static_cast<double>(relevance.template cast<double>().sum());

    const auto shapes = output_shapes(stack);
    const int first_param = first_param_layer(stack);
    const bool flat_first =
        first_param >= 0 && stack.layers[first_param].kind == LayerKind::conv2d;

    // Parameter index of each layer below `position`.
    std::vector<int> param_of(stack.layer_count(), -1);
    {
        int at = 0;
        for (int i = 0; i < stack.layer_count(); ++i) {
            if (stack.layers[i].parameterized()) param_of[i] = at++;
        }
    }

    for (int i = position - 1; i >= 0; --i) {
        const auto& layer = stack.layers[i];
        const Tensor<Scalar>& in = trace[i];
        const Tensor<Scalar>& out = trace[i + 1];
        Vector<Scalar> next = Vector<Scalar>::Zero(in.data.size());

        switch (layer.kind) {
            case LayerKind::softmax:
            case LayerKind::flatten:
                next = relevance;
                break;
            case LayerKind::relu:
                next = (in.data.array() > Scalar(0))
                           .select(relevance.array(), Scalar(0))
                           .matrix();
                break;
            case LayerKind::maxpool2: {
                const auto winners = maxpool2_argmax(in, shapes[i]);
                for (Eigen::Index j = 0; j < relevance.size(); ++j) {
                    next[winners[j]] += relevance[j];
                }
                break;
            }
            case LayerKind::global_avgpool: {
                const Eigen::Index plane =
                    static_cast<Eigen::Index>(in.shape.height) * in.shape.width;
                bool fell_back = false;
                for (int c = 0; c < in.shape.channels; ++c) {
                    double channel_sum = 0.0;
                    for (Eigen::Index j = 0; j < plane; ++j) {
                        channel_sum += static_cast<double>(in.data[c * plane + j]);
                    }
                    if (channel_sum == 0.0) {
                        const Scalar share =
                            relevance[c] / static_cast<Scalar>(plane);
                        next.segment(c * plane, plane).setConstant(share);
                        if (relevance[c] != Scalar(0)) fell_back = true;
                        continue;
                    }
                    // The 1/plane pooling weight cancels from the ratio.
                    const double ratio = static_cast<double>(relevance[c]) /
                                         detail::stabilized(channel_sum, epsilon);
                    next.segment(c * plane, plane) =
                        in.data.segment(c * plane, plane) * static_cast<Scalar>(ratio);
                }
                if (fell_back) {
                    map.flags.push_back("avgpool_flat_fallback:layer=" + std::to_string(i));
                }
                break;
            }
            case LayerKind::dense: {
                const auto& p = weights.params[param_of[i]];
                Vector<Scalar> ratio(relevance.size());
                for (Eigen::Index j = 0; j < relevance.size(); ++j) {
                    ratio[j] = static_cast<Scalar>(
                        static_cast<double>(relevance[j]) /
                        detail::stabilized(static_cast<double>(out.data[j]), epsilon));
                }
                next = in.data.cwiseProduct(p.weight.transpose() * ratio);
                break;
            }
            case LayerKind::conv2d: {
                const auto& p = weights.params[param_of[i]];
                const Eigen::Index positions = relevance.size() / layer.out_channels;
                Eigen::Map<const MatrixRX<Scalar>> rel_mat(relevance.data(),
                                                           layer.out_channels, positions);
                const MatrixRX<Scalar> cols = im2col(in, layer, shapes[i]);
                MatrixRX<Scalar> grad_cols;

                if (i == first_param && flat_first) {
                    // Flat rule: spread each output's relevance uniformly
                    // over the taps actually inside the image.
                    Tensor<Scalar> ones(in.shape);
                    ones.data.setOnes();
                    const MatrixRX<Scalar> cols1 = im2col(ones, layer, shapes[i]);
                    const Vector<Scalar> counts = cols1.colwise().sum();
                    grad_cols = cols1;
                    for (Eigen::Index pos = 0; pos < positions; ++pos) {
                        Scalar share_sum = Scalar(0);
                        for (int oc = 0; oc < layer.out_channels; ++oc) {
                            share_sum += rel_mat(oc, pos);
                        }
                        grad_cols.col(pos) *= share_sum / counts[pos];
                    }
                } else {
                    const MatrixRX<Scalar> cols_pos = cols.cwiseMax(Scalar(0));
                    const MatrixRX<Scalar> cols_neg = cols.cwiseMin(Scalar(0));
                    const MatrixRX<Scalar> w_pos = p.weight.cwiseMax(Scalar(0));
                    const MatrixRX<Scalar> w_neg = p.weight.cwiseMin(Scalar(0));
                    MatrixRX<Scalar> denom = w_pos * cols_pos + w_neg * cols_neg;
                    denom.colwise() += p.bias.cwiseMax(Scalar(0));

                    MatrixRX<Scalar> ratio(layer.out_channels, positions);
                    bool fell_back = false;
                    for (Eigen::Index j = 0; j < denom.size(); ++j) {
                        const Scalar d = denom.data()[j];
                        ratio.data()[j] = d > Scalar(0) ? rel_mat.data()[j] / d : Scalar(0);
                        if (d == Scalar(0) && rel_mat.data()[j] != Scalar(0)) {
                            fell_back = true;
                        }
                    }
                    grad_cols = (w_pos.transpose() * ratio).cwiseProduct(cols_pos) +
                                (w_neg.transpose() * ratio).cwiseProduct(cols_neg);

                    if (fell_back) {
                        // Degenerate units: no positive contribution at all;
                        // distribute their relevance uniformly over valid taps.
                        Tensor<Scalar> ones(in.shape);
                        ones.data.setOnes();
                        const MatrixRX<Scalar> cols1 = im2col(ones, layer, shapes[i]);
                        const Vector<Scalar> counts = cols1.colwise().sum();
                        for (Eigen::Index pos = 0; pos < positions; ++pos) {
                            Scalar orphaned = Scalar(0);
                            for (int oc = 0; oc < layer.out_channels; ++oc) {
                                if (denom(oc, pos) == Scalar(0)) {
                                    orphaned += rel_mat(oc, pos);
                                }
                            }
                            if (orphaned != Scalar(0)) {
                                grad_cols.col(pos) += cols1.col(pos) * (orphaned / counts[pos]);
                            }
                        }
                        map.flags.push_back("conv_flat_fallback:layer=" + std::to_string(i));
                    }
                }

                Tensor<Scalar> grad_in(in.shape);
                col2im_add(grad_cols, layer, shapes[i], grad_in);
                next = grad_in.data;
                break;
            }
        }
        relevance = std::move(next);
    }

    map.shape = stack.input;
    map.values = std::move(relevance);
    return map;
}

/// LRP seeded with `amount` at one output node (relevance enters the
/// network at the corresponding logit; the softmax is not decomposed).
template <class Scalar>
RelevanceMap<Scalar> lrp_backward(const LayerStack& stack, const WeightStore<Scalar>& weights,
                                  const ActivationTrace<Scalar>& trace, int output_node,
                                  double amount, double epsilon = 1e-6) {
    require(trace.size() == stack.layers.size() + 1,
            "lrp: trace length does not match the stack");
    const Eigen::Index outputs = trace.back().data.size();
    require(output_node >= 0 && output_node < outputs, "lrp: output node ", output_node,
            " out of range [0, ", outputs, ")");
    Vector<Scalar> seed = Vector<Scalar>::Zero(outputs);
    seed[output_node] = static_cast<Scalar>(amount);
    return relevance_backward(stack, weights, trace,
                              static_cast<int>(trace.size()) - 1, std::move(seed), epsilon);
}

/// Black-box explanation: LRP map for the predicted class, seeded with
/// its probability.
template <class Scalar>
RelevanceMap<Scalar> lrp_prediction_map(const LayerStack& stack,
                                        const WeightStore<Scalar>& weights,
                                        const Tensor<Scalar>& x, double epsilon = 1e-6) {
    const auto trace = forward(stack, weights, x);
    const auto& probs = trace.back().data;
    const int predicted = argmax_index(probs);
    return lrp_backward(stack, weights, trace, predicted,
                        static_cast<double>(probs[predicted]), epsilon);
}

/// Decompose a similarity score onto the embedding dimensions via
/// gradient-times-input shares: seed_j = g_j z_j / (sum_k g_k z_k +/- 1e-9)
/// * total. An all-zero decomposition falls back to a uniform seed.
inline Eigen::VectorXd embedding_seed(const Eigen::VectorXd& z, const Eigen::VectorXd& p,
                                      const Similarity& sim, double total,
                                      bool& degenerate) {
    const Eigen::VectorXd grad = similarity_gradient(sim, z, p);
    const Eigen::VectorXd contrib = grad.cwiseProduct(z);
    degenerate = contrib.cwiseAbs().sum() == 0.0;
    if (degenerate) {
        return Eigen::VectorXd::Constant(z.size(), total / static_cast<double>(z.size()));
    }
    const double denom = detail::stabilized(contrib.sum(), 1e-9);
    return contrib * (total / denom);
}

/// Prototypical relevance: the similarity score s(embed(x), p) seeded at
/// the embedding layer and propagated back through the encoder.
template <class Scalar>
RelevanceMap<Scalar> prp_map(const LayerStack& stack, const WeightStore<Scalar>& weights,
                             const Tensor<Scalar>& x, const Eigen::VectorXd& prototype,
                             const Similarity& sim, double epsilon = 1e-6) {
    validate(stack);
    const auto trace = forward(stack, weights, x);
    const Eigen::VectorXd z = trace[stack.encoder_cut].data.template cast<double>();
    require(prototype.size() == z.size(), "prp: prototype dimension ", prototype.size(),
            " does not match embedding dimension ", z.size());
    const double score = similarity_score(sim, z, prototype);
    bool degenerate = false;
    const Eigen::VectorXd seed = embedding_seed(z, prototype, sim, score, degenerate);
    auto map = relevance_backward(stack, weights, trace, stack.encoder_cut,
                                  seed.cast<Scalar>().eval(), epsilon);
    if (degenerate) map.flags.push_back("uniform_seed");
    return map;
}

}  // namespace kmex
