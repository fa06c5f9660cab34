#pragma once

#include "kmex/forward.hpp"

#include <numeric>

namespace kmex {

struct TrainConfig {
    std::uint64_t seed = 0;
    int epochs = 10;
    double learning_rate = 0.01;
    int batch_size = 32;
    double momentum = 0.9;
};

template <class Scalar>
struct TrainResult {
    WeightStore<Scalar> weights;
    std::vector<double> epoch_loss;
};

/// Gradient of the cross-entropy loss w.r.t. all parameters for one
/// sample. Returns the loss; `grads` accumulates (callers zero it).
template <class Scalar>
double accumulate_gradient(const LayerStack& stack, const WeightStore<Scalar>& weights,
                           const Tensor<Scalar>& x, int label_one_based,
                           WeightStore<Scalar>& grads) {
    const auto shapes = output_shapes(stack);
    const auto trace = forward(stack, weights, x);
    const auto& probs = trace.back().data;
    const int y = label_one_based - 1;
    require(y >= 0 && y < probs.size(), "train: label ", label_one_based,
            " out of range for ", probs.size(), " classes");
    const double p = std::max(static_cast<double>(probs[y]), 1e-30);
    const double loss = -std::log(p);

    // Softmax + cross-entropy fused: gradient at the logits.
    Tensor<Scalar> grad(trace[trace.size() - 2].shape);
    grad.data = probs;
    grad.data[y] -= Scalar(1);

    int param_at = static_cast<int>(weights.params.size());
    for (int i = stack.layer_count() - 2; i >= 0; --i) {
        const auto& layer = stack.layers[i];
        const Tensor<Scalar>& in = trace[i];
        Tensor<Scalar> grad_in(in.shape);
        switch (layer.kind) {
            case LayerKind::dense: {
                --param_at;
                const auto& p_ = weights.params[param_at];
                grads.params[param_at].weight.noalias() +=
                    grad.data * in.data.transpose();
                grads.params[param_at].bias += grad.data;
                grad_in.data.noalias() = p_.weight.transpose() * grad.data;
                break;
            }
            case LayerKind::conv2d: {
                --param_at;
                const auto& p_ = weights.params[param_at];
                const Eigen::Index positions = grad.data.size() / layer.out_channels;
                Eigen::Map<const MatrixRX<Scalar>> grad_mat(grad.data.data(),
                                                            layer.out_channels, positions);
                const MatrixRX<Scalar> cols = im2col(in, layer, shapes[i]);
                grads.params[param_at].weight.noalias() += grad_mat * cols.transpose();
                grads.params[param_at].bias += grad_mat.rowwise().sum();
                const MatrixRX<Scalar> grad_cols = p_.weight.transpose() * grad_mat;
                col2im_add(grad_cols, layer, shapes[i], grad_in);
                break;
            }
            case LayerKind::relu:
                grad_in.data = (in.data.array() > Scalar(0))
                                   .select(grad.data.array(), Scalar(0))
                                   .matrix();
                break;
            case LayerKind::maxpool2: {
                const auto winners = maxpool2_argmax(in, shapes[i]);
                for (Eigen::Index j = 0; j < grad.data.size(); ++j) {
                    grad_in.data[winners[j]] += grad.data[j];
                }
                break;
            }
            case LayerKind::global_avgpool: {
                const Eigen::Index plane =
                    static_cast<Eigen::Index>(in.shape.height) * in.shape.width;
                for (int c = 0; c < in.shape.channels; ++c) {
                    const Scalar share = grad.data[c] / static_cast<Scalar>(plane);
                    grad_in.data.segment(c * plane, plane).setConstant(share);
                }
                break;
            }
            case LayerKind::flatten:
                grad_in.data = grad.data;
                break;
            case LayerKind::softmax:
                fail("softmax may only appear as the final layer");
        }
        grad = std::move(grad_in);
    }
    return loss;
}

template <class Scalar>
WeightStore<Scalar> zero_like(const WeightStore<Scalar>& weights) {
    WeightStore<Scalar> z;
    z.params.reserve(weights.params.size());
    for (const auto& p : weights.params) {
        z.params.push_back({MatrixRX<Scalar>::Zero(p.weight.rows(), p.weight.cols()),
                            Vector<Scalar>::Zero(p.bias.size())});
    }
    return z;
}

/// Mean cross-entropy loss over a set, no gradients.
template <class Scalar>
double mean_loss(const LayerStack& stack, const WeightStore<Scalar>& weights,
                 const std::vector<Tensor<Scalar>>& images, const std::vector<int>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto probs = class_probabilities(stack, weights, images[i]);
        total += -std::log(std::max(static_cast<double>(probs[labels[i] - 1]), 1e-30));
    }
    return total / static_cast<double>(images.size());
}

/// Plain SGD with momentum on the cross-entropy loss. Deterministic for a
/// fixed seed; a zero learning rate leaves the initial weights untouched.
template <class Scalar>
TrainResult<Scalar> train_sgd(const LayerStack& stack,
                              const std::vector<Tensor<Scalar>>& images,
                              const std::vector<int>& labels, const TrainConfig& config) {
    validate(stack);
    require(images.size() == labels.size(), "train: ", images.size(), " images vs ",
            labels.size(), " labels");
    require(!images.empty(), "train: empty dataset");
    const int classes = class_count(stack);
    for (int label : labels) {
        require(label >= 1 && label <= classes, "train: label ", label,
                " outside [1..", classes, "]");
    }

    WeightStore<Scalar> weights = init_weights<Scalar>(stack, split_seed(config.seed, "init"));
    WeightStore<Scalar> velocity = zero_like(weights);
    TrainResult<Scalar> result;

    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(split_seed(config.seed, "shuffle", epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        double epoch_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            WeightStore<Scalar> grads = zero_like(weights);
            for (std::size_t i = start; i < stop; ++i) {
                epoch_total += accumulate_gradient(stack, weights, images[order[i]],
                                                   labels[order[i]], grads);
            }
            const double scale = config.learning_rate / static_cast<double>(stop - start);
            for (std::size_t p = 0; p < weights.params.size(); ++p) {
                velocity.params[p].weight =
                    Scalar(config.momentum) * velocity.params[p].weight -
                    Scalar(scale) * grads.params[p].weight;
                velocity.params[p].bias = Scalar(config.momentum) * velocity.params[p].bias -
                                          Scalar(scale) * grads.params[p].bias;
                weights.params[p].weight += velocity.params[p].weight;
                weights.params[p].bias += velocity.params[p].bias;
            }
        }
        const double epoch_loss = epoch_total / static_cast<double>(images.size());
        if (!std::isfinite(epoch_loss) || !weights.all_finite()) {
            fail("training diverged at epoch ", epoch, " (non-finite loss or weights)");
        }
        result.epoch_loss.push_back(epoch_loss);
        log_debug("epoch ", epoch, " loss ", epoch_loss);
    }
    result.weights = std::move(weights);
    return result;
}

/// Classification accuracy in percent.
template <class Scalar>
double accuracy_percent(const LayerStack& stack, const WeightStore<Scalar>& weights,
                        const std::vector<Tensor<Scalar>>& images,
                        const std::vector<int>& labels) {
    require(!images.empty(), "accuracy: empty dataset");
    int hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto probs = class_probabilities(stack, weights, images[i]);
        if (argmax_index(probs) + 1 == labels[i]) ++hits;
    }
    return 100.0 * hits / static_cast<double>(images.size());
}

}  // namespace kmex
