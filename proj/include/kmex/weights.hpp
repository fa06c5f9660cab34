#pragma once

#include "kmex/layers.hpp"
#include "kmex/rng.hpp"

#include <cmath>
#include <vector>

namespace kmex {

/// Parameters of one dense or conv2d layer. Dense weights are [out, in];
/// conv weights are [out_channels, in_channels*kernel_h*kernel_w] with the
/// column index running (in_channel, kernel_row, kernel_col) fastest-last,
/// i.e. the row-major flattening of [out_ch, in_ch, kh, kw].
template <class Scalar>
struct LayerParams {
    MatrixRX<Scalar> weight;
    Vector<Scalar> bias;
};

template <class Scalar>
struct WeightStore {
    std::vector<LayerParams<Scalar>> params;  // one per parameterized layer

    Eigen::Index param_count() const {
        Eigen::Index n = 0;
        for (const auto& p : params) n += p.weight.size() + p.bias.size();
        return n;
    }

    Vector<Scalar> to_vector() const {
        Vector<Scalar> v(param_count());
        Eigen::Index at = 0;
        for (const auto& p : params) {
            for (Eigen::Index i = 0; i < p.weight.size(); ++i) v[at++] = p.weight.data()[i];
            for (Eigen::Index i = 0; i < p.bias.size(); ++i) v[at++] = p.bias[i];
        }
        return v;
    }

    void from_vector(const Vector<Scalar>& v) {
        require(v.size() == param_count(), "weights: flat vector size mismatch");
        Eigen::Index at = 0;
        for (auto& p : params) {
            for (Eigen::Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = v[at++];
            for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias[i] = v[at++];
        }
    }

    template <class To>
    WeightStore<To> cast() const {
        WeightStore<To> out;
        out.params.reserve(params.size());
        for (const auto& p : params) {
            out.params.push_back({p.weight.template cast<To>(), p.bias.template cast<To>()});
        }
        return out;
    }

    bool all_finite() const {
        for (const auto& p : params) {
            if (!p.weight.allFinite() || !p.bias.allFinite()) return false;
        }
        return true;
    }
};

/// Expected (rows, cols) of the weight matrix for a parameterized layer.
inline std::pair<int, int> weight_dims(const LayerSpec& layer) {
    if (layer.kind == LayerKind::dense) return {layer.out, layer.in};
    if (layer.kind == LayerKind::conv2d) {
        return {layer.out_channels, layer.in_channels * layer.kernel_h * layer.kernel_w};
    }
    fail("layer ", to_string(layer.kind), " has no weights");
}

template <class Scalar>
void validate_weights(const LayerStack& stack, const WeightStore<Scalar>& weights) {
    const auto idx = param_layers(stack);
    require(weights.params.size() == idx.size(), "weights: expected ", idx.size(),
            " parameter sets, got ", weights.params.size());
    for (std::size_t p = 0; p < idx.size(); ++p) {
        const auto [rows, cols] = weight_dims(stack.layers[idx[p]]);
        const auto& lp = weights.params[p];
        require(lp.weight.rows() == rows && lp.weight.cols() == cols,
                "weights: tensor ", p, " has shape ", lp.weight.rows(), "x",
                lp.weight.cols(), ", expected ", rows, "x", cols);
        require(lp.bias.size() == rows, "weights: bias ", p, " has size ",
                lp.bias.size(), ", expected ", rows);
        require(lp.weight.allFinite() && lp.bias.allFinite(),
                "weights: tensor ", p, " contains non-finite values");
    }
}

/// He-scaled random init (fan-in), zero biases.
template <class Scalar>
WeightStore<Scalar> init_weights(const LayerStack& stack, std::uint64_t seed) {
    WeightStore<Scalar> store;
    const auto idx = param_layers(stack);
    for (std::size_t p = 0; p < idx.size(); ++p) {
        const auto [rows, cols] = weight_dims(stack.layers[idx[p]]);
        Rng rng(split_seed(seed, "init", p));
        const double scale = std::sqrt(2.0 / static_cast<double>(cols));
        MatrixRX<Scalar> w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = static_cast<Scalar>(rng.normal() * scale);
        }
        store.params.push_back({std::move(w), Vector<Scalar>::Zero(rows)});
    }
    return store;
}

}  // namespace kmex
