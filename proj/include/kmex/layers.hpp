#pragma once

#include "kmex/core.hpp"

#include <string>
#include <vector>

namespace kmex {

enum class LayerKind {
    dense,
    conv2d,
    relu,
    maxpool2,        // fixed 2x2 window, stride 2
    global_avgpool,
    flatten,
    softmax,
};

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
    LayerKind kind{};
    // dense
    int in = 0;
    int out = 0;
    // conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int pad = 0;

    bool parameterized() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d;
    }

    static LayerSpec dense(int in, int out) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in = in;
        s.out = out;
        return s;
    }
    static LayerSpec conv2d(int in_channels, int out_channels, int kernel_h,
                            int kernel_w, int stride = 1, int pad = 0) {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.in_channels = in_channels;
        s.out_channels = out_channels;
        s.kernel_h = kernel_h;
        s.kernel_w = kernel_w;
        s.stride = stride;
        s.pad = pad;
        return s;
    }
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec maxpool2() { return {LayerKind::maxpool2}; }
    static LayerSpec global_avgpool() { return {LayerKind::global_avgpool}; }
    static LayerSpec flatten() { return {LayerKind::flatten}; }
    static LayerSpec softmax() { return {LayerKind::softmax}; }
};

/// A feedforward model: layers[0 .. encoder_cut) form the encoder whose
/// output is the embedding; the remainder is the original classifier
/// head. The final layer is always the (single) softmax.
struct LayerStack {
    TensorShape input;
    std::vector<LayerSpec> layers;
    int encoder_cut = 0;

    int layer_count() const { return static_cast<int>(layers.size()); }
};

/// Output shape of a single layer given its input shape.
TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in);

/// Shapes of every layer output; index i is the output of layers[i].
/// Throws on any shape incompatibility.
std::vector<TensorShape> output_shapes(const LayerStack& stack);

/// Full structural validation: shape chain, exactly one softmax placed
/// last, and a usable encoder_cut.
void validate(const LayerStack& stack);

/// Dimension of the embedding, i.e. the element count at encoder_cut
/// (the activation there is used flattened).
int embedding_dim(const LayerStack& stack);

/// Indices of parameterized layers in declaration order.
std::vector<int> param_layers(const LayerStack& stack);

/// Index of the first parameterized layer, or -1.
int first_param_layer(const LayerStack& stack);

/// Index of the global average pool layer, or -1 if absent.
int global_avgpool_layer(const LayerStack& stack);

int class_count(const LayerStack& stack);

}  // namespace kmex
