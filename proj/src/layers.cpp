#include "kmex/layers.hpp"

namespace kmex {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::global_avgpool: return "global_avgpool";
        case LayerKind::flatten: return "flatten";
        case LayerKind::softmax: return "softmax";
    }
    fail("unknown layer kind");
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "dense") return LayerKind::dense;
    if (name == "conv2d") return LayerKind::conv2d;
    if (name == "relu") return LayerKind::relu;
    if (name == "maxpool2") return LayerKind::maxpool2;
    if (name == "global_avgpool") return LayerKind::global_avgpool;
    if (name == "flatten") return LayerKind::flatten;
    if (name == "softmax") return LayerKind::softmax;
    fail("unknown layer kind \"", name, "\"");
}

TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in) {
    switch (layer.kind) {
        case LayerKind::dense:
            require(in.size() == layer.in, "dense layer expects ", layer.in,
                    " inputs, got shape ", in.str());
            require(in.flat(), "dense layer expects a flat input, got ", in.str());
            return {layer.out, 1, 1};
        case LayerKind::conv2d: {
            require(in.channels == layer.in_channels, "conv2d expects ",
                    layer.in_channels, " input channels, got ", in.str());
            require(layer.stride >= 1 && layer.kernel_h >= 1 && layer.kernel_w >= 1,
                    "conv2d: invalid kernel/stride");
            const int oh = (in.height + 2 * layer.pad - layer.kernel_h) / layer.stride + 1;
            const int ow = (in.width + 2 * layer.pad - layer.kernel_w) / layer.stride + 1;
            require(oh >= 1 && ow >= 1, "conv2d output would be empty for input ",
                    in.str());
            return {layer.out_channels, oh, ow};
        }
        case LayerKind::relu:
            return in;
        case LayerKind::maxpool2:
            require(in.height % 2 == 0 && in.width % 2 == 0,
                    "maxpool2 requires even spatial dims, got ", in.str());
            return {in.channels, in.height / 2, in.width / 2};
        case LayerKind::global_avgpool:
            require(in.height * in.width > 1, "global_avgpool expects a spatial map, got ",
                    in.str());
            return {in.channels, 1, 1};
        case LayerKind::flatten:
            return {static_cast<int>(in.size()), 1, 1};
        case LayerKind::softmax:
            require(in.flat(), "softmax expects a flat input, got ", in.str());
            return in;
    }
    fail("unknown layer kind");
}

std::vector<TensorShape> output_shapes(const LayerStack& stack) {
    require(stack.input.size() > 0, "model input shape is empty");
    std::vector<TensorShape> shapes;
    shapes.reserve(stack.layers.size());
    TensorShape cur = stack.input;
    for (std::size_t i = 0; i < stack.layers.size(); ++i) {
        try {
            cur = layer_output_shape(stack.layers[i], cur);
        } catch (const Error& e) {
            fail("layer ", i, ": ", e.what());
        }
        shapes.push_back(cur);
    }
    return shapes;
}

void validate(const LayerStack& stack) {
    require(!stack.layers.empty(), "model has no layers");
    output_shapes(stack);
    int softmax_count = 0;
    for (const auto& layer : stack.layers) {
        if (layer.kind == LayerKind::softmax) ++softmax_count;
    }
    require(softmax_count == 1, "model must contain exactly one softmax, found ",
            softmax_count);
    require(stack.layers.back().kind == LayerKind::softmax,
            "softmax must be the final layer");
    require(stack.encoder_cut >= 0 && stack.encoder_cut <= stack.layer_count(),
            "encoder_cut ", stack.encoder_cut, " out of range [0, ",
            stack.layer_count(), "]");
}

int embedding_dim(const LayerStack& stack) {
    if (stack.encoder_cut == 0) return static_cast<int>(stack.input.size());
    return static_cast<int>(output_shapes(stack)[stack.encoder_cut - 1].size());
}

std::vector<int> param_layers(const LayerStack& stack) {
    std::vector<int> idx;
    for (int i = 0; i < stack.layer_count(); ++i) {
        if (stack.layers[i].parameterized()) idx.push_back(i);
    }
    return idx;
}

int first_param_layer(const LayerStack& stack) {
    for (int i = 0; i < stack.layer_count(); ++i) {
        if (stack.layers[i].parameterized()) return i;
    }
    return -1;
}

int global_avgpool_layer(const LayerStack& stack) {
    for (int i = 0; i < stack.layer_count(); ++i) {
        if (stack.layers[i].kind == LayerKind::global_avgpool) return i;
    }
    return -1;
}

int class_count(const LayerStack& stack) {
    return static_cast<int>(output_shapes(stack).back().size());
}

}  // namespace kmex
