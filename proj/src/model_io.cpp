#include "kmex/model_io.hpp"

#include "kmex/kmx_io.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace kmex {

namespace {

using nlohmann::json;

json layer_to_json(const LayerSpec& layer) {
    json j;
    j["kind"] = to_string(layer.kind);
    if (layer.kind == LayerKind::dense) {
        j["in"] = layer.in;
        j["out"] = layer.out;
    } else if (layer.kind == LayerKind::conv2d) {
        j["in_channels"] = layer.in_channels;
        j["out_channels"] = layer.out_channels;
        j["kernel_h"] = layer.kernel_h;
        j["kernel_w"] = layer.kernel_w;
        j["stride"] = layer.stride;
        j["pad"] = layer.pad;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    const LayerKind kind = layer_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::dense:
            return LayerSpec::dense(j.at("in").get<int>(), j.at("out").get<int>());
        case LayerKind::conv2d:
            return LayerSpec::conv2d(j.at("in_channels").get<int>(),
                                     j.at("out_channels").get<int>(),
                                     j.at("kernel_h").get<int>(), j.at("kernel_w").get<int>(),
                                     j.at("stride").get<int>(), j.at("pad").get<int>());
        case LayerKind::relu: return LayerSpec::relu();
        case LayerKind::maxpool2: return LayerSpec::maxpool2();
        case LayerKind::global_avgpool: return LayerSpec::global_avgpool();
        case LayerKind::flatten: return LayerSpec::flatten();
        case LayerKind::softmax: return LayerSpec::softmax();
    }
    fail("unknown layer kind");
}

void append_f32_le(std::string& out, float v) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((raw >> (8 * i)) & 0xff));
}

float read_f32_le(const std::string& bytes, std::size_t at) {
    std::uint32_t raw = 0;
    for (int i = 3; i >= 0; --i) raw = (raw << 8) | static_cast<unsigned char>(bytes[at + i]);
    float v;
    std::memcpy(&v, &raw, 4);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open \"", path, "\"");
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

void save_model(const std::string& model_path, const std::string& weights_path,
                const LayerStack& stack, const WeightStore<float>& weights,
                const std::optional<NormStats>& normalization) {
    validate(stack);
    validate_weights(stack, weights);

    json manifest = json::array();
    std::string bin;
    const auto idx = param_layers(stack);
    for (std::size_t p = 0; p < idx.size(); ++p) {
        const auto& layer = stack.layers[idx[p]];
        const auto& lp = weights.params[p];
        json wj;
        wj["layer"] = idx[p];
        wj["tensor"] = "weight";
        if (layer.kind == LayerKind::dense) {
            wj["shape"] = {layer.out, layer.in};
        } else {
            wj["shape"] = {layer.out_channels, layer.in_channels, layer.kernel_h,
                           layer.kernel_w};
        }
        manifest.push_back(wj);
        for (Eigen::Index i = 0; i < lp.weight.size(); ++i) {
            append_f32_le(bin, lp.weight.data()[i]);
        }
        json bj;
        bj["layer"] = idx[p];
        bj["tensor"] = "bias";
        bj["shape"] = {static_cast<int>(lp.bias.size())};
        manifest.push_back(bj);
        for (Eigen::Index i = 0; i < lp.bias.size(); ++i) append_f32_le(bin, lp.bias[i]);
    }

    json j;
    j["format"] = "kmex-model";
    j["version"] = 1;
    j["input_shape"] = {{"channels", stack.input.channels},
                        {"height", stack.input.height},
                        {"width", stack.input.width}};
    j["encoder_cut"] = stack.encoder_cut;
    json layers = json::array();
    for (const auto& layer : stack.layers) layers.push_back(layer_to_json(layer));
    j["layers"] = layers;
    if (normalization) {
        std::vector<float> mean(normalization->mean.data(),
                                normalization->mean.data() + normalization->mean.size());
        std::vector<float> stddev(normalization->stddev.data(),
                                  normalization->stddev.data() + normalization->stddev.size());
        j["normalization"] = {{"mean", mean}, {"stddev", stddev}};
    }
    j["weights"] = {{"dtype", "f32"}, {"tensors", manifest}};

    atomic_write(weights_path, bin);
    atomic_write(model_path, j.dump(2) + "\n");
}

LoadedModel load_model(const std::string& model_path, const std::string& weights_path) {
    json j;
    try {
        j = json::parse(read_file(model_path));
    } catch (const json::exception& e) {
        fail("\"", model_path, "\": invalid JSON: ", e.what());
    }
    require(j.value("format", "") == "kmex-model", "\"", model_path,
            "\": not a kmex model file");
    require(j.value("version", 0) == 1, "\"", model_path, "\": unsupported version");

    LoadedModel model;
    const auto& shape = j.at("input_shape");
    model.stack.input = {shape.at("channels").get<int>(), shape.at("height").get<int>(),
                         shape.at("width").get<int>()};
    model.stack.encoder_cut = j.at("encoder_cut").get<int>();
    for (const auto& lj : j.at("layers")) {
        model.stack.layers.push_back(layer_from_json(lj));
    }
    validate(model.stack);

    if (j.contains("normalization")) {
        NormStats stats;
        const auto mean = j["normalization"].at("mean").get<std::vector<float>>();
        const auto stddev = j["normalization"].at("stddev").get<std::vector<float>>();
        stats.mean = Eigen::Map<const Eigen::VectorXf>(mean.data(),
                                                       static_cast<Eigen::Index>(mean.size()));
        stats.stddev = Eigen::Map<const Eigen::VectorXf>(
            stddev.data(), static_cast<Eigen::Index>(stddev.size()));
        model.normalization = stats;
    }

    const std::string bin = read_file(weights_path);
    const auto idx = param_layers(model.stack);
    std::size_t expected = 0;
    for (int layer : idx) {
        const auto [rows, cols] = weight_dims(model.stack.layers[layer]);
        expected += static_cast<std::size_t>(rows) * cols * 4 + static_cast<std::size_t>(rows) * 4;
    }
    require(bin.size() == expected, "\"", weights_path, "\": expected ", expected,
            " bytes, file has ", bin.size());

    std::size_t at = 0;
    for (int layer : idx) {
        const auto [rows, cols] = weight_dims(model.stack.layers[layer]);
        LayerParams<float> lp;
        lp.weight.resize(rows, cols);
        for (Eigen::Index i = 0; i < lp.weight.size(); ++i, at += 4) {
            lp.weight.data()[i] = read_f32_le(bin, at);
        }
        lp.bias.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i, at += 4) {
            lp.bias[i] = read_f32_le(bin, at);
        }
        model.weights.params.push_back(std::move(lp));
    }
    validate_weights(model.stack, model.weights);
    model.weights_hash = hex64(fnv1a64_bytes(bin.data(), bin.size()));
    return model;
}

std::string hash_file(const std::string& path) {
    const std::string bytes = read_file(path);
    return hex64(fnv1a64_bytes(bytes.data(), bytes.size()));
}

}  // namespace kmex
