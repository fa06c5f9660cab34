#pragma once

#include "kmex/dataset.hpp"
#include "kmex/weights.hpp"

#include <optional>
#include <string>

namespace kmex {

struct LoadedModel {
    LayerStack stack;
    WeightStore<float> weights;
    std::optional<NormStats> normalization;
    std::string weights_hash;  // fnv1a64 of weights.bin, hex
};

/// Write the model pair: model.json (layer list, shapes, encoder cut,
/// tensor manifest) and weights.bin (raw little-endian float32 tensors
/// concatenated in manifest order; dense [out,in], conv
/// [out_ch,in_ch,kh,kw], bias after each weight).
void save_model(const std::string& model_path, const std::string& weights_path,
                const LayerStack& stack, const WeightStore<float>& weights,
                const std::optional<NormStats>& normalization = std::nullopt);

LoadedModel load_model(const std::string& model_path, const std::string& weights_path);

std::string hash_file(const std::string& path);

}  // namespace kmex
