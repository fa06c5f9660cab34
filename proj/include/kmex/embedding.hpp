#pragma once

#include "kmex/core.hpp"

#include <string>
#include <vector>

namespace kmex {

/// Encoder outputs for a set of samples, one row per sample.
struct Embeddings {
    MatrixRXf matrix;
    std::vector<std::uint32_t> sample_index;  // row -> dataset index
    std::string source;                       // producing model's hash tag

    Eigen::Index count() const { return matrix.rows(); }
    Eigen::Index dim() const { return matrix.cols(); }
};

inline void validate(const Embeddings& emb) {
    require(emb.matrix.allFinite(), "embeddings: non-finite entries");
    require(emb.sample_index.size() == static_cast<std::size_t>(emb.matrix.rows()),
            "embeddings: ", emb.sample_index.size(), " sample indices for ",
            emb.matrix.rows(), " rows");
}

}  // namespace kmex
