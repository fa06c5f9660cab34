#pragma once

#include "kmex/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kmex {

/// Per-channel normalization statistics, computed on a training split.
struct NormStats {
    Eigen::VectorXf mean;
    Eigen::VectorXf stddev;
};

/// Labeled images; raw pixel values live in [0, 1] before normalization.
struct Dataset {
    std::vector<Tensorf> images;
    std::vector<int> labels;  // 1-based class ids
    int num_classes = 0;
    std::optional<NormStats> stats;

    std::size_t size() const { return images.size(); }
    TensorShape image_shape() const { return images.empty() ? TensorShape{} : images[0].shape; }
};

void validate(const Dataset& data);

/// Per-sample binary attribute annotations.
struct AttributeTable {
    std::vector<std::string> names;
    MatrixRX<int> values;  // rows: samples, entries in {0, 1}

    int attribute_count() const { return static_cast<int>(names.size()); }
};

/// One synthetic visual factor: present with probability `frequency`,
/// optionally agreeing with an earlier factor's draw w.p. `agreement`
/// (which induces correlation while preserving the marginal when the
/// linked frequencies match).
struct AttributeFactor {
    std::string name;
    double frequency = 0.5;
    int linked_to = -1;
    double agreement = 0.0;
};

/// Class-conditional images: per-class smooth template scaled by
/// `separation`, plus i.i.d. pixel noise (sigma 0.1). Deterministic in
/// the seed, byte for byte.
Dataset gen_blob_images(std::uint64_t seed, int num_classes, int per_class, int image_size,
                        double separation);

/// Blob images augmented with additive visual factors recorded as binary
/// attributes. Rejects factors whose frequency is outside (0, 1).
std::pair<Dataset, AttributeTable> gen_attributed_toy(std::uint64_t seed, int num_classes,
                                                      int per_class,
                                                      const std::vector<AttributeFactor>& spec,
                                                      int image_size = 16);

/// Split into the first `per_class_train` samples of every class (in
/// dataset order) and the rest; row index lists allow attribute tables
/// to follow the split.
struct DatasetSplit {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

DatasetSplit split_by_class(const Dataset& data, int per_class_train);

NormStats compute_norm_stats(const Dataset& train);

Tensorf normalize_image(const Tensorf& image, const NormStats& stats);
std::vector<Tensorf> normalize_images(const std::vector<Tensorf>& images,
                                      const NormStats& stats);

/// Per-channel [lo, hi] of the normalized space, i.e. the image of
/// [0, 1] under (x - mean) / std. Noise drawn for masking is clamped to
/// this range.
std::pair<Eigen::VectorXf, Eigen::VectorXf> normalized_range(const NormStats& stats);

}  // namespace kmex
