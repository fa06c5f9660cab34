#pragma once

#include "kmex/dataset.hpp"

#include <string>

namespace kmex {

/// Load an MNIST-style IDX image/label pair. Supports unsigned-byte
/// (0x08, values scaled to [0,1]) and float32 (0x0D) payloads, 3-D
/// (N,H,W) or 4-D (N,C,H,W) image files and 1-D label files. On-disk
/// labels are 0-based (MNIST convention); the loaded dataset is 1-based.
/// `limit` > 0 keeps exactly the first `limit` samples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit = 0);

/// Write images as float32 IDX: 3-D for single-channel data, 4-D otherwise.
void write_idx_images(const std::string& path, const std::vector<Tensorf>& images);

/// Write labels as unsigned-byte IDX, converting to the 0-based on-disk
/// convention.
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

}  // namespace kmex
