#pragma once

#include "kmex/dataset.hpp"
#include "kmex/embedding.hpp"

#include <string>
#include <vector>

namespace kmex {

/// Embedding file (*.kmx): magic "KMEX", then version, row count n and
/// dimension d as unsigned 64-bit little-endian, then n*d float32
/// little-endian values row-major. Lossless for float data.
void save_embeddings(const std::string& path, const Embeddings& emb);
Embeddings load_embeddings(const std::string& path);

/// Label file (labels.kmx): magic "KMXL", version and n as unsigned
/// 64-bit little-endian, then n unsigned 32-bit little-endian 1-based
/// labels.
void save_labels_kmx(const std::string& path, const std::vector<int>& labels);
std::vector<int> load_labels_kmx(const std::string& path);

/// Human-readable CSV alternative for embeddings; float32 values printed
/// with 9 significant digits (lossy only in the textual sense).
void save_embeddings_csv(const std::string& path, const Embeddings& emb);
Embeddings load_embeddings_csv(const std::string& path);

/// attrs.csv: header row of attribute names, then one 0/1 row per sample.
void save_attributes_csv(const std::string& path, const AttributeTable& table);
AttributeTable load_attributes_csv(const std::string& path);

/// Write bytes to `path` via a temporary file plus rename, so failed
/// writes never leave partial outputs behind.
void atomic_write(const std::string& path, const std::string& bytes);

}  // namespace kmex
