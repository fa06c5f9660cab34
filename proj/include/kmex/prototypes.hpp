#pragma once

#include "kmex/dataset.hpp"
#include "kmex/embedding.hpp"
#include "kmex/relevance.hpp"
#include "kmex/similarity.hpp"

#include <string>
#include <vector>

namespace kmex {

/// Per-class prototype vectors and bookkeeping: the transparent side of
/// a converted model. Prototypes are stored class-major, classes 1..K.
struct PrototypeSet {
    MatrixRXf vectors;                         // one prototype per row
    std::vector<int> proto_class;              // 1-based class id per row
    std::vector<int> proto_index;              // index within its class
    std::vector<double> importance;            // cluster-mass fraction, sums to 1 per class
    std::vector<std::uint32_t> representative; // nearest training sample per row
    Similarity similarity;
    std::string source;                        // producing model's hash tag
    int num_classes = 0;

    Eigen::Index count() const { return vectors.rows(); }
    Eigen::Index dim() const { return vectors.cols(); }
    int class_prototype_count(int class_id) const;
    Eigen::Index row_of(int class_id, int index) const;
};

void validate(const PrototypeSet& protos);

struct ConvertConfig {
    std::vector<int> per_class_count;  // one entry, or one per class
    Similarity similarity;
    std::uint64_t seed = 0;
    int restarts = 5;
    int max_iters = 100;
    int subsample = 0;  // 0: use every class sample for clustering
    bool bisecting = false;
};

/// Number of prototypes for class `class_id` (1-based) under the config.
int prototypes_for_class(const ConvertConfig& config, int class_id, int num_classes);

/// Embed every image through the encoder prefix.
Embeddings embed_dataset(const LayerStack& stack, const WeightStore<float>& weights,
                         const std::vector<Tensorf>& images, const std::string& source = "",
                         int threads = 1);

/// The conversion core: per-class k-means over given embeddings.
/// Importance is the fraction of the class's embeddings assigned to each
/// cluster; the representative is the class sample nearest (l2) to the
/// prototype.
PrototypeSet prototypes_from_embeddings(const Embeddings& embeddings,
                                        const std::vector<int>& labels, int num_classes,
                                        const ConvertConfig& config, int threads = 1);

/// Convert a trained model into its prototype-based form.
PrototypeSet convert(const LayerStack& stack, const WeightStore<float>& weights,
                     const std::vector<Tensorf>& normalized_images,
                     const std::vector<int>& labels, int num_classes,
                     const ConvertConfig& config, int threads = 1);

/// Index of the globally most similar prototype; ties break toward the
/// lowest (class, index) pair.
Eigen::Index nearest_prototype(const PrototypeSet& protos,
                               const Eigen::Ref<const Eigen::VectorXf>& z);

/// 1-nearest-prototype class label.
int classify(const PrototypeSet& protos, const Eigen::Ref<const Eigen::VectorXf>& z);

/// Softmax (temperature 1) over per-class best similarities.
Eigen::VectorXd class_scores(const PrototypeSet& protos,
                             const Eigen::Ref<const Eigen::VectorXf>& z);

/// SEM-side explanation map: the predicted-class probability decomposed
/// at the embedding via the similarity seeding rule and propagated back
/// through the encoder.
RelevanceMap<float> class_probability_map(const LayerStack& stack,
                                          const WeightStore<float>& weights,
                                          const PrototypeSet& protos, const Tensorf& x,
                                          double epsilon = 1e-6);

/// PRP map for the globally most similar prototype of x.
RelevanceMap<float> prp_map_nearest(const LayerStack& stack, const WeightStore<float>& weights,
                                    const PrototypeSet& protos, const Tensorf& x,
                                    double epsilon = 1e-6);

/// Feature vectors of the spatial positions feeding the global average
/// pool: one row per position, dimension = channels. Rejects models
/// without a global average pool.
MatrixRXf patch_features(const LayerStack& stack, const WeightStore<float>& weights,
                         const Tensorf& x);

/// Patch-level conversion: per-class k-means over all patch vectors of a
/// class's images.
PrototypeSet patch_convert(const LayerStack& stack, const WeightStore<float>& weights,
                           const std::vector<Tensorf>& normalized_images,
                           const std::vector<int>& labels, int num_classes,
                           const ConvertConfig& config, int threads = 1);

/// Majority vote over the per-patch nearest-prototype classes; vote ties
/// break toward the class with the greater summed similarity of its
/// winning patches, then the lowest class id.
int patch_classify(const LayerStack& stack, const WeightStore<float>& weights,
                   const PrototypeSet& protos, const Tensorf& x);

/// protos.kmx (embedding-format payload) + protos.json sidecar.
void save_prototypes(const std::string& kmx_path, const std::string& json_path,
                     const PrototypeSet& protos);
PrototypeSet load_prototypes(const std::string& kmx_path, const std::string& json_path);

}  // namespace kmex
