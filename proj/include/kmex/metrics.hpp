#pragma once

#include "kmex/prototypes.hpp"
#include "kmex/relevance.hpp"

#include <functional>
#include <vector>

namespace kmex {

/// Share of prototypes that are never the globally most similar one for
/// any training embedding. 0 means every prototype is used.
double ghosting_score(const PrototypeSet& protos, const MatrixRXf& embeddings);

/// Mean normalized entropy of the softmaxed inter-prototype similarities
/// (ghosted prototypes included). 1 on full collapse, towards 0 for well
/// spread prototypes. Undefined (rejected) for fewer than 2 prototypes.
double diversity_score(const PrototypeSet& protos);

/// Relevance collapsed to a pixel distribution: channel-wise max of the
/// absolute relevance, divided by its spatial sum.
struct NormalizedRelevance {
    Eigen::ArrayXXd grid;  // (height, width), nonnegative, sums to 1
    bool degenerate = false;
};

NormalizedRelevance normalize_relevance(const RelevanceMap<float>& map);
NormalizedRelevance normalize_relevance(const RelevanceMap<double>& map);

/// KL divergence (natural log) of the SEM map from the black-box map,
/// both smoothed by 1e-12 and renormalized so sparse maps stay finite.
double explanation_divergence(const NormalizedRelevance& sem, const NormalizedRelevance& bbox);

using ProbabilityFn = std::function<Eigen::VectorXd(const Tensorf&)>;

struct ROCurve {
    enum class Mode { relevance_ordered, random_baseline };
    std::vector<double> fractions;  // strictly increasing, 0 .. 1
    std::vector<double> mean;       // predicted-class probability
    std::vector<double> stddev;
    Mode mode = Mode::relevance_ordered;
};

std::string to_string(ROCurve::Mode mode);

/// Predicted-class probability as the least relevant pixels are replaced
/// by clamped unit-Gaussian noise (in normalized pixel space). The
/// predicted class is fixed at fraction 0; ties in the relevance order
/// break toward the lower flat pixel index; random mode masks a seeded
/// random pixel order instead.
ROCurve relevance_order_curve(const ProbabilityFn& probabilities, const Tensorf& image,
                              const Eigen::ArrayXXd& pixel_relevance, int steps,
                              std::uint64_t seed, ROCurve::Mode mode,
                              const Eigen::VectorXf& noise_lo, const Eigen::VectorXf& noise_hi);

/// Trapezoidal area under the curve over the fraction axis, in [0, 1]
/// for probability curves.
double area_under_curve(const ROCurve& curve);

/// Pointwise mean/std (population) across per-image curves.
ROCurve aggregate_curves(const std::vector<ROCurve>& curves);

struct AccuracyResult {
    double base_percent = 0.0;
    double sem_percent = 0.0;
    double delta_points = 0.0;  // base - sem
};

AccuracyResult accuracy_faithfulness(const ProbabilityFn& base, const ProbabilityFn& sem,
                                     const std::vector<Tensorf>& images,
                                     const std::vector<int>& labels);

/// Number of attributes active in at least one representative image.
int captured_attributes(const PrototypeSet& protos, const AttributeTable& table);

/// Mean absolute error between the off-diagonal entries of the attribute
/// Pearson-correlation matrices of the training set and of the
/// prototypes' representative images. Zero-variance columns contribute
/// correlation 0 by convention (reported via `degenerate_out`).
double attribute_correlation_mae(const PrototypeSet& protos, const AttributeTable& table,
                                 bool* degenerate_out = nullptr);

/// The computation core on raw 0/1 tables (rows: samples).
double attribute_correlation_mae_from_tables(const MatrixRX<int>& train,
                                             const MatrixRX<int>& protos,
                                             bool* degenerate_out = nullptr);

/// The five radar axes, all oriented so that larger is better; the
/// accuracy axis may exceed 1 when the converted model beats its base.
struct RadarScores {
    double transparency = 0.0;       // 1 - ghosting
    double acc_faithfulness = 0.0;   // 1 - (acc_base - acc_sem)/5, floored at 0
    double expl_faithfulness = 0.0;  // 1 - min(divergence, 2)/2
    double expl_robustness = 0.0;    // mean AUROC
    double diversity = 0.0;          // 1 - diversity score
};

RadarScores radar_summary(double ghosting, double acc_base_percent, double acc_sem_percent,
                          double divergence_mean, double auroc_mean, double diversity);

}  // namespace kmex
