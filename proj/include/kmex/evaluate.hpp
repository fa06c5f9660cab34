#pragma once

#include "kmex/dataset.hpp"
#include "kmex/model_io.hpp"
#include "kmex/report.hpp"

namespace kmex {

struct EvalConfig {
    std::vector<int> per_class_count = {5};
    Similarity similarity;
    int restarts = 5;
    int subsample = 0;
    int ro_steps = 50;
    int eval_images = 100;
    int threads = 1;
    double lrp_epsilon = 1e-6;
    bool bisecting = false;
};

/// Probability function of the original model over normalized inputs.
ProbabilityFn black_box_probabilities(const LayerStack& stack,
                                      const WeightStore<float>& weights);

/// Probability function of the converted model (softmax over per-class
/// best prototype similarities).
ProbabilityFn prototype_probabilities(const LayerStack& stack,
                                      const WeightStore<float>& weights,
                                      const PrototypeSet& protos);

/// Convert with the given seed and compute every metric for that seed.
/// Datasets carry raw [0,1] pixels; both splits are normalized with
/// `stats` (the training statistics).
MetricReport evaluate_single(const LayerStack& stack, const WeightStore<float>& weights,
                             const NormStats& stats, const Dataset& train,
                             const Dataset& test, const AttributeTable* attributes,
                             const EvalConfig& config, std::uint64_t seed);

/// Multi-seed evaluation with mean/std aggregation.
AggregateReport evaluate_model(const LayerStack& stack, const WeightStore<float>& weights,
                               const NormStats& stats, const Dataset& train,
                               const Dataset& test, const AttributeTable* attributes,
                               const EvalConfig& config,
                               const std::vector<std::uint64_t>& seeds);

}  // namespace kmex
