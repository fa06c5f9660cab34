#include "kmex/evaluate.hpp"

#include "kmex/parallel.hpp"
#include "kmex/rng.hpp"

#include <cmath>
#include <numeric>

namespace kmex {

ProbabilityFn black_box_probabilities(const LayerStack& stack,
                                      const WeightStore<float>& weights) {
    return [&stack, &weights](const Tensorf& x) {
        return class_probabilities(stack, weights, x).cast<double>().eval();
    };
}

ProbabilityFn prototype_probabilities(const LayerStack& stack,
                                      const WeightStore<float>& weights,
                                      const PrototypeSet& protos) {
    return [&stack, &weights, &protos](const Tensorf& x) {
        return class_scores(protos, embed(stack, weights, x));
    };
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

}  // namespace

MetricReport evaluate_single(const LayerStack& stack, const WeightStore<float>& weights,
                             const NormStats& stats, const Dataset& train,
                             const Dataset& test, const AttributeTable* attributes,
                             const EvalConfig& config, std::uint64_t seed) {
    validate(stack);
    validate(train);
    validate(test);
    if (attributes) {
        require(attributes->values.rows() == static_cast<Eigen::Index>(train.size()),
                "evaluate: attribute table has ", attributes->values.rows(),
                " rows for ", train.size(), " training samples");
    }

    const auto train_images = normalize_images(train.images, stats);
    const auto test_images = normalize_images(test.images, stats);
    const auto [noise_lo, noise_hi] = normalized_range(stats);

    ConvertConfig convert_config;
    convert_config.per_class_count = config.per_class_count;
    convert_config.similarity = config.similarity;
    convert_config.seed = seed;
    convert_config.restarts = config.restarts;
    convert_config.subsample = config.subsample;
    convert_config.bisecting = config.bisecting;

    log_debug("seed ", seed, ": embedding ", train_images.size(), " training samples");
    const Embeddings embeddings =
        embed_dataset(stack, weights, train_images, "", config.threads);
    const PrototypeSet protos = prototypes_from_embeddings(
        embeddings, train.labels, train.num_classes, convert_config, config.threads);

    MetricReport report;
    report.seed = seed;

    const auto bbox_probs = black_box_probabilities(stack, weights);
    const auto sem_probs = prototype_probabilities(stack, weights, protos);
    report.accuracy = accuracy_faithfulness(bbox_probs, sem_probs, test_images, test.labels);
    report.d_tsp = ghosting_score(protos, embeddings.matrix);
    report.d_dvs = diversity_score(protos);

    // Seeded selection of evaluation images from the test split.
    std::vector<std::size_t> pool(test_images.size());
    std::iota(pool.begin(), pool.end(), 0);
    Rng pick_rng(split_seed(seed, "eval-images"));
    pick_rng.shuffle(pool.begin(), pool.end());
    const std::size_t count =
        std::min<std::size_t>(pool.size(), static_cast<std::size_t>(config.eval_images));
    pool.resize(count);

    std::vector<double> divergences(count);
    std::vector<ROCurve> sem_rel(count), sem_rand(count), bbox_rel(count), bbox_rand(count);

    log_debug("seed ", seed, ": explanation metrics over ", count, " images");
    parallel_for(static_cast<std::int64_t>(count), config.threads, [&](std::int64_t i) {
        const Tensorf& x = test_images[pool[static_cast<std::size_t>(i)]];
        const std::uint64_t image_seed = split_seed(seed, "eval-image", i);

        const auto bbox_map = lrp_prediction_map(stack, weights, x, config.lrp_epsilon);
        const auto sem_map =
            class_probability_map(stack, weights, protos, x, config.lrp_epsilon);
        divergences[i] =
            explanation_divergence(normalize_relevance(sem_map), normalize_relevance(bbox_map));

        const auto prp = normalize_relevance(
            prp_map_nearest(stack, weights, protos, x, config.lrp_epsilon));
        sem_rel[i] = relevance_order_curve(sem_probs, x, prp.grid, config.ro_steps,
                                           image_seed, ROCurve::Mode::relevance_ordered,
                                           noise_lo, noise_hi);
        sem_rand[i] = relevance_order_curve(sem_probs, x, prp.grid, config.ro_steps,
                                            image_seed, ROCurve::Mode::random_baseline,
                                            noise_lo, noise_hi);
        const auto lrp = normalize_relevance(bbox_map);
        bbox_rel[i] = relevance_order_curve(bbox_probs, x, lrp.grid, config.ro_steps,
                                            image_seed, ROCurve::Mode::relevance_ordered,
                                            noise_lo, noise_hi);
        bbox_rand[i] = relevance_order_curve(bbox_probs, x, lrp.grid, config.ro_steps,
                                             image_seed, ROCurve::Mode::random_baseline,
                                             noise_lo, noise_hi);
    });

    report.d_fdl_per_image = divergences;
    std::tie(report.d_fdl_mean, report.d_fdl_std) = mean_std(divergences);

    std::vector<double> sem_rel_auc(count), sem_rand_auc(count);
    for (std::size_t i = 0; i < count; ++i) {
        sem_rel_auc[i] = area_under_curve(sem_rel[i]);
        sem_rand_auc[i] = area_under_curve(sem_rand[i]);
    }
    std::tie(report.auroc_mean, report.auroc_std) = mean_std(sem_rel_auc);
    std::tie(report.auroc_random_mean, report.auroc_random_std) = mean_std(sem_rand_auc);

    report.curve_labels = {"kmex_relevance", "kmex_random", "bbox_relevance", "bbox_random"};
    report.curves = {aggregate_curves(sem_rel), aggregate_curves(sem_rand),
                     aggregate_curves(bbox_rel), aggregate_curves(bbox_rand)};

    if (attributes) {
        report.has_attributes = true;
        report.captured_attribute_count = captured_attributes(protos, *attributes);
        report.attribute_mae = attribute_correlation_mae(protos, *attributes);
    }

    report.radar = radar_summary(report.d_tsp, report.accuracy.base_percent,
                                 report.accuracy.sem_percent, report.d_fdl_mean,
                                 report.auroc_mean, report.d_dvs);
    return report;
}

AggregateReport evaluate_model(const LayerStack& stack, const WeightStore<float>& weights,
                               const NormStats& stats, const Dataset& train,
                               const Dataset& test, const AttributeTable* attributes,
                               const EvalConfig& config,
                               const std::vector<std::uint64_t>& seeds) {
    require(!seeds.empty(), "evaluate: no seeds");
    AggregateReport report;
    for (const auto seed : seeds) {
        log_info("evaluating seed ", seed);
        report.runs.push_back(
            evaluate_single(stack, weights, stats, train, test, attributes, config, seed));
    }
    return report;
}

}  // namespace kmex
