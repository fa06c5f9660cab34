#include "kmex/metrics.hpp"

#include "kmex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kmex {

double ghosting_score(const PrototypeSet& protos, const MatrixRXf& embeddings) {
    validate(protos);
    require(embeddings.rows() > 0, "ghosting: empty embedding set");
    require(embeddings.cols() == protos.dim(), "ghosting: embedding dimension ",
            embeddings.cols(), " does not match prototype dimension ", protos.dim());
    std::vector<char> activated(static_cast<std::size_t>(protos.count()), 0);
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i) {
        activated[static_cast<std::size_t>(
            nearest_prototype(protos, embeddings.row(i).transpose()))] = 1;
    }
    const auto used = std::count(activated.begin(), activated.end(), 1);
    return 1.0 - static_cast<double>(used) / static_cast<double>(protos.count());
}

double diversity_score(const PrototypeSet& protos) {
    const Eigen::Index total = protos.count();
    require(total >= 2, "diversity: undefined for fewer than 2 prototypes, got ", total);
    double entropy_sum = 0.0;
    Eigen::VectorXd sims(total);
    for (Eigen::Index r = 0; r < total; ++r) {
        for (Eigen::Index q = 0; q < total; ++q) {
            sims[q] = similarity_score(protos.similarity, protos.vectors.row(r).transpose(),
                                       protos.vectors.row(q).transpose());
        }
        const double peak = sims.maxCoeff();
        double z = 0.0;
        for (Eigen::Index q = 0; q < total; ++q) z += std::exp(sims[q] - peak);
        double entropy = 0.0;
        for (Eigen::Index q = 0; q < total; ++q) {
            const double p = std::exp(sims[q] - peak) / z;
            if (p > 0.0) entropy -= p * std::log(p);
        }
        entropy_sum += entropy;
    }
    return entropy_sum / (static_cast<double>(total) * std::log(static_cast<double>(total)));
}

namespace {

template <class Scalar>
NormalizedRelevance normalize_relevance_impl(const RelevanceMap<Scalar>& map) {
    require(map.values.allFinite(), "normalize_relevance: non-finite relevance");
    const int h = map.shape.height, w = map.shape.width;
    const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
    NormalizedRelevance out;
    out.grid.resize(h, w);
    double total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double peak = 0.0;
            for (int c = 0; c < map.shape.channels; ++c) {
                peak = std::max(peak, std::abs(static_cast<double>(
                                          map.values[c * plane + y * w + x])));
            }
            out.grid(y, x) = peak;
            total += peak;
        }
    }
    if (total == 0.0) {
        out.grid.setConstant(1.0 / static_cast<double>(plane));
        out.degenerate = true;
        return out;
    }
    out.grid /= total;
    out.grid /= out.grid.sum();  // exact renormalization in double
    return out;
}

}  // namespace

NormalizedRelevance normalize_relevance(const RelevanceMap<float>& map) {
    return normalize_relevance_impl(map);
}
NormalizedRelevance normalize_relevance(const RelevanceMap<double>& map) {
    return normalize_relevance_impl(map);
}

double explanation_divergence(const NormalizedRelevance& sem, const NormalizedRelevance& bbox) {
    require(sem.grid.rows() == bbox.grid.rows() && sem.grid.cols() == bbox.grid.cols(),
            "divergence: map shapes differ (", sem.grid.rows(), "x", sem.grid.cols(), " vs ",
            bbox.grid.rows(), "x", bbox.grid.cols(), ")");
    const Eigen::ArrayXXd p_raw = sem.grid + 1e-12;
    const Eigen::ArrayXXd q_raw = bbox.grid + 1e-12;
    const Eigen::ArrayXXd p = p_raw / p_raw.sum();
    const Eigen::ArrayXXd q = q_raw / q_raw.sum();
    const double kl = (p * (p / q).log()).sum();
    return std::max(kl, 0.0);
}

std::string to_string(ROCurve::Mode mode) {
    return mode == ROCurve::Mode::relevance_ordered ? "relevance" : "random";
}

ROCurve relevance_order_curve(const ProbabilityFn& probabilities, const Tensorf& image,
                              const Eigen::ArrayXXd& pixel_relevance, int steps,
                              std::uint64_t seed, ROCurve::Mode mode,
                              const Eigen::VectorXf& noise_lo, const Eigen::VectorXf& noise_hi) {
    require(steps >= 1, "ro_curve: need at least 1 step, got ", steps);
    require(pixel_relevance.rows() == image.shape.height &&
                pixel_relevance.cols() == image.shape.width,
            "ro_curve: relevance shape ", pixel_relevance.rows(), "x", pixel_relevance.cols(),
            " does not match image ", image.shape.str());
    require(noise_lo.size() == image.shape.channels && noise_hi.size() == image.shape.channels,
            "ro_curve: clamp range must have one entry per channel");

    const Eigen::VectorXd base = probabilities(image);
    require(base.size() >= 1 && base.minCoeff() >= -1e-9 &&
                std::abs(base.sum() - 1.0) <= 1e-6,
            "ro_curve: model head is not probabilistic (outputs must be a distribution)");
    const int fixed_class = argmax_index(base);

    const Eigen::Index plane =
        static_cast<Eigen::Index>(image.shape.height) * image.shape.width;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(plane));
    std::iota(order.begin(), order.end(), 0);
    if (mode == ROCurve::Mode::relevance_ordered) {
        const int w = image.shape.width;
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            const double ra = pixel_relevance(a / w, a % w);
            const double rb = pixel_relevance(b / w, b % w);
            if (ra != rb) return ra < rb;
            return a < b;  // flat pixel index h*width + w
        });
    } else {
        Rng rng(split_seed(seed, "ro-order"));
        rng.shuffle(order.begin(), order.end());
    }

    // One clamped unit-Gaussian noise field per curve, drawn pixel-major.
    Rng noise_rng(split_seed(seed, "ro-noise"));
    MatrixRXf noise(plane, image.shape.channels);
    for (Eigen::Index p = 0; p < plane; ++p) {
        for (int c = 0; c < image.shape.channels; ++c) {
            noise(p, c) = std::clamp(static_cast<float>(noise_rng.normal()), noise_lo[c],
                                     noise_hi[c]);
        }
    }

    ROCurve curve;
    curve.mode = mode;
    Tensorf masked = image;
    Eigen::Index masked_count = 0;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const auto target = static_cast<Eigen::Index>(t * static_cast<double>(plane));
        for (; masked_count < target; ++masked_count) {
            const Eigen::Index pixel = order[static_cast<std::size_t>(masked_count)];
            for (int c = 0; c < image.shape.channels; ++c) {
                masked.data[c * plane + pixel] = noise(pixel, c);
            }
        }
        const Eigen::VectorXd probs = i == 0 ? base : probabilities(masked);
        curve.fractions.push_back(t);
        curve.mean.push_back(probs[fixed_class]);
        curve.stddev.push_back(0.0);
    }
    return curve;
}

double area_under_curve(const ROCurve& curve) {
    require(curve.fractions.size() >= 2, "auroc: curve needs at least 2 points");
    require(curve.fractions.size() == curve.mean.size(), "auroc: malformed curve");
    double area = 0.0;
    for (std::size_t i = 1; i < curve.fractions.size(); ++i) {
        const double df = curve.fractions[i] - curve.fractions[i - 1];
        require(df > 0.0, "auroc: fractions must be strictly increasing");
        area += df * 0.5 * (curve.mean[i] + curve.mean[i - 1]);
    }
    return area / (curve.fractions.back() - curve.fractions.front());
}

ROCurve aggregate_curves(const std::vector<ROCurve>& curves) {
    require(!curves.empty(), "aggregate: no curves");
    const std::size_t points = curves[0].fractions.size();
    ROCurve out;
    out.mode = curves[0].mode;
    out.fractions = curves[0].fractions;
    out.mean.assign(points, 0.0);
    out.stddev.assign(points, 0.0);
    for (const auto& c : curves) {
        require(c.fractions == out.fractions, "aggregate: curves have different fractions");
        require(c.mode == out.mode, "aggregate: curves have different modes");
        for (std::size_t i = 0; i < points; ++i) out.mean[i] += c.mean[i];
    }
    for (std::size_t i = 0; i < points; ++i) {
        out.mean[i] /= static_cast<double>(curves.size());
    }
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < points; ++i) {
            const double d = c.mean[i] - out.mean[i];
            out.stddev[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < points; ++i) {
        out.stddev[i] = std::sqrt(out.stddev[i] / static_cast<double>(curves.size()));
    }
    return out;
}

AccuracyResult accuracy_faithfulness(const ProbabilityFn& base, const ProbabilityFn& sem,
                                     const std::vector<Tensorf>& images,
                                     const std::vector<int>& labels) {
    require(!images.empty(), "accuracy: empty evaluation set");
    require(images.size() == labels.size(), "accuracy: ", images.size(), " images vs ",
            labels.size(), " labels");
    int base_hits = 0, sem_hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (argmax_index(base(images[i])) + 1 == labels[i]) ++base_hits;
        if (argmax_index(sem(images[i])) + 1 == labels[i]) ++sem_hits;
    }
    AccuracyResult result;
    result.base_percent = 100.0 * base_hits / static_cast<double>(images.size());
    result.sem_percent = 100.0 * sem_hits / static_cast<double>(images.size());
    result.delta_points = result.base_percent - result.sem_percent;
    return result;
}

int captured_attributes(const PrototypeSet& protos, const AttributeTable& table) {
    require(table.attribute_count() > 0, "attributes: empty table");
    int captured = 0;
    for (int a = 0; a < table.attribute_count(); ++a) {
        for (const auto rep : protos.representative) {
            require(rep < table.values.rows(), "attributes: representative ", rep,
                    " outside table of ", table.values.rows(), " rows");
            if (table.values(static_cast<Eigen::Index>(rep), a) == 1) {
                ++captured;
                break;
            }
        }
    }
    return captured;
}

namespace {

/// Pearson correlation matrix of binary columns; zero-variance columns
/// yield 0 against everything.
Eigen::MatrixXd correlation_matrix(const MatrixRX<int>& rows, bool& degenerate) {
    const Eigen::Index n = rows.rows(), a = rows.cols();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(a);
    for (Eigen::Index j = 0; j < a; ++j) {
        mean[j] = rows.col(j).cast<double>().mean();
    }
    Eigen::VectorXd variance = Eigen::VectorXd::Zero(a);
    for (Eigen::Index j = 0; j < a; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = rows(i, j) - mean[j];
            variance[j] += d * d;
        }
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(a, a);
    for (Eigen::Index i = 0; i < a; ++i) {
        for (Eigen::Index j = i + 1; j < a; ++j) {
            if (variance[i] == 0.0 || variance[j] == 0.0) {
                corr(i, j) = corr(j, i) = 0.0;
                degenerate = true;
                continue;
            }
            double cov = 0.0;
            for (Eigen::Index r = 0; r < n; ++r) {
                cov += (rows(r, i) - mean[i]) * (rows(r, j) - mean[j]);
            }
            corr(i, j) = corr(j, i) = cov / std::sqrt(variance[i] * variance[j]);
        }
    }
    return corr;
}

}  // namespace

double attribute_correlation_mae_from_tables(const MatrixRX<int>& train,
                                             const MatrixRX<int>& protos,
                                             bool* degenerate_out) {
    require(train.cols() == protos.cols(), "attribute mae: column counts differ");
    require(train.cols() >= 2, "attribute mae: need at least 2 attributes");
    require(train.rows() >= 1 && protos.rows() >= 1, "attribute mae: empty table");
    bool degenerate = false;
    const Eigen::MatrixXd train_corr = correlation_matrix(train, degenerate);
    const Eigen::MatrixXd proto_corr = correlation_matrix(protos, degenerate);
    double total = 0.0;
    Eigen::Index pairs = 0;
    for (Eigen::Index i = 0; i < train.cols(); ++i) {
        for (Eigen::Index j = 0; j < train.cols(); ++j) {
            if (i == j) continue;
            total += std::abs(train_corr(i, j) - proto_corr(i, j));
            ++pairs;
        }
    }
    if (degenerate_out) *degenerate_out = degenerate;
    return total / static_cast<double>(pairs);
}

double attribute_correlation_mae(const PrototypeSet& protos, const AttributeTable& table,
                                 bool* degenerate_out) {
    MatrixRX<int> rep_rows(protos.count(), table.values.cols());
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        const auto rep = protos.representative[static_cast<std::size_t>(r)];
        require(rep < table.values.rows(), "attributes: representative ", rep,
                " outside table of ", table.values.rows(), " rows");
        rep_rows.row(r) = table.values.row(static_cast<Eigen::Index>(rep));
    }
    return attribute_correlation_mae_from_tables(table.values, rep_rows, degenerate_out);
}

RadarScores radar_summary(double ghosting, double acc_base_percent, double acc_sem_percent,
                          double divergence_mean, double auroc_mean, double diversity) {
    RadarScores scores;
    scores.transparency = 1.0 - ghosting;
    scores.acc_faithfulness =
        std::max(0.0, 1.0 - (acc_base_percent - acc_sem_percent) / 5.0);
    scores.expl_faithfulness = 1.0 - std::min(divergence_mean, 2.0) / 2.0;
    scores.expl_robustness = auroc_mean;
    scores.diversity = 1.0 - diversity;
    return scores;
}

}  // namespace kmex
