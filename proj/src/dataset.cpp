#include "kmex/dataset.hpp"

#include "kmex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kmex {

void validate(const Dataset& data) {
    require(!data.images.empty(), "dataset: empty");
    require(data.images.size() == data.labels.size(), "dataset: ", data.images.size(),
            " images vs ", data.labels.size(), " labels");
    require(data.num_classes >= 1, "dataset: class count must be >= 1");
    std::vector<int> counts(data.num_classes, 0);
    const TensorShape shape = data.images[0].shape;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        require(data.images[i].shape == shape, "dataset: image ", i, " has shape ",
                data.images[i].shape.str(), ", expected ", shape.str());
        const int label = data.labels[i];
        require(label >= 1 && label <= data.num_classes, "dataset: label ", label,
                " outside [1..", data.num_classes, "]");
        ++counts[label - 1];
    }
    for (int k = 0; k < data.num_classes; ++k) {
        require(counts[k] >= 1, "dataset: class ", k + 1, " has no samples");
    }
}

namespace {

/// Smooth low-frequency pattern in [-1, 1], a sum of three seeded
/// plane-wave cosines.
Eigen::ArrayXXf smooth_pattern(Rng& rng, int size) {
    Eigen::ArrayXXd grid = Eigen::ArrayXXd::Zero(size, size);
    for (int wave = 0; wave < 3; ++wave) {
        const double fy = 1.0 + rng.uniform() * 2.0;
        const double fx = 1.0 + rng.uniform() * 2.0;
        const double phase = rng.uniform() * 2.0 * std::numbers::pi;
        const double amp = 0.5 + rng.uniform();
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                grid(y, x) += amp * std::cos(2.0 * std::numbers::pi *
                                                 (fy * y + fx * x) / size +
                                             phase);
            }
        }
    }
    const double peak = grid.abs().maxCoeff();
    if (peak > 0) grid /= peak;
    return grid.cast<float>();
}

Tensorf compose_image(const Eigen::ArrayXXf& base, Rng& noise_rng, int size) {
    Tensorf img(TensorShape{1, size, size});
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const float noisy = base(y, x) + static_cast<float>(0.1 * noise_rng.normal());
            img(0, y, x) = std::clamp(noisy, 0.0f, 1.0f);
        }
    }
    return img;
}

}  // namespace

Dataset gen_blob_images(std::uint64_t seed, int num_classes, int per_class, int image_size,
                        double separation) {
    require(num_classes >= 1, "gen_blob_images: class count must be >= 1");
    require(per_class >= 1, "gen_blob_images: per-class count must be >= 1");
    require(image_size >= 4, "gen_blob_images: image size must be >= 4");
    require(separation >= 0.0, "gen_blob_images: separation must be >= 0, got ", separation);

    std::vector<Eigen::ArrayXXf> templates;
    templates.reserve(num_classes);
    const float amplitude = static_cast<float>(0.05 * separation);
    for (int k = 0; k < num_classes; ++k) {
        Rng rng(split_seed(seed, "class-template", k));
        templates.push_back(0.5f + amplitude * smooth_pattern(rng, image_size));
    }

    Dataset data;
    data.num_classes = num_classes;
    data.images.reserve(static_cast<std::size_t>(num_classes) * per_class);
    data.labels.reserve(data.images.capacity());
    for (int k = 0; k < num_classes; ++k) {
        for (int s = 0; s < per_class; ++s) {
            Rng noise(split_seed(seed, "sample-noise",
                                 static_cast<std::uint64_t>(k) * per_class + s));
            data.images.push_back(compose_image(templates[k], noise, image_size));
            data.labels.push_back(k + 1);
        }
    }
    return data;
}

namespace {

/// Each factor owns a localized seeded patch pattern; when the factor is
/// present the patch is added to the image before noise.
Eigen::ArrayXXf factor_pattern(Rng& rng, int size) {
    Eigen::ArrayXXf patch = Eigen::ArrayXXf::Zero(size, size);
    const int extent = std::max(2, size / 4);
    const int y0 = static_cast<int>(rng.uniform_int(size - extent));
    const int x0 = static_cast<int>(rng.uniform_int(size - extent));
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (int y = 0; y < extent; ++y) {
        for (int x = 0; x < extent; ++x) {
            patch(y0 + y, x0 + x) = static_cast<float>(
                sign * (0.5 + 0.5 * std::cos(std::numbers::pi * (x + y) / extent)));
        }
    }
    return patch;
}

}  // namespace

std::pair<Dataset, AttributeTable> gen_attributed_toy(std::uint64_t seed, int num_classes,
                                                      int per_class,
                                                      const std::vector<AttributeFactor>& spec,
                                                      int image_size) {
    require(spec.size() >= 4, "gen_attributed_toy: need at least 4 factors, got ",
            spec.size());
    for (std::size_t f = 0; f < spec.size(); ++f) {
        require(spec[f].frequency > 0.0 && spec[f].frequency < 1.0,
                "gen_attributed_toy: factor \"", spec[f].name,
                "\" frequency must lie in (0, 1), got ", spec[f].frequency);
        require(spec[f].linked_to < static_cast<int>(f),
                "gen_attributed_toy: factor \"", spec[f].name,
                "\" may only link to an earlier factor");
        require(spec[f].agreement >= 0.0 && spec[f].agreement <= 1.0,
                "gen_attributed_toy: agreement must lie in [0, 1]");
    }

    std::vector<Eigen::ArrayXXf> class_templates;
    const float class_amp = 0.2f;
    for (int k = 0; k < num_classes; ++k) {
        Rng rng(split_seed(seed, "class-template", k));
        class_templates.push_back(0.45f + class_amp * smooth_pattern(rng, image_size));
    }
    std::vector<Eigen::ArrayXXf> patterns;
    for (std::size_t f = 0; f < spec.size(); ++f) {
        Rng rng(split_seed(seed, "factor-pattern", f));
        patterns.push_back(factor_pattern(rng, image_size));
    }

    Dataset data;
    data.num_classes = num_classes;
    AttributeTable table;
    for (const auto& factor : spec) table.names.push_back(factor.name);
    const std::size_t total = static_cast<std::size_t>(num_classes) * per_class;
    table.values = MatrixRX<int>::Zero(total, static_cast<int>(spec.size()));

    const float factor_amp = 0.35f;
    std::size_t row = 0;
    for (int k = 0; k < num_classes; ++k) {
        for (int s = 0; s < per_class; ++s, ++row) {
            Rng rng(split_seed(seed, "attributed-sample", row));
            Eigen::ArrayXXf canvas = class_templates[k];
            for (std::size_t f = 0; f < spec.size(); ++f) {
                int present;
                if (spec[f].linked_to >= 0 && rng.uniform() < spec[f].agreement) {
                    present = table.values(row, spec[f].linked_to);
                } else {
                    present = rng.uniform() < spec[f].frequency ? 1 : 0;
                }
                table.values(row, static_cast<int>(f)) = present;
                if (present) canvas += factor_amp * patterns[f];
            }
            data.images.push_back(compose_image(canvas, rng, image_size));
            data.labels.push_back(k + 1);
        }
    }
    return {std::move(data), std::move(table)};
}

DatasetSplit split_by_class(const Dataset& data, int per_class_train) {
    validate(data);
    require(per_class_train >= 1, "split: per-class train count must be >= 1");
    DatasetSplit split;
    split.train.num_classes = data.num_classes;
    split.test.num_classes = data.num_classes;
    std::vector<int> seen(data.num_classes, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        Dataset& side = seen[data.labels[i] - 1]++ < per_class_train ? split.train : split.test;
        auto& rows = &side == &split.train ? split.train_rows : split.test_rows;
        side.images.push_back(data.images[i]);
        side.labels.push_back(data.labels[i]);
        rows.push_back(i);
    }
    validate(split.train);
    validate(split.test);
    return split;
}

NormStats compute_norm_stats(const Dataset& train) {
    validate(train);
    const TensorShape shape = train.image_shape();
    const Eigen::Index plane = static_cast<Eigen::Index>(shape.height) * shape.width;
    NormStats stats;
    stats.mean = Eigen::VectorXf::Zero(shape.channels);
    stats.stddev = Eigen::VectorXf::Zero(shape.channels);
    for (int c = 0; c < shape.channels; ++c) {
        double total = 0.0;
        for (const auto& img : train.images) {
            for (Eigen::Index i = 0; i < plane; ++i) {
                total += static_cast<double>(img.data[c * plane + i]);
            }
        }
        const double n = static_cast<double>(train.images.size()) * plane;
        const double mean = total / n;
        double var = 0.0;
        for (const auto& img : train.images) {
            for (Eigen::Index i = 0; i < plane; ++i) {
                const double d = static_cast<double>(img.data[c * plane + i]) - mean;
                var += d * d;
            }
        }
        stats.mean[c] = static_cast<float>(mean);
        stats.stddev[c] = static_cast<float>(std::max(std::sqrt(var / n), 1e-6));
    }
    return stats;
}

Tensorf normalize_image(const Tensorf& image, const NormStats& stats) {
    require(image.shape.channels == stats.mean.size(),
            "normalize: stats cover ", stats.mean.size(), " channels, image has ",
            image.shape.channels);
    Tensorf out(image.shape);
    const Eigen::Index plane = static_cast<Eigen::Index>(image.shape.height) * image.shape.width;
    for (int c = 0; c < image.shape.channels; ++c) {
        out.data.segment(c * plane, plane) =
            (image.data.segment(c * plane, plane).array() - stats.mean[c]) / stats.stddev[c];
    }
    return out;
}

std::vector<Tensorf> normalize_images(const std::vector<Tensorf>& images,
                                      const NormStats& stats) {
    std::vector<Tensorf> out;
    out.reserve(images.size());
    for (const auto& img : images) out.push_back(normalize_image(img, stats));
    return out;
}

std::pair<Eigen::VectorXf, Eigen::VectorXf> normalized_range(const NormStats& stats) {
    Eigen::VectorXf lo = (-stats.mean.array() / stats.stddev.array()).matrix();
    Eigen::VectorXf hi = ((1.0f - stats.mean.array()) / stats.stddev.array()).matrix();
    return {lo, hi};
}

}  // namespace kmex
