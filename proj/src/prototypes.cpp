#include "kmex/prototypes.hpp"

#include "kmex/kmeans.hpp"
#include "kmex/kmx_io.hpp"
#include "kmex/parallel.hpp"

#include <json.hpp>

#include <fstream>

namespace kmex {

int PrototypeSet::class_prototype_count(int class_id) const {
    int n = 0;
    for (int c : proto_class) {
        if (c == class_id) ++n;
    }
    return n;
}

Eigen::Index PrototypeSet::row_of(int class_id, int index) const {
    for (Eigen::Index r = 0; r < count(); ++r) {
        if (proto_class[r] == class_id && proto_index[r] == index) return r;
    }
    fail("prototype (", class_id, ", ", index, ") not found");
}

void validate(const PrototypeSet& protos) {
    const auto n = static_cast<std::size_t>(protos.count());
    require(n > 0, "prototypes: empty set");
    require(protos.proto_class.size() == n && protos.proto_index.size() == n &&
                protos.importance.size() == n && protos.representative.size() == n,
            "prototypes: field sizes disagree");
    require(protos.vectors.allFinite(), "prototypes: non-finite vectors");
    std::vector<double> class_mass(protos.num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        require(protos.proto_class[i] >= 1 && protos.proto_class[i] <= protos.num_classes,
                "prototypes: class id ", protos.proto_class[i], " out of range");
        class_mass[protos.proto_class[i] - 1] += protos.importance[i];
    }
    for (int k = 0; k < protos.num_classes; ++k) {
        require(std::abs(class_mass[k] - 1.0) <= 1e-6, "prototypes: class ", k + 1,
                " importance sums to ", class_mass[k], ", expected 1");
    }
}

int prototypes_for_class(const ConvertConfig& config, int class_id, int num_classes) {
    require(!config.per_class_count.empty(), "convert: prototypes-per-class missing");
    if (config.per_class_count.size() == 1) return config.per_class_count[0];
    require(static_cast<int>(config.per_class_count.size()) == num_classes,
            "convert: got ", config.per_class_count.size(),
            " per-class prototype counts for ", num_classes, " classes");
    return config.per_class_count[class_id - 1];
}

Embeddings embed_dataset(const LayerStack& stack, const WeightStore<float>& weights,
                         const std::vector<Tensorf>& images, const std::string& source,
                         int threads) {
    require(!images.empty(), "embed: no images");
    validate(stack);
    Embeddings emb;
    emb.source = source;
    emb.matrix.resize(static_cast<Eigen::Index>(images.size()), embedding_dim(stack));
    emb.sample_index.resize(images.size());
    parallel_for(static_cast<std::int64_t>(images.size()), threads, [&](std::int64_t i) {
        emb.matrix.row(i) = embed(stack, weights, images[i]).transpose();
        emb.sample_index[i] = static_cast<std::uint32_t>(i);
    });
    validate(emb);
    return emb;
}

namespace {

struct ClassResult {
    MatrixRXf centroids;
    std::vector<double> importance;
    std::vector<std::uint32_t> representative;
};

ClassResult cluster_class(const Embeddings& embeddings, const std::vector<Eigen::Index>& members,
                          int class_id, int prototype_count, const ConvertConfig& config) {
    require(static_cast<int>(members.size()) >= prototype_count, "convert: class ",
            class_id, " has ", members.size(), " samples, fewer than ", prototype_count,
            " prototypes");

    // Optionally fit on a seeded subsample; importance and representatives
    // are always computed over the full class.
    std::vector<Eigen::Index> fit_members = members;
    if (config.subsample > 0 &&
        static_cast<int>(members.size()) > std::max(config.subsample, prototype_count)) {
        Rng rng(split_seed(config.seed, "subsample", class_id));
        rng.shuffle(fit_members.begin(), fit_members.end());
        fit_members.resize(std::max(config.subsample, prototype_count));
    }

    MatrixRXf points(fit_members.size(), embeddings.dim());
    for (std::size_t i = 0; i < fit_members.size(); ++i) {
        points.row(static_cast<Eigen::Index>(i)) = embeddings.matrix.row(fit_members[i]);
    }
    const std::uint64_t class_seed = split_seed(config.seed, "class-kmeans", class_id);
    const auto fit = config.bisecting
                         ? bisecting_kmeans_fit(points, prototype_count, class_seed,
                                                config.max_iters, config.restarts)
                         : kmeans_fit(points, prototype_count, class_seed, config.max_iters,
                                      config.restarts);
    if (fit.coincident_centroids) {
        log_info("convert: class ", class_id, " produced coincident prototypes");
    }

    ClassResult result;
    result.centroids = fit.centroids;
    result.importance.assign(prototype_count, 0.0);
    result.representative.assign(prototype_count, 0);
    for (const auto member : members) {
        int nearest = 0;
        double nearest_d = (embeddings.matrix.row(member) - fit.centroids.row(0))
                               .cast<double>()
                               .squaredNorm();
        for (int c = 1; c < prototype_count; ++c) {
            const double d = (embeddings.matrix.row(member) - fit.centroids.row(c))
                                 .cast<double>()
                                 .squaredNorm();
            if (d < nearest_d) {
                nearest_d = d;
                nearest = c;
            }
        }
        result.importance[nearest] += 1.0;
    }
    for (int c = 0; c < prototype_count; ++c) {
        require(result.importance[c] > 0.0, "convert: class ", class_id, " prototype ", c,
                " captured no samples");
        result.importance[c] /= static_cast<double>(members.size());
        // The representative must be the closest class sample to the
        // prototype even if that sample's own nearest cluster differs.
        double best = -1.0;
        for (const auto member : members) {
            const double d = (embeddings.matrix.row(member) - fit.centroids.row(c))
                                 .cast<double>()
                                 .squaredNorm();
            if (best < 0.0 || d < best) {
                best = d;
                result.representative[c] = embeddings.sample_index[member];
            }
        }
    }
    return result;
}

}  // namespace

PrototypeSet prototypes_from_embeddings(const Embeddings& embeddings,
                                        const std::vector<int>& labels, int num_classes,
                                        const ConvertConfig& config, int threads) {
    validate(embeddings);
    require(labels.size() == static_cast<std::size_t>(embeddings.count()),
            "convert: ", labels.size(), " labels for ", embeddings.count(), " embeddings");
    require(num_classes >= 1, "convert: class count must be >= 1");

    std::vector<std::vector<Eigen::Index>> members(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 1 && labels[i] <= num_classes, "convert: label ", labels[i],
                " outside [1..", num_classes, "]");
        members[labels[i] - 1].push_back(static_cast<Eigen::Index>(i));
    }

    std::vector<ClassResult> results(num_classes);
    parallel_for(num_classes, threads, [&](std::int64_t k) {
        const int class_id = static_cast<int>(k) + 1;
        results[k] = cluster_class(embeddings, members[k], class_id,
                                   prototypes_for_class(config, class_id, num_classes),
                                   config);
    });

    PrototypeSet protos;
    protos.similarity = config.similarity;
    protos.source = embeddings.source;
    protos.num_classes = num_classes;
    Eigen::Index total = 0;
    for (const auto& r : results) total += r.centroids.rows();
    protos.vectors.resize(total, embeddings.dim());
    Eigen::Index row = 0;
    for (int k = 0; k < num_classes; ++k) {
        const auto& r = results[k];
        for (Eigen::Index c = 0; c < r.centroids.rows(); ++c, ++row) {
            protos.vectors.row(row) = r.centroids.row(c);
            protos.proto_class.push_back(k + 1);
            protos.proto_index.push_back(static_cast<int>(c));
            protos.importance.push_back(r.importance[c]);
            protos.representative.push_back(r.representative[c]);
        }
    }
    validate(protos);
    return protos;
}

PrototypeSet convert(const LayerStack& stack, const WeightStore<float>& weights,
                     const std::vector<Tensorf>& normalized_images,
                     const std::vector<int>& labels, int num_classes,
                     const ConvertConfig& config, int threads) {
    const Embeddings embeddings = embed_dataset(stack, weights, normalized_images, "", threads);
    return prototypes_from_embeddings(embeddings, labels, num_classes, config, threads);
}

Eigen::Index nearest_prototype(const PrototypeSet& protos,
                               const Eigen::Ref<const Eigen::VectorXf>& z) {
    require(protos.count() > 0, "classify: empty prototype set");
    require(z.allFinite(), "classify: non-finite embedding");
    require(z.size() == protos.dim(), "classify: embedding dimension ", z.size(),
            " does not match prototype dimension ", protos.dim());
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        const double s = similarity_score(protos.similarity, z, protos.vectors.row(r).transpose());
        const bool better =
            best < 0 || s > best_score ||
            (s == best_score &&
             std::pair(protos.proto_class[r], protos.proto_index[r]) <
                 std::pair(protos.proto_class[best], protos.proto_index[best]));
        if (better) {
            best = r;
            best_score = s;
        }
    }
    return best;
}

int classify(const PrototypeSet& protos, const Eigen::Ref<const Eigen::VectorXf>& z) {
    return protos.proto_class[nearest_prototype(protos, z)];
}

Eigen::VectorXd class_scores(const PrototypeSet& protos,
                             const Eigen::Ref<const Eigen::VectorXf>& z) {
    require(z.allFinite(), "class_scores: non-finite embedding");
    require(z.size() == protos.dim(), "class_scores: embedding dimension ", z.size(),
            " does not match prototype dimension ", protos.dim());
    Eigen::VectorXd best =
        Eigen::VectorXd::Constant(protos.num_classes, -std::numeric_limits<double>::infinity());
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        const double s = similarity_score(protos.similarity, z, protos.vectors.row(r).transpose());
        best[protos.proto_class[r] - 1] = std::max(best[protos.proto_class[r] - 1], s);
    }
    const double peak = best.maxCoeff();
    Eigen::VectorXd probs(best.size());
    double total = 0.0;
    for (Eigen::Index k = 0; k < best.size(); ++k) {
        probs[k] = std::exp(best[k] - peak);
        total += probs[k];
    }
    return probs / total;
}

RelevanceMap<float> class_probability_map(const LayerStack& stack,
                                          const WeightStore<float>& weights,
                                          const PrototypeSet& protos, const Tensorf& x,
                                          double epsilon) {
    validate(stack);
    const auto trace = forward(stack, weights, x);
    const Eigen::VectorXf z = trace[stack.encoder_cut].data;
    const Eigen::VectorXd scores = class_scores(protos, z);
    const int predicted = argmax_index(scores) + 1;

    // Seed direction comes from the predicted class's best prototype.
    Eigen::Index proto_row = -1;
    double proto_score = 0.0;
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        if (protos.proto_class[r] != predicted) continue;
        const double s = similarity_score(protos.similarity, z, protos.vectors.row(r).transpose());
        if (proto_row < 0 || s > proto_score ||
            (s == proto_score && protos.proto_index[r] < protos.proto_index[proto_row])) {
            proto_row = r;
            proto_score = s;
        }
    }
    const Eigen::VectorXd zd = z.cast<double>();
    const Eigen::VectorXd pd = protos.vectors.row(proto_row).transpose().cast<double>();
    bool degenerate = false;
    const Eigen::VectorXd seed =
        embedding_seed(zd, pd, protos.similarity, scores[predicted - 1], degenerate);
    auto map = relevance_backward(stack, weights, trace, stack.encoder_cut,
                                  seed.cast<float>().eval(), epsilon);
    if (degenerate) map.flags.push_back("uniform_seed");
    return map;
}

RelevanceMap<float> prp_map_nearest(const LayerStack& stack, const WeightStore<float>& weights,
                                    const PrototypeSet& protos, const Tensorf& x,
                                    double epsilon) {
    const Eigen::VectorXf z = embed(stack, weights, x);
    const Eigen::Index row = nearest_prototype(protos, z);
    return prp_map(stack, weights, x, protos.vectors.row(row).transpose().cast<double>().eval(),
                   protos.similarity, epsilon);
}

MatrixRXf patch_features(const LayerStack& stack, const WeightStore<float>& weights,
                         const Tensorf& x) {
    validate(stack);
    const int pool = global_avgpool_layer(stack);
    require(pool >= 0, "patches: model has no global average pool");
    const auto trace = forward(stack, weights, x);
    const Tensorf& map = trace[pool];  // input of the pool layer
    require(map.shape.height * map.shape.width > 1,
            "patches: no spatial map ahead of the global average pool");
    const Eigen::Index positions =
        static_cast<Eigen::Index>(map.shape.height) * map.shape.width;
    MatrixRXf feats(positions, map.shape.channels);
    for (Eigen::Index p = 0; p < positions; ++p) {
        for (int c = 0; c < map.shape.channels; ++c) {
            feats(p, c) = map.data[c * positions + p];
        }
    }
    return feats;
}

PrototypeSet patch_convert(const LayerStack& stack, const WeightStore<float>& weights,
                           const std::vector<Tensorf>& normalized_images,
                           const std::vector<int>& labels, int num_classes,
                           const ConvertConfig& config, int threads) {
    require(!normalized_images.empty(), "patch_convert: no images");
    require(normalized_images.size() == labels.size(), "patch_convert: ",
            normalized_images.size(), " images vs ", labels.size(), " labels");

    std::vector<MatrixRXf> per_image(normalized_images.size());
    parallel_for(static_cast<std::int64_t>(normalized_images.size()), threads,
                 [&](std::int64_t i) {
                     per_image[i] = patch_features(stack, weights, normalized_images[i]);
                 });
    const Eigen::Index patches = per_image[0].rows();

    Embeddings all;
    all.matrix.resize(static_cast<Eigen::Index>(normalized_images.size()) * patches,
                      per_image[0].cols());
    all.sample_index.resize(static_cast<std::size_t>(all.matrix.rows()));
    std::vector<int> patch_labels(static_cast<std::size_t>(all.matrix.rows()));
    for (std::size_t i = 0; i < per_image.size(); ++i) {
        for (Eigen::Index p = 0; p < patches; ++p) {
            const Eigen::Index row = static_cast<Eigen::Index>(i) * patches + p;
            all.matrix.row(row) = per_image[i].row(p);
            all.sample_index[static_cast<std::size_t>(row)] = static_cast<std::uint32_t>(i);
            patch_labels[static_cast<std::size_t>(row)] = labels[i];
        }
    }
    return prototypes_from_embeddings(all, patch_labels, num_classes, config, threads);
}

int patch_classify(const LayerStack& stack, const WeightStore<float>& weights,
                   const PrototypeSet& protos, const Tensorf& x) {
    const MatrixRXf feats = patch_features(stack, weights, x);
    std::vector<int> votes(protos.num_classes, 0);
    std::vector<double> vote_similarity(protos.num_classes, 0.0);
    for (Eigen::Index p = 0; p < feats.rows(); ++p) {
        const Eigen::VectorXf patch = feats.row(p).transpose();
        const Eigen::Index winner = nearest_prototype(protos, patch);
        const int cls = protos.proto_class[winner];
        ++votes[cls - 1];
        vote_similarity[cls - 1] +=
            similarity_score(protos.similarity, patch, protos.vectors.row(winner).transpose());
    }
    int best = 0;
    for (int k = 1; k < protos.num_classes; ++k) {
        if (votes[k] > votes[best] ||
            (votes[k] == votes[best] && vote_similarity[k] > vote_similarity[best])) {
            best = k;
        }
    }
    return best + 1;
}

void save_prototypes(const std::string& kmx_path, const std::string& json_path,
                     const PrototypeSet& protos) {
    validate(protos);
    Embeddings payload;
    payload.matrix = protos.vectors;
    payload.source = protos.source;
    payload.sample_index.resize(static_cast<std::size_t>(protos.count()));
    for (std::size_t i = 0; i < payload.sample_index.size(); ++i) {
        payload.sample_index[i] = static_cast<std::uint32_t>(i);
    }
    save_embeddings(kmx_path, payload);

    nlohmann::json j;
    j["format"] = "kmex-prototypes";
    j["version"] = 1;
    j["num_classes"] = protos.num_classes;
    j["similarity"] = {{"kind", to_string(protos.similarity.kind)},
                       {"epsilon", protos.similarity.epsilon}};
    j["source_model"] = protos.source;
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < protos.count(); ++r) {
        rows.push_back({{"class", protos.proto_class[r]},
                        {"index", protos.proto_index[r]},
                        {"importance", protos.importance[r]},
                        {"representative", protos.representative[r]}});
    }
    j["prototypes"] = rows;
    atomic_write(json_path, j.dump(2) + "\n");
}

PrototypeSet load_prototypes(const std::string& kmx_path, const std::string& json_path) {
    const Embeddings payload = load_embeddings(kmx_path);
    std::ifstream in(json_path);
    require(in.good(), "cannot open \"", json_path, "\"");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail("\"", json_path, "\": invalid JSON: ", e.what());
    }
    require(j.value("format", "") == "kmex-prototypes", "\"", json_path,
            "\": not a prototype sidecar");
    require(j.value("version", 0) == 1, "\"", json_path, "\": unsupported version");

    PrototypeSet protos;
    protos.vectors = payload.matrix;
    protos.num_classes = j.at("num_classes").get<int>();
    protos.similarity.kind = similarity_from_string(j.at("similarity").at("kind"));
    protos.similarity.epsilon = j.at("similarity").at("epsilon").get<double>();
    protos.source = j.value("source_model", "");
    const auto& rows = j.at("prototypes");
    require(rows.size() == static_cast<std::size_t>(payload.matrix.rows()), "\"", json_path,
            "\": ", rows.size(), " entries for ", payload.matrix.rows(), " vectors");
    for (const auto& row : rows) {
        protos.proto_class.push_back(row.at("class").get<int>());
        protos.proto_index.push_back(row.at("index").get<int>());
        protos.importance.push_back(row.at("importance").get<double>());
        protos.representative.push_back(row.at("representative").get<std::uint32_t>());
    }
    validate(protos);
    return protos;
}

}  // namespace kmex
