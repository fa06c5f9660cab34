#pragma once

#include "kmex/rng.hpp"

#include <limits>
#include <vector>

namespace kmex {

template <class Scalar>
struct KmeansResult {
    MatrixRX<Scalar> centroids;   // k rows
    std::vector<int> assignment;  // per point, cluster index
    double sse = 0.0;
    int iterations = 0;
    bool coincident_centroids = false;
};

namespace detail {

template <class Scalar>
double sq_distance(const Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>& a,
                   const Eigen::Ref<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>& b) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        d += t * t;
    }
    return d;
}

/// Nearest centroid per point, lowest index on ties.
template <class Scalar>
std::vector<int> assign_points(const MatrixRX<Scalar>& points,
                               const MatrixRX<Scalar>& centroids) {
    std::vector<int> assignment(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        int best = 0;
        double best_d = sq_distance<Scalar>(points.row(i), centroids.row(0));
        for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
            const double d = sq_distance<Scalar>(points.row(i), centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignment[i] = best;
    }
    return assignment;
}

template <class Scalar>
MatrixRX<Scalar> centroid_means(const MatrixRX<Scalar>& points,
                                const std::vector<int>& assignment, int k) {
    MatrixRXd sums = MatrixRXd::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        sums.row(assignment[i]) += points.row(i).template cast<double>();
        ++counts[assignment[i]];
    }
    MatrixRX<Scalar> centroids(k, points.cols());
    for (int c = 0; c < k; ++c) {
        require(counts[c] > 0, "kmeans: internal error, empty cluster at mean update");
        centroids.row(c) = (sums.row(c) / static_cast<double>(counts[c]))
                               .template cast<Scalar>();
    }
    return centroids;
}

/// Give every empty cluster the point farthest from its own centroid
/// (taken from clusters that keep at least one member). Returns true if
/// anything moved.
template <class Scalar>
bool repair_empty_clusters(const MatrixRX<Scalar>& points, const MatrixRX<Scalar>& centroids,
                           std::vector<int>& assignment, int k) {
    bool moved = false;
    std::vector<int> counts(k, 0);
    for (int a : assignment) ++counts[a];
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        Eigen::Index victim = -1;
        double worst = -1.0;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            if (counts[assignment[i]] < 2) continue;
            const double d =
                sq_distance<Scalar>(points.row(i), centroids.row(assignment[i]));
            if (d > worst) {
                worst = d;
                victim = i;
            }
        }
        require(victim >= 0, "kmeans: cannot repair empty cluster");
        --counts[assignment[victim]];
        assignment[victim] = c;
        counts[c] = 1;
        moved = true;
    }
    return moved;
}

template <class Scalar>
MatrixRX<Scalar> kmeanspp_init(const MatrixRX<Scalar>& points, int k, Rng& rng) {
    const Eigen::Index n = points.rows();
    MatrixRX<Scalar> centers(k, points.cols());
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    Eigen::Index pick = rng.uniform_int(n);
    centers.row(0) = points.row(pick);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = sq_distance<Scalar>(points.row(i), centers.row(c - 1));
            if (d < dist2[i]) dist2[i] = d;
            total += dist2[i];
        }
        if (total <= 0.0) {
            // Every remaining point duplicates a chosen center.
            pick = rng.uniform_int(n);
        } else {
            const double target = rng.uniform() * total;
            double cumulative = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                cumulative += dist2[i];
                if (cumulative >= target) {
                    pick = i;
                    break;
                }
            }
        }
        centers.row(c) = points.row(pick);
    }
    return centers;
}

template <class Scalar>
double total_sse(const MatrixRX<Scalar>& points, const MatrixRX<Scalar>& centroids,
                 const std::vector<int>& assignment) {
    double sse = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        sse += sq_distance<Scalar>(points.row(i), centroids.row(assignment[i]));
    }
    return sse;
}

template <class Scalar>
KmeansResult<Scalar> lloyd_once(const MatrixRX<Scalar>& points, int k, std::uint64_t seed,
                                int max_iters) {
    Rng rng(seed);
    KmeansResult<Scalar> result;
    result.centroids = kmeanspp_init(points, k, rng);
    result.assignment = assign_points(points, result.centroids);
    repair_empty_clusters(points, result.centroids, result.assignment, k);
    for (int iter = 0; iter < max_iters; ++iter) {
        result.iterations = iter + 1;
        result.centroids = centroid_means(points, result.assignment, k);
        auto next = assign_points(points, result.centroids);
        const bool repaired = repair_empty_clusters(points, result.centroids, next, k);
        if (!repaired && next == result.assignment) break;
        result.assignment = std::move(next);
    }
    // The reported centroids are exactly the means of the final assignment.
    result.centroids = centroid_means(points, result.assignment, k);
    result.sse = total_sse(points, result.centroids, result.assignment);
    return result;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ init; the best of `restarts` runs by
/// SSE is kept. Converged runs satisfy the fixed-point contract: every
/// point sits in its nearest cluster and every centroid is the mean of
/// its members; empty clusters are repaired by seizing the point
/// farthest from its current centroid.
template <class Scalar>
KmeansResult<Scalar> kmeans_fit(const MatrixRX<Scalar>& points, int k, std::uint64_t seed,
                                int max_iters = 100, int restarts = 5) {
    require(k >= 1, "kmeans: cluster count must be >= 1, got ", k);
    require(points.rows() >= k, "kmeans: ", points.rows(), " points cannot fill ", k,
            " clusters");
    require(restarts >= 1, "kmeans: need at least one restart");

    KmeansResult<Scalar> best;
    for (int r = 0; r < restarts; ++r) {
        auto run = detail::lloyd_once(points, k, split_seed(seed, "kmeans-restart", r),
                                      max_iters);
        if (r == 0 || run.sse < best.sse) best = std::move(run);
    }
    for (Eigen::Index a = 0; a < best.centroids.rows() && !best.coincident_centroids; ++a) {
        for (Eigen::Index b = a + 1; b < best.centroids.rows(); ++b) {
            if (best.centroids.row(a) == best.centroids.row(b)) {
                best.coincident_centroids = true;
                break;
            }
        }
    }
    return best;
}

/// Bisecting k-means: repeatedly split the cluster with the largest SSE
/// in two (2-means) until `k` clusters exist. Each bisection carries the
/// usual fixed-point and non-empty guarantees; the overall result is not
/// a global Lloyd fixed point.
template <class Scalar>
KmeansResult<Scalar> bisecting_kmeans_fit(const MatrixRX<Scalar>& points, int k,
                                          std::uint64_t seed, int max_iters = 100,
                                          int restarts = 5) {
    require(k >= 1, "kmeans: cluster count must be >= 1, got ", k);
    require(points.rows() >= k, "kmeans: ", points.rows(), " points cannot fill ", k,
            " clusters");

    std::vector<std::vector<Eigen::Index>> clusters{std::vector<Eigen::Index>()};
    clusters[0].resize(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) clusters[0][i] = i;

    auto cluster_sse = [&](const std::vector<Eigen::Index>& members) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
        for (auto i : members) mean += points.row(i).template cast<double>();
        mean /= static_cast<double>(members.size());
        double sse = 0.0;
        for (auto i : members) {
            sse += (points.row(i).template cast<double>() - mean).squaredNorm();
        }
        return sse;
    };

    int step = 0;
    while (static_cast<int>(clusters.size()) < k) {
        int split = -1;
        double worst = -1.0;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            if (clusters[c].size() < 2) continue;
            const double sse = cluster_sse(clusters[c]);
            if (sse > worst) {
                worst = sse;
                split = static_cast<int>(c);
            }
        }
        require(split >= 0, "kmeans: no divisible cluster left");

        MatrixRX<Scalar> sub(clusters[split].size(), points.cols());
        for (std::size_t i = 0; i < clusters[split].size(); ++i) {
            sub.row(i) = points.row(clusters[split][i]);
        }
        const auto half = kmeans_fit(sub, 2, split_seed(seed, "bisect", step++), max_iters,
                                     restarts);
        std::vector<Eigen::Index> left, right;
        for (std::size_t i = 0; i < clusters[split].size(); ++i) {
            (half.assignment[i] == 0 ? left : right).push_back(clusters[split][i]);
        }
        clusters[split] = std::move(left);
        clusters.push_back(std::move(right));
    }

    KmeansResult<Scalar> result;
    result.assignment.resize(points.rows());
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        for (auto i : clusters[c]) result.assignment[i] = static_cast<int>(c);
    }
    result.centroids = detail::centroid_means(points, result.assignment, k);
    result.sse = detail::total_sse(points, result.centroids, result.assignment);
    return result;
}

}  // namespace kmex
