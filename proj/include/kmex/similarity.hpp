#pragma once

#include "kmex/core.hpp"

#include <cmath>
#include <string>

namespace kmex {

/// Embedding-space similarity: larger means more similar for every
/// variant (distances enter negated).
enum class SimilarityKind {
    neg_l2,
    neg_l1,
    neg_sq_l2,
    log_l2,         // log(d+1) - log(d+eps)
    protopnet_log,  // log((d^2+1)/(d^2+eps))
    dot,
    cosine,
    neg_ned,        // negative distance between mean-centered, unit-norm vectors
};

struct Similarity {
    SimilarityKind kind = SimilarityKind::neg_l2;
    double epsilon = 1e-4;
};

std::string to_string(SimilarityKind kind);
SimilarityKind similarity_from_string(const std::string& name);

namespace detail {

inline Eigen::VectorXd centered_direction(const Eigen::VectorXd& v) {
    Eigen::VectorXd c = v.array() - v.mean();
    const double norm = c.norm();
    if (norm == 0.0) return Eigen::VectorXd::Zero(v.size());
    return c / norm;
}

}  // namespace detail

/// Similarity score; math always runs in double.
template <class DerivedA, class DerivedB>
double similarity_score(const Similarity& sim, const Eigen::MatrixBase<DerivedA>& u,
                        const Eigen::MatrixBase<DerivedB>& v) {
    require(u.size() == v.size(), "similarity: dimension mismatch ", u.size(), " vs ",
            v.size());
    const Eigen::VectorXd a = u.template cast<double>();
    const Eigen::VectorXd b = v.template cast<double>();
    switch (sim.kind) {
        case SimilarityKind::neg_l2:
            return -(a - b).norm();
        case SimilarityKind::neg_l1:
            return -(a - b).template lpNorm<1>();
        case SimilarityKind::neg_sq_l2:
            return -(a - b).squaredNorm();
        case SimilarityKind::log_l2: {
            const double d = (a - b).norm();
            return std::log(d + 1.0) - std::log(d + sim.epsilon);
        }
        case SimilarityKind::protopnet_log: {
            const double d2 = (a - b).squaredNorm();
            return std::log((d2 + 1.0) / (d2 + sim.epsilon));
        }
        case SimilarityKind::dot:
            return a.dot(b);
        case SimilarityKind::cosine: {
            const double na = a.norm(), nb = b.norm();
            if (na == 0.0 || nb == 0.0) return 0.0;
            return a.dot(b) / (na * nb);
        }
        case SimilarityKind::neg_ned:
            return -(detail::centered_direction(a) - detail::centered_direction(b)).norm();
    }
    fail("unknown similarity kind");
}

/// Gradient of similarity_score(sim, z, p) with respect to z. Degenerate
/// points (z == p for distance measures, zero vectors for cosine/ned)
/// return a zero gradient.
template <class DerivedA, class DerivedB>
Eigen::VectorXd similarity_gradient(const Similarity& sim,
                                    const Eigen::MatrixBase<DerivedA>& z,
                                    const Eigen::MatrixBase<DerivedB>& p) {
    require(z.size() == p.size(), "similarity: dimension mismatch ", z.size(), " vs ",
            p.size());
    const Eigen::VectorXd a = z.template cast<double>();
    const Eigen::VectorXd b = p.template cast<double>();
    const Eigen::VectorXd diff = a - b;
    switch (sim.kind) {
        case SimilarityKind::neg_l2: {
            const double d = diff.norm();
            if (d == 0.0) return Eigen::VectorXd::Zero(a.size());
            return -diff / d;
        }
        case SimilarityKind::neg_l1: {
            Eigen::VectorXd g(a.size());
            for (Eigen::Index i = 0; i < a.size(); ++i) {
                g[i] = diff[i] > 0 ? -1.0 : (diff[i] < 0 ? 1.0 : 0.0);
            }
            return g;
        }
        case SimilarityKind::neg_sq_l2:
            return -2.0 * diff;
        case SimilarityKind::log_l2: {
            const double d = diff.norm();
            if (d == 0.0) return Eigen::VectorXd::Zero(a.size());
            return (1.0 / (d + 1.0) - 1.0 / (d + sim.epsilon)) * diff / d;
        }
        case SimilarityKind::protopnet_log: {
            const double d2 = diff.squaredNorm();
            return (1.0 / (d2 + 1.0) - 1.0 / (d2 + sim.epsilon)) * 2.0 * diff;
        }
        case SimilarityKind::dot:
            return b;
        case SimilarityKind::cosine: {
            const double na = a.norm(), nb = b.norm();
            if (na == 0.0 || nb == 0.0) return Eigen::VectorXd::Zero(a.size());
            const double s = a.dot(b) / (na * nb);
            return b / (na * nb) - s * a / (na * na);
        }
        case SimilarityKind::neg_ned: {
            const Eigen::VectorXd ca = a.array() - a.mean();
            const double norm = ca.norm();
            if (norm == 0.0) return Eigen::VectorXd::Zero(a.size());
            const Eigen::VectorXd na = ca / norm;
            const Eigen::VectorXd nb = detail::centered_direction(b);
            const Eigen::VectorXd delta = na - nb;
            const double dn = delta.norm();
            if (dn == 0.0) return Eigen::VectorXd::Zero(a.size());
            const Eigen::VectorXd d_unit = delta / dn;
            // Chain rule through centering then normalization.
            Eigen::VectorXd g = (d_unit - na * na.dot(d_unit)) / norm;
            g.array() -= g.mean();
            return -g;
        }
    }
    fail("unknown similarity kind");
}

}  // namespace kmex
