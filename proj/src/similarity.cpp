#include "kmex/similarity.hpp"

namespace kmex {

std::string to_string(SimilarityKind kind) {
    switch (kind) {
        case SimilarityKind::neg_l2: return "neg_l2";
        case SimilarityKind::neg_l1: return "neg_l1";
        case SimilarityKind::neg_sq_l2: return "neg_sq_l2";
        case SimilarityKind::log_l2: return "log_l2";
        case SimilarityKind::protopnet_log: return "protopnet_log";
        case SimilarityKind::dot: return "dot";
        case SimilarityKind::cosine: return "cosine";
        case SimilarityKind::neg_ned: return "neg_ned";
    }
    fail("unknown similarity kind");
}

SimilarityKind similarity_from_string(const std::string& name) {
    if (name == "neg_l2") return SimilarityKind::neg_l2;
    if (name == "neg_l1") return SimilarityKind::neg_l1;
    if (name == "neg_sq_l2") return SimilarityKind::neg_sq_l2;
    if (name == "log_l2") return SimilarityKind::log_l2;
    if (name == "protopnet_log") return SimilarityKind::protopnet_log;
    if (name == "dot") return SimilarityKind::dot;
    if (name == "cosine") return SimilarityKind::cosine;
    if (name == "neg_ned") return SimilarityKind::neg_ned;
    fail("unknown similarity \"", name,
         "\" (expected neg_l2, neg_l1, neg_sq_l2, log_l2, protopnet_log, dot, cosine or "
         "neg_ned)");
}

}  // namespace kmex
