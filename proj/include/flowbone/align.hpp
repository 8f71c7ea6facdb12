#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "flowbone/embed.hpp"
#include "flowbone/error.hpp"

namespace flowbone {

struct AlignmentResult {
    Eigen::MatrixXd rotation;  // d x d orthogonal; reflections allowed
    EmbeddingMatrix aligned;
    double residual = 0.0;     // ||aligned - reference||_F
};

namespace detail {

inline void require_same_shape(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    if (a.nodes != b.nodes) throw DomainError("embeddings cover different node lists");
    if (a.z.rows() != b.z.rows() || a.z.cols() != b.z.cols()) throw DomainError("embedding shapes differ");
}

}  // namespace detail

/// Orthogonal Procrustes: the orthogonal R minimizing ||next * R - reference||_F,
/// from the SVD next^T reference = U S V^T, R = U V^T.
inline AlignmentResult procrustes_align(const EmbeddingMatrix& next, const EmbeddingMatrix& reference) {
    detail::require_same_shape(next, reference);
    const Eigen::MatrixXd cross = next.z.transpose() * reference.z;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    AlignmentResult out;
    out.rotation = svd.matrixU() * svd.matrixV().transpose();
    out.aligned = EmbeddingMatrix{next.year, next.nodes, next.z * out.rotation};
    out.residual = (out.aligned.z - reference.z).norm();
    return out;
}

/// Chains consecutive alignments: element t is rotated onto the aligned element t-1.
inline std::vector<EmbeddingMatrix> align_series(const std::vector<EmbeddingMatrix>& series) {
    std::vector<EmbeddingMatrix> out;
    out.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (t == 0) {
            out.push_back(series[0]);
            continue;
        }
        detail::require_same_shape(series[t], series[0]);
        out.push_back(procrustes_align(series[t], out.back()).aligned);
    }
    return out;
}

/// Half the mean row displacement after aligning `b` onto `a`. Rows are unit vectors,
/// so the value lies in [0, 1] and is 0 exactly when b is an orthogonal image of a.
inline double stability_error(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
    detail::require_same_shape(a, b);
    const auto n = a.z.rows();
    if (n == 0) throw DomainError("stability error of an empty embedding");
    const AlignmentResult r = procrustes_align(b, a);
    const double total = (r.aligned.z - a.z).rowwise().norm().sum();
    return total / (2.0 * static_cast<double>(n));
}

struct StabilityPoint {
    int year;
    int lag;
    double error;
};

/// Stability error of every year against each of the `max_lag` preceding years.
inline std::vector<StabilityPoint> lagged_stability(const std::vector<EmbeddingMatrix>& aligned, int max_lag) {
    std::vector<StabilityPoint> out;
    for (std::size_t t = 1; t < aligned.size(); ++t)
        for (int lag = 1; lag <= max_lag && static_cast<std::size_t>(lag) <= t; ++lag)
            out.push_back({aligned[t].year, lag, stability_error(aligned[t - static_cast<std::size_t>(lag)], aligned[t])});
    return out;
}

}  // namespace flowbone
