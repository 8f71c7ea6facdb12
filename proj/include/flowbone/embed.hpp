#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/backbone.hpp"
#include "flowbone/error.hpp"
#include "flowbone/flownet.hpp"

namespace flowbone {

/// Vigor of every ordered pair; entries in [-1, 1], diagonal unused (zero).
struct DenseSignedMatrix {
    std::vector<std::string> nodes;
    Eigen::MatrixXd weights;
};

/// n x d latent vectors, one row per node.
struct EmbeddingMatrix {
    int year = 0;
    std::vector<std::string> nodes;
    Eigen::MatrixXd z;

    Eigen::Index dim() const { return z.cols(); }

    bool operator==(const EmbeddingMatrix& o) const { return year == o.year && nodes == o.nodes && z == o.z; }
};

struct TrainConfig {
    int dim = 8;
    double learning_rate = 0.01;
    int epochs = 100;
    std::uint64_t seed = 0;
};

inline DenseSignedMatrix dense_signed_weights(const FlowNetwork& net) {
    const NullModel model = null_expectation(net);
    const auto n = static_cast<Eigen::Index>(net.size());
    DenseSignedMatrix m{net.nodes, Eigen::MatrixXd::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && model.expected(i, j) > 0.0) m.weights(i, j) = vigor(net.weights(i, j), model.expected(i, j));
    return m;
}

template <class A, class B>
double cosine_similarity(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine similarity of a zero vector");
    return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

/// Subgradient of |target - cos(zi, zj)| with respect to zi; zero when the fit is exact.
template <class A, class B>
Eigen::VectorXd abs_error_gradient(const Eigen::MatrixBase<A>& zi, const Eigen::MatrixBase<B>& zj, double target) {
    const double ni = zi.norm();
    const double nj = zj.norm();
    const double cos = std::clamp(zi.dot(zj) / (ni * nj), -1.0, 1.0);
    const double y = target - cos;
    if (y == 0.0) return Eigen::VectorXd::Zero(zi.size());
    const double s = y > 0.0 ? 1.0 : -1.0;
    // dy/dzi = -zj / (|zi||zj|) + zi cos / |zi|^2
    return s * (-zj.transpose() / (ni * nj) + zi.transpose() * (cos / (ni * ni))).transpose();
}

/// Mean absolute error between latent cosine and signed weight over all ordered pairs.
inline double embedding_loss(const EmbeddingMatrix& emb, const DenseSignedMatrix& m) {
    if (emb.nodes != m.nodes || emb.z.rows() != m.weights.rows())
        throw DomainError("embedding and signed matrix cover different node sets");
    const Eigen::Index n = emb.z.rows();
    if (n < 2) throw DomainError("embedding loss needs at least 2 nodes");
    const Eigen::VectorXd norms = emb.z.rowwise().norm();
    if ((norms.array() <= 0.0).any()) throw DomainError("embedding contains a zero vector");
    const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * emb.z;
    const Eigen::MatrixXd cos = unit * unit.transpose();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) sum += std::abs(std::clamp(cos(i, j), -1.0, 1.0) - m.weights(i, j));
    return sum / static_cast<double>(n * (n - 1));
}

namespace detail {

inline void normalize_rows(Eigen::MatrixXd& z) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double nrm = z.row(i).norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw TrainingError("cannot normalize row " + std::to_string(i));
        z.row(i) /= nrm;
    }
}

}  // namespace detail

/// Optional per-epoch observer: called with (epoch, z) after renormalization.
struct NoTrace {
    void operator()(int, const Eigen::MatrixXd&) const {}
};

/// Plain SGD on the mean absolute cosine error. Every epoch visits all ordered pairs
/// in a freshly shuffled order and moves both endpoints; rows are renormalized at
/// epoch end. Bitwise deterministic for a fixed seed.
template <class Trace = NoTrace>
EmbeddingMatrix learn_embedding(const DenseSignedMatrix& m, const TrainConfig& cfg, int year = 0, Trace&& trace = {}) {
    const Eigen::Index n = m.weights.rows();
    if (n < 2) throw DomainError("embedding needs at least 2 nodes");
    if (cfg.dim < 2) throw DomainError("embedding dimension must be >= 2");
    if (!(cfg.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
    if (cfg.epochs < 1) throw DomainError("epochs must be >= 1");

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd z(n, cfg.dim);
    for (Eigen::Index i = 0; i < n; ++i) {
        do {
            for (Eigen::Index k = 0; k < cfg.dim; ++k) z(i, k) = gauss(rng);
        } while (z.row(i).norm() == 0.0);
    }
    detail::normalize_rows(z);

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(n * (n - 1)));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) pairs.emplace_back(i, j);

    const double alpha = cfg.learning_rate;
    Eigen::RowVectorXd gi(cfg.dim), gj(cfg.dim);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        for (const auto& [i, j] : pairs) {
            const double ni = z.row(i).norm();
            const double nj = z.row(j).norm();
            const double cos = std::clamp(z.row(i).dot(z.row(j)) / (ni * nj), -1.0, 1.0);
            const double y = m.weights(i, j) - cos;
            if (y == 0.0) continue;
            const double s = y > 0.0 ? 1.0 : -1.0;
            gi = -z.row(j) / (ni * nj) + z.row(i) * (cos / (ni * ni));
            gj = -z.row(i) / (ni * nj) + z.row(j) * (cos / (nj * nj));
            z.row(i) -= alpha * s * gi;
            z.row(j) -= alpha * s * gj;
            if (!std::isfinite(y) || !z.row(i).allFinite() || !z.row(j).allFinite())
                throw TrainingError("non-finite value at epoch " + std::to_string(epoch) + ", pair (" +
                                    m.nodes[i] + "," + m.nodes[j] + ")");
        }
        detail::normalize_rows(z);
        trace(epoch, z);
    }
    return EmbeddingMatrix{year, m.nodes, std::move(z)};
}

}  // namespace flowbone
