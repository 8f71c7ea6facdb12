#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/embed.hpp"
#include "flowbone/error.hpp"

namespace flowbone {

/// Symmetric cosine distances 1 - cos in [0, 2] with a zero diagonal.
struct DistanceMatrix {
    std::vector<std::string> nodes;
    Eigen::MatrixXd d;

    std::size_t size() const { return static_cast<std::size_t>(d.rows()); }
};

inline constexpr int kNoise = -1;

struct ClusterAssignment {
    std::vector<int> labels;  // per node; kNoise for density-clustering noise
    std::string method;       // "density" or "hierarchical"
    std::map<std::string, double> parameters;

    int cluster_count() const {
        int k = 0;
        for (int l : labels) k = std::max(k, l + 1);
        return k;
    }
};

struct Merge {
    int a = 0;  // child whose smallest member is lower
    int b = 0;
    double height = 0.0;
    int id = 0;  // leaves are 0..n-1, merge k creates n + k

    bool operator==(const Merge&) const = default;
};

struct MergeTree {
    std::size_t leaves = 0;
    std::vector<Merge> merges;
};

inline DistanceMatrix cosine_distance_matrix(const EmbeddingMatrix& emb) {
    const Eigen::Index n = emb.z.rows();
    const Eigen::VectorXd norms = emb.z.rowwise().norm();
    if ((norms.array() <= 0.0).any()) throw DomainError("embedding contains a zero vector");
    const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * emb.z;
    DistanceMatrix out{emb.nodes, Eigen::MatrixXd::Zero(n, n)};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double dist = std::clamp(1.0 - unit.row(i).dot(unit.row(j)), 0.0, 2.0);
            out.d(i, j) = dist;
            out.d(j, i) = dist;
        }
    return out;
}

/// DBSCAN over precomputed distances. The eps-neighbourhood counts the point itself;
/// cores are expanded in ascending index order and a border point keeps the first
/// cluster that reaches it.
inline ClusterAssignment dbscan(const DistanceMatrix& dm, double eps, int min_samples) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (min_samples < 1) throw DomainError("min_samples must be >= 1");
    const std::size_t n = dm.size();
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q)
            if (dm.d(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) <= eps) nbrs[p].push_back(q);
    std::vector<bool> core(n);
    for (std::size_t p = 0; p < n; ++p) core[p] = nbrs[p].size() >= static_cast<std::size_t>(min_samples);

    ClusterAssignment out;
    out.method = "density";
    out.parameters = {{"eps", eps}, {"min_samples", static_cast<double>(min_samples)}};
    out.labels.assign(n, kNoise);
    int next = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (!core[p] || out.labels[p] != kNoise) continue;
        const int id = next++;
        out.labels[p] = id;
        std::deque<std::size_t> frontier{p};
        while (!frontier.empty()) {
            const std::size_t q = frontier.front();
            frontier.pop_front();
            for (std::size_t r : nbrs[q]) {
                if (out.labels[r] != kNoise) continue;
                out.labels[r] = id;
                if (core[r]) frontier.push_back(r);
            }
        }
    }
    return out;
}

/// Agglomerative clustering with complete linkage. Equal distances are resolved by the
/// lexicographically smallest pair of cluster minimum members.
inline MergeTree hierarchical(const DistanceMatrix& dm) {
    const std::size_t n = dm.size();
    if (n < 2) throw DomainError("hierarchical clustering needs at least 2 points");
    Eigen::MatrixXd link = dm.d;
    std::vector<bool> active(n, true);
    std::vector<int> cluster_id(n);
    std::vector<std::size_t> min_member(n);
    std::iota(cluster_id.begin(), cluster_id.end(), 0);
    std::iota(min_member.begin(), min_member.end(), std::size_t{0});

    MergeTree tree;
    tree.leaves = n;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        // slot s holds the cluster whose minimum member is s, so scanning slots in
        // ascending order visits pairs in lexicographic (min member) order
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double dist = link(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (dist < best) {
                    best = dist;
                    bi = i;
                    bj = j;
                }
            }
        }
        const int new_id = static_cast<int>(n + step);
        tree.merges.push_back({cluster_id[bi], cluster_id[bj], best, new_id});
        // merged cluster keeps slot bi (its minimum member is min_member[bi] = bi)
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const auto kk = static_cast<Eigen::Index>(k);
            const double merged = std::max(link(static_cast<Eigen::Index>(bi), kk), link(static_cast<Eigen::Index>(bj), kk));
            link(static_cast<Eigen::Index>(bi), kk) = merged;
            link(kk, static_cast<Eigen::Index>(bi)) = merged;
        }
        active[bj] = false;
        cluster_id[bi] = new_id;
    }
    return tree;
}

/// Partition into k clusters by undoing the last k-1 merges. Cluster ids follow the
/// first appearance in node order.
inline ClusterAssignment cut_tree(const MergeTree& tree, std::size_t k) {
    const std::size_t n = tree.leaves;
    if (k < 1 || k > n) throw DomainError("cut_tree: k must lie in [1, n]");
    if (tree.merges.size() + 1 != n) throw DomainError("cut_tree: malformed merge tree");
    std::vector<std::size_t> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t m = 0; m < n - k; ++m) {
        const auto& mg = tree.merges[m];
        parent[find(static_cast<std::size_t>(mg.a))] = static_cast<std::size_t>(mg.id);
        parent[find(static_cast<std::size_t>(mg.b))] = static_cast<std::size_t>(mg.id);
    }
    ClusterAssignment out;
    out.method = "hierarchical";
    out.parameters = {{"k", static_cast<double>(k)}};
    std::map<std::size_t, int> ids;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = ids.try_emplace(find(i), static_cast<int>(ids.size()));
        out.labels.push_back(it->second);
    }
    return out;
}

/// Gives every noise point its own cluster so partition comparisons stay well defined.
inline std::vector<int> noise_as_singletons(std::vector<int> labels) {
    int next = 0;
    for (int l : labels) next = std::max(next, l + 1);
    for (int& l : labels)
        if (l == kNoise) l = next++;
    return labels;
}

/// Hubert-Arabie adjusted Rand index between two labelings of the same points.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw DomainError("labelings differ in length");
    const double n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1;
        ra[a[i]] += 1;
        rb[b[i]] += 1;
    }
    auto c2 = [](double x) { return x * (x - 1) / 2; };
    double idx = 0, sa = 0, sb = 0;
    for (const auto& [_, c] : joint) idx += c2(c);
    for (const auto& [_, c] : ra) sa += c2(c);
    for (const auto& [_, c] : rb) sb += c2(c);
    const double expected = sa * sb / c2(n);
    const double max_idx = 0.5 * (sa + sb);
    if (max_idx == expected) return 1.0;
    return (idx - expected) / (max_idx - expected);
}

}  // namespace flowbone
