#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/cluster.hpp"
#include "flowbone/signed_metrics.hpp"

namespace flowbone::test {

// Point-probability two-sided test by direct enumeration in linear space.
inline double binomial_oracle(int x, int n, double p) {
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        double c = 1.0;
        for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
        pmf[k] = c * std::pow(p, k) * std::pow(1.0 - p, n - k);
    }
    double s = 0.0;
    for (double v : pmf)
        if (v <= pmf[x] * (1.0 + 1e-7)) s += v;
    return std::min(1.0, s);
}

struct Brute {
    std::int64_t triangles = 0;
    std::array<std::int64_t, 4> census{};
};

inline Brute brute_triangles(const std::vector<UndirectedEdge>& edges, std::size_t n) {
    std::vector<std::vector<int>> s(n, std::vector<int>(n, 0));
    for (const auto& e : edges) s[e.src][e.dst] = s[e.dst][e.src] = e.sign;
    Brute b;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c = a + 1; c < n; ++c)
            for (std::size_t d = c + 1; d < n; ++d)
                if (s[a][c] && s[c][d] && s[a][d]) {
                    ++b.triangles;
                    ++b.census[(s[a][c] < 0) + (s[c][d] < 0) + (s[a][d] < 0)];
                }
    return b;
}

inline std::vector<int> dbscan_oracle(const Eigen::MatrixXd& d, double eps, int min_samples) {
    const auto n = static_cast<std::size_t>(d.rows());
    auto near = [&](std::size_t p, std::size_t q) { return d(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) <= eps; };
    std::vector<bool> core(n);
    for (std::size_t p = 0; p < n; ++p) {
        int c = 0;
        for (std::size_t q = 0; q < n; ++q) c += near(p, q);
        core[p] = c >= min_samples;
    }
    // components of the core graph, by closure until nothing changes
    std::vector<std::size_t> comp(n);
    std::iota(comp.begin(), comp.end(), std::size_t{0});
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q)
                if (core[p] && core[q] && near(p, q) && comp[q] < comp[p]) {
                    comp[p] = comp[q];
                    changed = true;
                }
    }
    std::map<std::size_t, int> id;  // component root (its lowest core) -> label in discovery order
    for (std::size_t p = 0; p < n; ++p)
        if (core[p] && !id.contains(comp[p])) id.emplace(comp[p], static_cast<int>(id.size()));
    std::vector<int> labels(n, kNoise);
    for (std::size_t p = 0; p < n; ++p) {
        if (core[p]) {
            labels[p] = id[comp[p]];
            continue;
        }
        int best = std::numeric_limits<int>::max();
        for (std::size_t q = 0; q < n; ++q)
            if (core[q] && near(p, q)) best = std::min(best, id[comp[q]]);
        if (best != std::numeric_limits<int>::max()) labels[p] = best;
    }
    return labels;
}

inline std::vector<Merge> linkage_oracle(const Eigen::MatrixXd& d) {
    const auto n = static_cast<std::size_t>(d.rows());
    struct Cl {
        std::vector<std::size_t> members;
        int id;
    };
    std::vector<Cl> live;
    for (std::size_t i = 0; i < n; ++i) live.push_back({{i}, static_cast<int>(i)});
    std::vector<Merge> out;
    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> key{n, n};
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < live.size(); ++i)
            for (std::size_t j = 0; j < live.size(); ++j) {
                if (i == j) continue;
                double far = 0.0;
                for (auto u : live[i].members)
                    for (auto v : live[j].members) far = std::max(far, d(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)));
                const auto mi = *std::min_element(live[i].members.begin(), live[i].members.end());
                const auto mj = *std::min_element(live[j].members.begin(), live[j].members.end());
                if (mi > mj) continue;
                if (far < best || (far == best && std::make_pair(mi, mj) < key)) {
                    best = far;
                    key = {mi, mj};
                    bi = i;
                    bj = j;
                }
            }
        const int id = static_cast<int>(n + step);
        out.push_back({live[bi].id, live[bj].id, best, id});
        live[bi].members.insert(live[bi].members.end(), live[bj].members.begin(), live[bj].members.end());
        live[bi].id = id;
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return out;
}

}  // namespace flowbone::test
