#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "flowbone/backbone.hpp"
#include "flowbone/error.hpp"

namespace flowbone {

struct ReciprocityReport {
    double pos_pos_ratio = 0.0;
    double neg_neg_ratio = 0.0;
    double same_sign_ratio = 0.0;
    double conflicting_ratio = 0.0;
    std::int64_t edge_count = 0;
};

/// Undirected signed link with u < v.
struct UndirectedEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    int sign = 0;

    bool operator==(const UndirectedEdge&) const = default;
};

struct BalanceReport {
    std::int64_t triangle_count = 0;
    // nullopt when there are no triangles
    std::optional<double> sb;
    std::optional<double> wsb;
    // indexed by number of negative edges: +++, ++-, +--, ---
    std::array<std::int64_t, 4> census{};
};

inline ReciprocityReport signed_reciprocity(const SignedBackbone& bb) {
    if (bb.edges.empty()) throw DomainError("reciprocity of an empty backbone");
    std::map<std::pair<std::size_t, std::size_t>, int> sign_of;
    for (const auto& e : bb.edges) sign_of[{e.src, e.dst}] = e.sign;
    std::int64_t pp = 0, nn = 0, conflicting = 0;
    for (const auto& e : bb.edges) {
        auto it = sign_of.find({e.dst, e.src});
        if (it == sign_of.end()) continue;
        if (it->second != e.sign) ++conflicting;
        else if (e.sign > 0) ++pp;
        else ++nn;
    }
    ReciprocityReport r;
    r.edge_count = static_cast<std::int64_t>(bb.edges.size());
    const double m = static_cast<double>(r.edge_count);
    r.pos_pos_ratio = static_cast<double>(pp) / m;
    r.neg_neg_ratio = static_cast<double>(nn) / m;
    r.same_sign_ratio = static_cast<double>(pp + nn) / m;
    r.conflicting_ratio = static_cast<double>(conflicting) / m;
    return r;
}

/// Collapses directed signed links onto unordered pairs: agreeing signs (or a single
/// link) keep that sign, disagreeing signs cancel to no link.
inline std::vector<UndirectedEdge> to_undirected(const SignedBackbone& bb) {
    std::map<std::pair<std::size_t, std::size_t>, std::vector<int>> by_pair;
    for (const auto& e : bb.edges) {
        if (e.src == e.dst) continue;
        by_pair[{std::min(e.src, e.dst), std::max(e.src, e.dst)}].push_back(e.sign);
    }
    std::vector<UndirectedEdge> out;
    for (const auto& [pair, signs] : by_pair) {
        const bool all_pos = std::all_of(signs.begin(), signs.end(), [](int s) { return s > 0; });
        const bool all_neg = std::all_of(signs.begin(), signs.end(), [](int s) { return s < 0; });
        if (all_pos) out.push_back({pair.first, pair.second, 1});
        else if (all_neg) out.push_back({pair.first, pair.second, -1});
    }
    return out;
}

/// Triangle census with strong (+++, +--) and weak (all but ++-) balance ratios.
inline BalanceReport balance_scores(std::span<const UndirectedEdge> edges) {
    std::map<std::size_t, std::vector<std::pair<std::size_t, int>>> adj;  // higher neighbours only
    std::map<std::pair<std::size_t, std::size_t>, int> sign_of;
    for (const auto& e : edges) {
        const auto u = std::min(e.src, e.dst), v = std::max(e.src, e.dst);
        if (u == v || !sign_of.emplace(std::pair{u, v}, e.sign).second) continue;
        adj[u].emplace_back(v, e.sign);
    }
    for (auto& [u, nbrs] : adj) std::sort(nbrs.begin(), nbrs.end());

    BalanceReport r;
    for (const auto& [u, nbrs] : adj) {
        for (std::size_t a = 0; a < nbrs.size(); ++a) {
            const auto [v, s_uv] = nbrs[a];
            auto vit = adj.find(v);
            if (vit == adj.end()) continue;
            // intersect higher neighbours of u (beyond v) with higher neighbours of v
            const auto& vn = vit->second;
            std::size_t b = a + 1, c = 0;
            while (b < nbrs.size() && c < vn.size()) {
                if (nbrs[b].first < vn[c].first) ++b;
                else if (vn[c].first < nbrs[b].first) ++c;
                else {
                    const int negatives = (s_uv < 0) + (nbrs[b].second < 0) + (vn[c].second < 0);
                    ++r.census[static_cast<std::size_t>(negatives)];
                    ++r.triangle_count;
                    ++b;
                    ++c;
                }
            }
        }
    }
    if (r.triangle_count > 0) {
        const double t = static_cast<double>(r.triangle_count);
        r.sb = static_cast<double>(r.census[0] + r.census[2]) / t;
        r.wsb = 1.0 - static_cast<double>(r.census[1]) / t;
    }
    return r;
}

}  // namespace flowbone
