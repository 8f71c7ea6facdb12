#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "flowbone/backbone.hpp"
#include "flowbone/error.hpp"

namespace flowbone {

using DirectedPair = std::pair<std::size_t, std::size_t>;

struct PersistenceRecord {
    int total_count = 0;
    int sign_flips = 0;          // sign changes between successive appearances
    std::vector<bool> present;   // one flag per backbone, in input order

    bool operator==(const PersistenceRecord&) const = default;
};

struct PersistenceTable {
    std::vector<int> years;
    std::vector<std::string> nodes;
    std::map<DirectedPair, PersistenceRecord> links;  // only pairs present at least once
};

/// Inclusive year range.
struct YearRange {
    int first = 0;
    int last = 0;

    int length() const { return last - first + 1; }
    bool contains(int y) const { return y >= first && y <= last; }
};

namespace detail {

inline void require_shared_nodes(const std::vector<SignedBackbone>& bbs) {
    for (const auto& bb : bbs)
        if (bb.nodes != bbs.front().nodes)
            throw DomainError("backbone for " + std::to_string(bb.year) + " uses a different node set");
}

}  // namespace detail

/// Counts, per directed pair, how many backbones contain it (sign ignored).
inline PersistenceTable link_persistence(const std::vector<SignedBackbone>& bbs) {
    if (bbs.empty()) throw DomainError("link persistence of an empty series");
    detail::require_shared_nodes(bbs);
    PersistenceTable t;
    t.nodes = bbs.front().nodes;
    std::map<DirectedPair, int> last_sign;
    for (std::size_t y = 0; y < bbs.size(); ++y) {
        t.years.push_back(bbs[y].year);
        for (const auto& e : bbs[y].edges) {
            auto& rec = t.links[{e.src, e.dst}];
            if (rec.present.empty()) rec.present.assign(bbs.size(), false);
            if (rec.present[y]) continue;
            rec.present[y] = true;
            ++rec.total_count;
            auto [it, fresh] = last_sign.try_emplace({e.src, e.dst}, e.sign);
            if (!fresh && it->second != e.sign) ++rec.sign_flips;
            it->second = e.sign;
        }
    }
    return t;
}

/// count_in_a - count_in_b for every pair present in at least one of two equal-length,
/// non-overlapping periods.
inline std::map<DirectedPair, int> period_frequency_diff(const std::vector<SignedBackbone>& bbs, YearRange a,
                                                         YearRange b) {
    if (a.length() < 1 || b.length() < 1) throw DomainError("periods must be non-empty");
    if (a.length() != b.length()) throw DomainError("periods must have equal length");
    if (a.first <= b.last && b.first <= a.last) throw DomainError("periods overlap");
    detail::require_shared_nodes(bbs);
    std::map<DirectedPair, int> diff;
    for (const auto& bb : bbs) {
        const int delta = a.contains(bb.year) ? 1 : (b.contains(bb.year) ? -1 : 0);
        if (delta == 0) continue;
        for (const auto& e : bb.edges) diff[{e.src, e.dst}] += delta;
    }
    return diff;
}

/// Number of pairs persisting exactly c years, for c = 1..years.
inline std::vector<std::int64_t> persistence_histogram(const PersistenceTable& t) {
    std::vector<std::int64_t> h(t.years.size() + 1, 0);
    for (const auto& [_, rec] : t.links) ++h[static_cast<std::size_t>(rec.total_count)];
    return h;
}

/// Histogram over integer bins -span..span; index i counts diff == i - span.
inline std::vector<std::int64_t> diff_histogram(const std::map<DirectedPair, int>& diff, int span) {
    std::vector<std::int64_t> h(static_cast<std::size_t>(2 * span + 1), 0);
    for (const auto& [_, d] : diff) ++h[static_cast<std::size_t>(d + span)];
    return h;
}

}  // namespace flowbone
