#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/csv.hpp"
#include "flowbone/error.hpp"

namespace flowbone {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NodeMeta {
    std::string id;
    std::string label;
    double latitude = 0.0;
    double longitude = 0.0;
    std::map<int, std::int64_t> population;  // year -> head count
    std::string region;

    std::optional<std::int64_t> population_in(int year) const {
        auto it = population.find(year);
        if (it == population.end()) return std::nullopt;
        return it->second;
    }

    bool operator==(const NodeMeta&) const = default;
};

/// One year of directed origin-destination counts. W(i, j) = people moving i -> j.
struct FlowNetwork {
    int year = 0;
    std::vector<std::string> nodes;
    CountMatrix weights;

    std::size_t size() const { return nodes.size(); }

    std::int64_t total() const { return weights.sum(); }

    std::size_t index_of(std::string_view id) const {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
        if (it == nodes.end() || *it != id) throw LookupError("unknown node id '" + std::string(id) + "'");
        return static_cast<std::size_t>(it - nodes.begin());
    }

    bool operator==(const FlowNetwork& o) const {
        return year == o.year && nodes == o.nodes && weights == o.weights;
    }
};

struct TemporalFlowSet {
    std::vector<FlowNetwork> networks;  // ascending year
    std::vector<NodeMeta> meta;         // same order as nodes

    const std::vector<std::string>& nodes() const {
        static const std::vector<std::string> empty;
        return networks.empty() ? empty : networks.front().nodes;
    }

    std::vector<int> years() const {
        std::vector<int> ys;
        for (const auto& n : networks) ys.push_back(n.year);
        return ys;
    }

    bool operator==(const TemporalFlowSet&) const = default;
};

namespace detail {

inline void check_node_meta(const NodeMeta& m, const csv::Reader& r) {
    if (m.id.empty()) r.fail("empty node id");
    if (!(m.latitude >= -90.0 && m.latitude <= 90.0)) r.fail("latitude out of range for '" + m.id + "'");
    if (!(m.longitude >= -180.0 && m.longitude <= 180.0)) r.fail("longitude out of range for '" + m.id + "'");
}

}  // namespace detail

/// Reads `id,label,lat,lon,region`. Result is sorted by id.
inline std::vector<NodeMeta> load_meta(const std::string& meta_path) {
    csv::Reader r(meta_path);
    r.expect_header("id,label,lat,lon,region");
    std::vector<NodeMeta> meta;
    std::set<std::string> seen;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != 5) r.fail("expected 5 fields, got " + std::to_string(f.size()));
        NodeMeta m;
        m.id = f[0];
        m.label = f[1];
        auto lat = csv::parse_real(f[2]);
        auto lon = csv::parse_real(f[3]);
        if (!lat || !lon) r.fail("non-numeric coordinate for '" + m.id + "'");
        m.latitude = *lat;
        m.longitude = *lon;
        m.region = f[4];
        detail::check_node_meta(m, r);
        if (!seen.insert(m.id).second) r.fail("duplicate node id '" + m.id + "'");
        meta.push_back(std::move(m));
    }
    if (meta.empty()) r.fail("no nodes");
    std::sort(meta.begin(), meta.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return meta;
}

/// Reads `id,year,population` into an existing (id-sorted) metadata list.
inline void load_population(const std::string& path, std::vector<NodeMeta>& meta) {
    csv::Reader r(path);
    r.expect_header("id,year,population");
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != 3) r.fail("expected 3 fields, got " + std::to_string(f.size()));
        auto it = std::lower_bound(meta.begin(), meta.end(), f[0],
                                   [](const NodeMeta& m, const std::string& id) { return m.id < id; });
        if (it == meta.end() || it->id != f[0]) r.fail("unknown node id '" + f[0] + "'");
        auto year = csv::parse_int(f[1]);
        auto pop = csv::parse_count(f[2]);
        if (!year) r.fail("non-integer year '" + f[1] + "'");
        if (!pop || *pop <= 0) r.fail("population must be a positive integer, got '" + f[2] + "'");
        if (!it->population.emplace(static_cast<int>(*year), *pop).second)
            r.fail("duplicate population for '" + f[0] + "' in " + f[1]);
    }
}

/// Reads the long-format flow CSV against `meta` (sorted by id). Duplicate rows are summed.
inline TemporalFlowSet load_flows(const std::string& flow_path, std::vector<NodeMeta> meta) {
    std::vector<std::string> nodes;
    for (const auto& m : meta) nodes.push_back(m.id);
    if (!std::is_sorted(nodes.begin(), nodes.end()))
        throw ValidationError("node metadata must be sorted by id");
    const std::size_t n = nodes.size();

    std::map<int, CountMatrix> by_year;
    csv::Reader r(flow_path);
    r.expect_header("year,origin,destination,count");
    std::vector<std::string> f;
    auto lookup = [&](const std::string& id) -> std::size_t {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), id);
        if (it == nodes.end() || *it != id) r.fail("unknown node id '" + id + "'");
        return static_cast<std::size_t>(it - nodes.begin());
    };
    while (r.next(f)) {
        if (f.size() != 4) r.fail("expected 4 fields, got " + std::to_string(f.size()));
        auto year = csv::parse_int(f[0]);
        if (!year) r.fail("non-integer year '" + f[0] + "'");
        auto count = csv::parse_count(f[3]);
        if (!count) r.fail("count is not a non-negative integer: '" + f[3] + "'");
        const std::size_t i = lookup(f[1]);
        const std::size_t j = lookup(f[2]);
        if (i == j) {
            if (*count != 0) r.fail("self-flow " + f[1] + "->" + f[2] + " with nonzero count");
            continue;
        }
        auto [it, fresh] = by_year.try_emplace(static_cast<int>(*year));
        if (fresh) it->second = CountMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        it->second(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += *count;
    }
    if (by_year.empty()) throw ValidationError(flow_path + ": no flow rows");

    TemporalFlowSet set;
    for (auto& [year, w] : by_year) set.networks.push_back(FlowNetwork{year, nodes, std::move(w)});
    set.meta = std::move(meta);
    return set;
}

/// Convenience overload: metadata file plus optional population file.
inline TemporalFlowSet load_flows(const std::string& flow_path, const std::string& meta_path,
                                  const std::string& population_path = {}) {
    auto meta = load_meta(meta_path);
    if (!population_path.empty()) load_population(population_path, meta);
    return load_flows(flow_path, std::move(meta));
}

inline void write_flows(std::ostream& out, const TemporalFlowSet& set) {
    out << "year,origin,destination,count\n";
    for (const auto& net : set.networks) {
        const auto n = static_cast<Eigen::Index>(net.size());
        // keep an all-zero year visible on reload
        if (net.total() == 0 && n >= 2)
            out << net.year << ',' << csv::quote(net.nodes[0]) << ',' << csv::quote(net.nodes[1]) << ",0\n";
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (net.weights(i, j) > 0)
                    out << net.year << ',' << csv::quote(net.nodes[i]) << ',' << csv::quote(net.nodes[j]) << ','
                        << net.weights(i, j) << '\n';
    }
}

inline void write_meta(std::ostream& out, const std::vector<NodeMeta>& meta) {
    out << "id,label,lat,lon,region\n";
    for (const auto& m : meta)
        out << csv::quote(m.id) << ',' << csv::quote(m.label) << ',' << csv::real(m.latitude) << ','
            << csv::real(m.longitude) << ',' << csv::quote(m.region) << '\n';
}

inline void write_population(std::ostream& out, const std::vector<NodeMeta>& meta) {
    out << "id,year,population\n";
    for (const auto& m : meta)
        for (const auto& [year, pop] : m.population) out << csv::quote(m.id) << ',' << year << ',' << pop << '\n';
}

/// Share of ordered pairs carrying a strictly positive flow.
inline double density(const FlowNetwork& net) {
    const std::size_t n = net.size();
    if (n < 2) throw DomainError("density requires at least 2 nodes");
    std::int64_t m = 0;
    for (Eigen::Index i = 0; i < net.weights.rows(); ++i)
        for (Eigen::Index j = 0; j < net.weights.cols(); ++j)
            if (i != j && net.weights(i, j) > 0) ++m;
    return static_cast<double>(m) / static_cast<double>(n * (n - 1));
}

struct NodeStats {
    std::int64_t in_degree = 0;
    std::int64_t out_degree = 0;
    std::int64_t in_strength = 0;
    std::int64_t out_strength = 0;

    bool operator==(const NodeStats&) const = default;
};

inline std::vector<NodeStats> node_statistics(const FlowNetwork& net) {
    const auto n = static_cast<Eigen::Index>(net.size());
    std::vector<NodeStats> stats(net.size());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto w = net.weights(i, j);
            if (i == j || w <= 0) continue;
            stats[i].out_strength += w;
            stats[i].out_degree += 1;
            stats[j].in_strength += w;
            stats[j].in_degree += 1;
        }
    return stats;
}

struct CcdfPoint {
    double value;
    double fraction;  // share of samples >= value
};

inline std::vector<CcdfPoint> ccdf(std::vector<double> values) {
    if (values.empty()) throw DomainError("ccdf of an empty sample");
    std::sort(values.begin(), values.end());
    const double total = static_cast<double>(values.size());
    std::vector<CcdfPoint> out;
    for (std::size_t i = 0; i < values.size();) {
        std::size_t k = i;
        while (k < values.size() && values[k] == values[i]) ++k;
        out.push_back({values[i], static_cast<double>(values.size() - i) / total});
        i = k;
    }
    return out;
}

struct FlowSummary {
    int year = 0;
    std::int64_t total_volume = 0;
    double migration_rate = 0.0;
    std::vector<double> net_migration_rate;  // per node, same order as net.nodes
};

/// Volume, national migration rate and per-node net migration rate for `net.year`.
inline FlowSummary flow_summary(const FlowNetwork& net, std::span<const NodeMeta> meta) {
    if (meta.size() != net.size()) throw DomainError("metadata does not match the network node set");
    std::vector<std::string> missing;
    std::int64_t pop_total = 0;
    for (std::size_t i = 0; i < meta.size(); ++i) {
        if (meta[i].id != net.nodes[i]) throw DomainError("metadata order does not match the network node order");
        if (auto p = meta[i].population_in(net.year)) pop_total += *p;
        else missing.push_back(meta[i].id);
    }
    if (!missing.empty()) {
        std::string msg = "missing population for " + std::to_string(net.year) + ":";
        for (const auto& id : missing) msg += " " + id;
        throw DomainError(msg);
    }
    FlowSummary s;
    s.year = net.year;
    s.total_volume = net.total();
    s.migration_rate = static_cast<double>(s.total_volume) / static_cast<double>(pop_total);
    const auto stats = node_statistics(net);
    for (std::size_t i = 0; i < stats.size(); ++i)
        s.net_migration_rate.push_back(static_cast<double>(stats[i].in_strength - stats[i].out_strength) /
                                       static_cast<double>(*meta[i].population_in(net.year)));
    return s;
}

/// Edges incident to `ego` plus every edge running between two of its neighbours.
/// Works for any edge type exposing integral `src` and `dst` members.
template <class Edge>
std::vector<Edge> ego_subgraph(std::span<const Edge> edges, std::size_t ego) {
    std::set<std::size_t> alters;
    for (const auto& e : edges) {
        if (e.src == ego && e.dst != ego) alters.insert(e.dst);
        if (e.dst == ego && e.src != ego) alters.insert(e.src);
    }
    std::vector<Edge> out;
    for (const auto& e : edges) {
        const bool incident = e.src == ego || e.dst == ego;
        const bool between_alters = alters.contains(e.src) && alters.contains(e.dst);
        if (incident || between_alters) out.push_back(e);
    }
    return out;
}

template <class Edge>
std::vector<Edge> ego_subgraph(std::span<const Edge> edges, std::span<const std::string> nodes,
                               std::string_view ego_id) {
    auto it = std::find(nodes.begin(), nodes.end(), ego_id);
    if (it == nodes.end()) throw LookupError("unknown ego id '" + std::string(ego_id) + "'");
    return ego_subgraph(edges, static_cast<std::size_t>(it - nodes.begin()));
}

}  // namespace flowbone
