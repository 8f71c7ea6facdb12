#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flowbone/align.hpp"
#include "flowbone/backbone.hpp"
#include "flowbone/cluster.hpp"
#include "flowbone/csv.hpp"
#include "flowbone/embed.hpp"
#include "flowbone/error.hpp"
#include "flowbone/flownet.hpp"
#include "flowbone/io.hpp"
#include "flowbone/render.hpp"
#include "flowbone/signed_metrics.hpp"
#include "flowbone/synth.hpp"
#include "flowbone/temporal.hpp"

namespace flowbone {

namespace fs = std::filesystem;

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputEnv = "FLOWBONE_OUT";

struct PipelineConfig {
    std::string flows;
    std::string meta;
    std::string population;
    std::string out;
    double keep_fraction = 0.075;
    double vigor_threshold = 0.33;
    int dim = 8;
    double learning_rate = 0.01;
    int epochs = 100;
    std::uint64_t seed = 42;
    double eps = 0.14;
    int min_samples = 3;
    int clusters_k = 7;
    int max_lag = 4;
    std::optional<YearRange> period_a;
    std::optional<YearRange> period_b;
    double dendrogram_cutoff = 2.0;  // cosine distances never exceed 2, so the default keeps every merge
    std::vector<std::string> ego;
    std::vector<int> loss_curve_dims;
    int threads = 0;  // 0: hardware concurrency

    /// Per-year SGD seed.
    std::uint64_t year_seed(int year) const { return seed + static_cast<std::uint64_t>(year); }
};

namespace detail {

inline std::string format_range(const std::optional<YearRange>& r) {
    return r ? std::to_string(r->first) + "-" + std::to_string(r->last) : "";
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream out;
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    return out.str();
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Every setting as key -> value text, in a fixed order. The output directory is
/// left out so that the hash only depends on what is computed.
inline std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& c) {
    return {{"flows", c.flows},
            {"meta", c.meta},
            {"population", c.population},
            {"keep_fraction", csv::real(c.keep_fraction)},
            {"vigor_threshold", csv::real(c.vigor_threshold)},
            {"dim", std::to_string(c.dim)},
            {"learning_rate", csv::real(c.learning_rate)},
            {"epochs", std::to_string(c.epochs)},
            {"seed", std::to_string(c.seed)},
            {"eps", csv::real(c.eps)},
            {"min_samples", std::to_string(c.min_samples)},
            {"clusters_k", std::to_string(c.clusters_k)},
            {"max_lag", std::to_string(c.max_lag)},
            {"period_a", detail::format_range(c.period_a)},
            {"period_b", detail::format_range(c.period_b)},
            {"dendrogram_cutoff", csv::real(c.dendrogram_cutoff)},
            {"ego", detail::join(c.ego)},
            {"loss_curve_dims", detail::join(c.loss_curve_dims)}};
}

inline std::string config_hash(const PipelineConfig& c) {
    std::string canon;
    for (const auto& [k, v] : config_entries(c)) canon += k + "=" + v + "\n";
    return io::sha256_hex(canon);
}

/// Applies one `key=value` setting; unknown keys and malformed values are validation errors.
inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
    auto bad = [&]() -> ValidationError { return ValidationError("config: bad value '" + value + "' for " + key); };
    auto real = [&]() {
        auto v = csv::parse_real(value);
        if (!v) throw bad();
        return *v;
    };
    auto integer = [&]() {
        auto v = csv::parse_int(value);
        if (!v) throw bad();
        return *v;
    };
    auto range = [&]() -> std::optional<YearRange> {
        if (value.empty()) return std::nullopt;
        const auto dash = value.find('-', 1);
        if (dash == std::string::npos) throw bad();
        auto a = csv::parse_int(value.substr(0, dash));
        auto b = csv::parse_int(value.substr(dash + 1));
        if (!a || !b || *b < *a) throw bad();
        return YearRange{static_cast<int>(*a), static_cast<int>(*b)};
    };
    if (key == "flows") c.flows = value;
    else if (key == "meta") c.meta = value;
    else if (key == "population") c.population = value;
    else if (key == "out") c.out = value;
    else if (key == "keep_fraction") c.keep_fraction = real();
    else if (key == "vigor_threshold") c.vigor_threshold = real();
    else if (key == "dim") c.dim = static_cast<int>(integer());
    else if (key == "learning_rate") c.learning_rate = real();
    else if (key == "epochs") c.epochs = static_cast<int>(integer());
    else if (key == "seed") {
        auto v = csv::parse_count(value);
        if (!v) throw bad();
        c.seed = static_cast<std::uint64_t>(*v);
    } else if (key == "eps") c.eps = real();
    else if (key == "min_samples") c.min_samples = static_cast<int>(integer());
    else if (key == "clusters_k") c.clusters_k = static_cast<int>(integer());
    else if (key == "max_lag") c.max_lag = static_cast<int>(integer());
    else if (key == "period_a") c.period_a = range();
    else if (key == "period_b") c.period_b = range();
    else if (key == "dendrogram_cutoff") c.dendrogram_cutoff = real();
    else if (key == "ego") c.ego = detail::split(value, ',');
    else if (key == "loss_curve_dims") {
        c.loss_curve_dims.clear();
        for (const auto& d : detail::split(value, ',')) {
            auto v = csv::parse_int(d);
            if (!v || *v < 2) throw bad();
            c.loss_curve_dims.push_back(static_cast<int>(*v));
        }
    } else if (key == "threads") c.threads = static_cast<int>(integer());
    else throw ValidationError("config: unknown key '" + key + "'");
}

/// Reads a flat `key = value` file; `#` starts a comment.
inline void load_config_file(const std::string& path, PipelineConfig& c) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(path + ":" + std::to_string(no) + ": expected key=value");
        set_config_value(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline void validate_config(const PipelineConfig& c) {
    auto need = [](bool ok, const std::string& what) {
        if (!ok) throw ValidationError("config: " + what);
    };
    need(!c.flows.empty(), "flows path is required");
    need(!c.meta.empty(), "meta path is required");
    need(!c.out.empty(), "output directory is required (flag, config, or " + std::string(kOutputEnv) + ")");
    need(c.keep_fraction >= 0 && c.keep_fraction <= 1, "keep_fraction must lie in [0,1]");
    need(c.vigor_threshold >= 0 && c.vigor_threshold <= 1, "vigor_threshold must lie in [0,1]");
    need(c.dim >= 2, "dim must be >= 2");
    need(c.learning_rate > 0, "learning_rate must be positive");
    need(c.epochs >= 1, "epochs must be >= 1");
    need(c.eps > 0, "eps must be positive");
    need(c.min_samples >= 1, "min_samples must be >= 1");
    need(c.clusters_k >= 1, "clusters_k must be >= 1");
    need(c.max_lag >= 1, "max_lag must be >= 1");
    need(c.dendrogram_cutoff >= 0, "dendrogram_cutoff must be non-negative");
    need(c.period_a.has_value() == c.period_b.has_value(), "period_a and period_b must be given together");
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

namespace detail {

/// Re-throws the active exception with `prefix` prepended, keeping its category.
[[noreturn]] inline void rethrow_with(const std::string& prefix) {
    try {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const TrainingError& e) {
        throw TrainingError(prefix + e.what());
    } catch (const RenderError& e) {
        throw RenderError(prefix + e.what());
    } catch (const DomainError& e) {
        throw DomainError(prefix + e.what());
    } catch (const LookupError& e) {
        throw LookupError(prefix + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(prefix + e.what());
    }
}

/// Runs `fn(i)` for i in [0, count) on a small worker pool. The error from the lowest
/// failing index is re-thrown, tagged with its year.
inline void for_each_year(const std::vector<int>& years, int threads, const std::function<void(std::size_t)>& fn) {
    const std::size_t count = years.size();
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned hw = threads > 0 ? static_cast<unsigned>(threads) : std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(hw, count));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    for (std::size_t i = 0; i < count; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (...) {
            rethrow_with("year " + std::to_string(years[i]) + ": ");
        }
    }
}

}  // namespace detail

template <class Fn>
decltype(auto) run_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (...) {
        detail::rethrow_with("stage '" + name + "': ");
    }
}

inline TemporalFlowSet load_inputs(const PipelineConfig& c) {
    return load_flows(c.flows, c.meta, c.population);
}

namespace paths {

inline fs::path backbone(const fs::path& out, int y) { return out / "backbone" / ("backbone_" + std::to_string(y) + ".csv"); }
inline fs::path embedding(const fs::path& out, int y) { return out / "embed" / ("embedding_" + std::to_string(y) + ".csv"); }
inline fs::path aligned(const fs::path& out, int y) { return out / "align" / ("aligned_" + std::to_string(y) + ".csv"); }
inline fs::path tree(const fs::path& out, int y) { return out / "cluster" / ("tree_" + std::to_string(y) + ".json"); }

}  // namespace paths

/// Stage directories owned by the pipeline inside an output directory.
inline const std::vector<std::string>& stage_dirs() {
    static const std::vector<std::string> dirs = {"stats", "backbone", "metrics", "embed", "align",
                                                  "cluster", "persistence", "render"};
    return dirs;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline void stage_stats(const PipelineConfig& c, const TemporalFlowSet& set) {
    const fs::path out = c.out;
    std::ostringstream summary;
    summary << "year,nodes,density,total_volume,migration_rate\n";
    for (const auto& net : set.networks) {
        std::optional<FlowSummary> fsum;
        try {
            fsum = flow_summary(net, set.meta);
        } catch (const DomainError&) {
            // no population for this year: rates left blank
        }
        summary << net.year << ',' << net.size() << ',' << csv::real(density(net)) << ',' << net.total() << ','
                << (fsum ? csv::real(fsum->migration_rate) : "") << '\n';

        std::ostringstream nodes;
        nodes << "node,in_degree,out_degree,in_strength,out_strength,net_migration_rate\n";
        const auto stats = node_statistics(net);
        for (std::size_t i = 0; i < stats.size(); ++i)
            nodes << csv::quote(net.nodes[i]) << ',' << stats[i].in_degree << ',' << stats[i].out_degree << ','
                  << stats[i].in_strength << ',' << stats[i].out_strength << ','
                  << (fsum ? csv::real(fsum->net_migration_rate[i]) : "") << '\n';
        io::write_atomic(out / "stats" / ("nodes_" + std::to_string(net.year) + ".csv"), nodes.str());

        std::ostringstream cc;
        cc << "kind,value,fraction\n";
        std::vector<double> w, si, so;
        const auto n = static_cast<Eigen::Index>(net.size());
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) w.push_back(static_cast<double>(net.weights(i, j)));
        for (const auto& s : stats) {
            si.push_back(static_cast<double>(s.in_strength));
            so.push_back(static_cast<double>(s.out_strength));
        }
        for (const auto& [kind, vals] : {std::pair{"weight", w}, std::pair{"in_strength", si}, std::pair{"out_strength", so}})
            for (const auto& p : ccdf(vals)) cc << kind << ',' << csv::real(p.value) << ',' << csv::real(p.fraction) << '\n';
        io::write_atomic(out / "stats" / ("ccdf_" + std::to_string(net.year) + ".csv"), cc.str());
    }
    io::write_atomic(out / "stats" / "summary.csv", summary.str());
}

inline void stage_backbone(const PipelineConfig& c, const TemporalFlowSet& set) {
    const auto years = set.years();
    detail::for_each_year(years, c.threads, [&](std::size_t t) {
        const auto bb = extract_backbone(set.networks[t], c.keep_fraction, c.vigor_threshold);
        io::write_atomic(paths::backbone(c.out, years[t]), io::backbone_csv(bb));
    });
}

inline std::vector<SignedBackbone> read_backbones(const PipelineConfig& c, const TemporalFlowSet& set) {
    std::vector<SignedBackbone> out;
    for (int y : set.years()) out.push_back(io::read_backbone(paths::backbone(c.out, y), y, set.nodes()));
    return out;
}

inline void stage_metrics(const PipelineConfig& c, const TemporalFlowSet& set) {
    const auto bbs = read_backbones(c, set);
    for (std::size_t t = 0; t < bbs.size(); ++t)
        io::write_atomic(fs::path(c.out) / "metrics" / ("metrics_" + std::to_string(bbs[t].year) + ".json"),
                         io::metrics_json(bbs[t], density(set.networks[t])));
}

inline void stage_embed(const PipelineConfig& c, const TemporalFlowSet& set) {
    const auto years = set.years();
    detail::for_each_year(years, c.threads, [&](std::size_t t) {
        const auto m = dense_signed_weights(set.networks[t]);
        const TrainConfig tc{c.dim, c.learning_rate, c.epochs, c.year_seed(years[t])};
        const auto emb = learn_embedding(m, tc, years[t]);
        io::write_atomic(paths::embedding(c.out, years[t]), io::embedding_csv(emb));
        io::json meta = {{"year", years[t]},
                         {"dim", tc.dim},
                         {"learning_rate", tc.learning_rate},
                         {"epochs", tc.epochs},
                         {"seed", tc.seed},
                         {"final_loss", embedding_loss(emb, m)},
                         {"loss", "mean |cos(z_i,z_j) - vigor_ij| over ordered pairs i != j"}};
        io::write_atomic(fs::path(c.out) / "embed" / ("embedding_meta_" + std::to_string(years[t]) + ".json"),
                         meta.dump(2) + "\n");
    });
    if (c.loss_curve_dims.empty()) return;
    std::vector<std::vector<double>> losses(years.size(), std::vector<double>(c.loss_curve_dims.size()));
    detail::for_each_year(years, c.threads, [&](std::size_t t) {
        const auto m = dense_signed_weights(set.networks[t]);
        for (std::size_t k = 0; k < c.loss_curve_dims.size(); ++k) {
            const TrainConfig tc{c.loss_curve_dims[k], c.learning_rate, c.epochs, c.year_seed(years[t])};
            losses[t][k] = embedding_loss(learn_embedding(m, tc, years[t]), m);
        }
    });
    std::ostringstream out;
    out << "dim,year,loss\n";
    for (std::size_t k = 0; k < c.loss_curve_dims.size(); ++k)
        for (std::size_t t = 0; t < years.size(); ++t)
            out << c.loss_curve_dims[k] << ',' << years[t] << ',' << csv::real(losses[t][k]) << '\n';
    io::write_atomic(fs::path(c.out) / "embed" / "loss_curve.csv", out.str());
}

inline void stage_align(const PipelineConfig& c, const TemporalFlowSet& set) {
    std::vector<EmbeddingMatrix> series;
    for (int y : set.years()) series.push_back(io::read_embedding(paths::embedding(c.out, y), y));
    const auto aligned = align_series(series);
    for (const auto& a : aligned) io::write_atomic(paths::aligned(c.out, a.year), io::embedding_csv(a));
    std::ostringstream out;
    out << "year,lag,stability_error\n";
    for (const auto& p : lagged_stability(aligned, c.max_lag))
        out << p.year << ',' << p.lag << ',' << csv::real(p.error) << '\n';
    io::write_atomic(fs::path(c.out) / "align" / "stability.csv", out.str());
    io::json meta = {{"formula", "sum_i ||z_i(b) R - z_i(a)|| / (2 n), R = orthogonal Procrustes rotation of b onto a"},
                     {"alignment", "consecutive years, chained from the first year"},
                     {"max_lag", c.max_lag}};
    io::write_atomic(fs::path(c.out) / "align" / "stability_meta.json", meta.dump(2) + "\n");
}

inline void stage_cluster(const PipelineConfig& c, const TemporalFlowSet& set) {
    const auto years = set.years();
    detail::for_each_year(years, c.threads, [&](std::size_t t) {
        const auto emb = io::read_embedding(paths::aligned(c.out, years[t]), years[t]);
        const auto dm = cosine_distance_matrix(emb);
        const auto density_labels = dbscan(dm, c.eps, c.min_samples);
        const auto tree = hierarchical(dm);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(c.clusters_k), dm.size());
        const auto hier_labels = cut_tree(tree, k);
        std::string rows = "year,method,node,cluster\n";
        rows += io::cluster_rows(years[t], density_labels, emb.nodes);
        rows += io::cluster_rows(years[t], hier_labels, emb.nodes);
        io::write_atomic(fs::path(c.out) / "cluster" / ("clusters_" + std::to_string(years[t]) + ".csv"), rows);
        io::write_atomic(paths::tree(c.out, years[t]), io::merge_tree_json(tree));
    });
}

/// Explicit periods, or the first two equal halves of the covered years.
inline std::optional<std::pair<YearRange, YearRange>> comparison_periods(const PipelineConfig& c,
                                                                          const std::vector<int>& years) {
    if (c.period_a && c.period_b) return std::pair{*c.period_a, *c.period_b};
    const int half = static_cast<int>(years.size()) / 2;
    if (half < 1) return std::nullopt;
    const int y0 = years.front();
    return std::pair{YearRange{y0, y0 + half - 1}, YearRange{y0 + half, y0 + 2 * half - 1}};
}

inline void stage_persistence(const PipelineConfig& c, const TemporalFlowSet& set) {
    const auto bbs = read_backbones(c, set);
    const fs::path out = fs::path(c.out) / "persistence";
    const auto table = link_persistence(bbs);
    io::write_atomic(out / "persistence.csv", io::persistence_csv(table));

    std::ostringstream hist;
    hist << "kind,bin,count\n";
    const auto ph = persistence_histogram(table);
    for (std::size_t b = 1; b < ph.size(); ++b) hist << "persistence," << b << ',' << ph[b] << '\n';

    std::ostringstream diff_csv;
    diff_csv << "src,dst,count_a,count_b,diff\n";
    if (auto periods = comparison_periods(c, set.years())) {
        const auto [a, b] = *periods;
        const auto diff = period_frequency_diff(bbs, a, b);
        std::vector<SignedBackbone> in_a, in_b;
        for (const auto& bb : bbs) {
            if (a.contains(bb.year)) in_a.push_back(bb);
            if (b.contains(bb.year)) in_b.push_back(bb);
        }
        auto count_in = [](const std::vector<SignedBackbone>& part, const DirectedPair& p) {
            int k = 0;
            for (const auto& bb : part)
                for (const auto& e : bb.edges)
                    if (e.src == p.first && e.dst == p.second) ++k;
            return k;
        };
        for (const auto& [pair, d] : diff)
            diff_csv << csv::quote(table.nodes[pair.first]) << ',' << csv::quote(table.nodes[pair.second]) << ','
                     << count_in(in_a, pair) << ',' << count_in(in_b, pair) << ',' << d << '\n';
        const auto dh = diff_histogram(diff, a.length());
        for (std::size_t i = 0; i < dh.size(); ++i)
            hist << "period_diff," << static_cast<int>(i) - a.length() << ',' << dh[i] << '\n';
    }
    io::write_atomic(out / "period_diff.csv", diff_csv.str());
    io::write_atomic(out / "histograms.csv", hist.str());
}

inline void stage_render(const PipelineConfig& c, const TemporalFlowSet& set, std::vector<std::string>* warnings = nullptr) {
    const fs::path out = fs::path(c.out) / "render";
    const auto charts = render_distributions(set);
    for (const auto& [name, doc] : charts.documents) io::write_atomic(out / (name + ".svg"), doc);
    if (warnings) warnings->insert(warnings->end(), charts.warnings.begin(), charts.warnings.end());

    const auto bbs = read_backbones(c, set);
    for (const auto& bb : bbs) {
        SpatialOptions opt;
        opt.title = "Signed backbone " + std::to_string(bb.year);
        io::write_atomic(out / ("spatial_" + std::to_string(bb.year) + ".svg"), render_spatial(bb, set.meta, opt));
        for (const auto& ego : c.ego) {
            const auto idx = set.networks.front().index_of(ego);
            SignedBackbone sub = bb;
            sub.edges = ego_subgraph(std::span<const SignedEdge>(bb.edges), idx);
            SpatialOptions eo;
            eo.title = "Ego network of " + ego + ", " + std::to_string(bb.year);
            eo.highlight = idx;
            io::write_atomic(out / ("ego_" + ego + "_" + std::to_string(bb.year) + ".svg"),
                             render_spatial(sub, set.meta, eo));
        }
    }
    std::vector<std::string> labels;
    for (const auto& m : set.meta) labels.push_back(m.label.empty() ? m.id : m.label);
    for (int y : set.years()) {
        const auto tree = io::read_merge_tree(paths::tree(c.out, y), set.nodes().size());
        io::write_atomic(out / ("dendrogram_" + std::to_string(y) + ".svg"),
                         render_dendrogram(tree, c.dendrogram_cutoff, labels, "Complete-linkage dendrogram " + std::to_string(y)));
    }

    // stability by lag
    {
        csv::Reader r((fs::path(c.out) / "align" / "stability.csv").string());
        r.expect_header("year,lag,stability_error");
        std::map<int, Series> by_lag;
        std::vector<std::string> f;
        while (r.next(f)) {
            if (f.size() != 3) r.fail("expected 3 fields");
            const auto lag = static_cast<int>(csv::parse_int(f[1]).value_or(0));
            auto& s = by_lag[lag];
            s.label = "lag " + f[1];
            s.points.emplace_back(static_cast<double>(csv::parse_int(f[0]).value_or(0)), csv::parse_real(f[2]).value_or(0));
        }
        std::vector<Series> series;
        for (auto& [_, s] : by_lag) series.push_back(std::move(s));
        io::write_atomic(out / "stability.svg", render_lines("Stability error", series, "year", "stability error"));
    }

    const auto table = link_persistence(bbs);
    std::vector<std::pair<int, std::int64_t>> bars;
    const auto ph = persistence_histogram(table);
    for (std::size_t b = 1; b < ph.size(); ++b) bars.emplace_back(static_cast<int>(b), ph[b]);
    io::write_atomic(out / "persistence.svg", render_bars("Link persistence", bars, "years present", "links"));
    if (auto periods = comparison_periods(c, set.years())) {
        const auto diff = period_frequency_diff(bbs, periods->first, periods->second);
        const int span = periods->first.length();
        const auto dh = diff_histogram(diff, span);
        std::vector<std::pair<int, std::int64_t>> dbars;
        for (std::size_t i = 0; i < dh.size(); ++i) dbars.emplace_back(static_cast<int>(i) - span, dh[i]);
        io::write_atomic(out / "period_diff.svg", render_bars("Period frequency difference", dbars, "count a - count b", "links"));
    }

    const fs::path curve = fs::path(c.out) / "embed" / "loss_curve.csv";
    if (fs::exists(curve)) {
        csv::Reader r(curve.string());
        r.expect_header("dim,year,loss");
        std::map<int, std::pair<double, int>> acc;
        std::vector<std::string> f;
        while (r.next(f)) {
            if (f.size() != 3) r.fail("expected 3 fields");
            auto& [sum, cnt] = acc[static_cast<int>(csv::parse_int(f[0]).value_or(0))];
            sum += csv::parse_real(f[2]).value_or(0);
            ++cnt;
        }
        Series s{"mean loss", {}};
        for (const auto& [d, sc] : acc) s.points.emplace_back(d, sc.first / sc.second);
        io::write_atomic(out / "loss_curve.svg", render_lines("Embedding loss by dimension", {s}, "d", "mean loss"));
    }
}

// ---------------------------------------------------------------------------
// Manifest and orchestration
// ---------------------------------------------------------------------------

/// Lists every regular file under `out` (except the manifest itself) with its digest.
inline io::json build_manifest(const PipelineConfig& c) {
    const fs::path root = c.out;
    std::vector<fs::path> files;
    if (fs::exists(root))
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file()) {
                const auto rel = fs::relative(entry.path(), root);
                if (rel == "manifest.json") continue;
                files.push_back(rel);
            }
    std::sort(files.begin(), files.end());
    io::json arts = io::json::array();
    for (const auto& rel : files) {
        const std::string stem = rel.stem().string();
        io::json a;
        a["path"] = rel.generic_string();
        std::string kind = stem;
        const auto us = stem.rfind('_');
        if (us != std::string::npos && stem.size() - us == 5 &&
            std::all_of(stem.begin() + static_cast<std::ptrdiff_t>(us) + 1, stem.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
            kind = stem.substr(0, us);
            a["kind"] = kind;
            a["year"] = std::stoi(stem.substr(us + 1));
        } else {
            a["kind"] = kind;
        }
        a["sha256"] = io::sha256_hex(io::read_file(root / rel));
        arts.push_back(std::move(a));
    }
    io::json cfg = io::json::object();
    for (const auto& [k, v] : config_entries(c)) cfg[k] = v;
    return {{"config_hash", config_hash(c)}, {"config", cfg}, {"artifacts", arts}};
}

inline io::json write_manifest(const PipelineConfig& c) {
    auto m = build_manifest(c);
    io::write_atomic(fs::path(c.out) / "manifest.json", m.dump(2) + "\n");
    return m;
}

/// Fails before any computation when `dir` cannot be created or written.
inline void require_writable(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("output directory " + dir.string() + " cannot be created: " + ec.message());
    const fs::path probe = dir / ".flowbone-probe";
    {
        std::ofstream p(probe);
        if (!p || !(p << "probe") || !p.flush()) throw IoError("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

struct PipelineResult {
    io::json manifest;
    std::vector<std::string> warnings;
};

/// Runs every stage into a staging directory next to `cfg.out` and moves the results in
/// only when all stages succeed.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    validate_config(cfg);
    const fs::path out = fs::absolute(cfg.out).lexically_normal();
    require_writable(out);
    const fs::path staging = out.parent_path() / (out.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(staging, ec);
    require_writable(staging);

    PipelineConfig sc = cfg;
    sc.out = staging.string();
    PipelineResult result;
    try {
        const auto set = run_stage("load", [&] { return load_inputs(sc); });
        run_stage("stats", [&] { stage_stats(sc, set); });
        run_stage("backbone", [&] { stage_backbone(sc, set); });
        run_stage("metrics", [&] { stage_metrics(sc, set); });
        run_stage("embed", [&] { stage_embed(sc, set); });
        run_stage("align", [&] { stage_align(sc, set); });
        run_stage("cluster", [&] { stage_cluster(sc, set); });
        run_stage("persistence", [&] { stage_persistence(sc, set); });
        run_stage("render", [&] { stage_render(sc, set, &result.warnings); });
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }

    for (const auto& d : stage_dirs()) fs::remove_all(out / d, ec);
    fs::remove(out / "manifest.json", ec);
    for (const auto& d : stage_dirs())
        if (fs::exists(staging / d)) fs::rename(staging / d, out / d);
    fs::remove_all(staging, ec);

    PipelineConfig fc = cfg;
    fc.out = out.string();
    result.manifest = write_manifest(fc);
    return result;
}

/// Writes a synthetic data set as flows.csv, meta.csv, population.csv and planted.csv.
inline void write_synthetic(const SynthSet& s, const fs::path& dir) {
    std::ostringstream flows, meta, pop, planted;
    write_flows(flows, s.flows);
    write_meta(meta, s.flows.meta);
    write_population(pop, s.flows.meta);
    planted << "id,planted,hub\n";
    for (std::size_t i = 0; i < s.planted.size(); ++i)
        planted << csv::quote(s.flows.meta[i].id) << ',' << s.planted[i] << ',' << (s.hub[i] ? 1 : 0) << '\n';
    io::write_atomic(dir / "flows.csv", flows.str());
    io::write_atomic(dir / "meta.csv", meta.str());
    io::write_atomic(dir / "population.csv", pop.str());
    io::write_atomic(dir / "planted.csv", planted.str());
}

}  // namespace flowbone
