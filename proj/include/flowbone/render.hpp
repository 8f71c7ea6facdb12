#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flowbone/backbone.hpp"
#include "flowbone/cluster.hpp"
#include "flowbone/csv.hpp"
#include "flowbone/error.hpp"
#include "flowbone/flownet.hpp"
#include "flowbone/svg.hpp"

namespace flowbone {

// ---------------------------------------------------------------------------
// Spatial backbone map
// ---------------------------------------------------------------------------

struct SpatialOptions {
    double width = 900.0;
    double margin = 30.0;
    double max_radius = 14.0;
    double min_radius = 2.0;
    bool labels = true;
    std::string title;
    std::optional<std::size_t> highlight;  // ego node
};

/// Equirectangular map (standard parallel at the mean latitude). Node area scales with
/// population in the backbone year; arrows point from origin to destination.
inline std::string render_spatial(const SignedBackbone& bb, std::span<const NodeMeta> meta,
                                  const SpatialOptions& opt = {}) {
    std::map<std::string, const NodeMeta*> by_id;
    for (const auto& m : meta) by_id[m.id] = &m;
    std::vector<std::string> missing;
    for (const auto& id : bb.nodes)
        if (!by_id.contains(id)) missing.push_back(id);
    if (!missing.empty()) {
        std::string msg = "missing coordinates for:";
        for (const auto& id : missing) msg += " " + id;
        throw RenderError(msg);
    }
    const std::size_t n = bb.nodes.size();
    std::vector<const NodeMeta*> nm(n);
    for (std::size_t i = 0; i < n; ++i) nm[i] = by_id[bb.nodes[i]];

    double lat0 = 90, lat1 = -90, lon0 = 180, lon1 = -180, lat_mean = 0;
    for (const auto* m : nm) {
        lat0 = std::min(lat0, m->latitude);
        lat1 = std::max(lat1, m->latitude);
        lon0 = std::min(lon0, m->longitude);
        lon1 = std::max(lon1, m->longitude);
        lat_mean += m->latitude;
    }
    if (n > 0) lat_mean /= static_cast<double>(n);
    else lat0 = lat1 = lon0 = lon1 = 0;
    const double kx = std::cos(lat_mean * std::numbers::pi / 180.0);
    const double span_x = std::max((lon1 - lon0) * kx, 1e-6);
    const double span_y = std::max(lat1 - lat0, 1e-6);
    const double inner_w = opt.width - 2 * opt.margin;
    const double scale = inner_w / span_x;
    const double height = span_y * scale + 2 * opt.margin + (opt.title.empty() ? 0 : 20);
    const double top = opt.margin + (opt.title.empty() ? 0 : 20);
    auto px = [&](const NodeMeta* m) { return opt.margin + (m->longitude - lon0) * kx * scale; };
    auto py = [&](const NodeMeta* m) { return top + (lat1 - m->latitude) * scale; };

    bool sized = n > 0;
    double pop_max = 0;
    for (const auto* m : nm) {
        auto p = m->population_in(bb.year);
        if (!p) sized = false;
        else pop_max = std::max(pop_max, static_cast<double>(*p));
    }
    std::vector<double> radius(n, 0.5 * (opt.min_radius + opt.max_radius));
    if (sized && pop_max > 0)
        for (std::size_t i = 0; i < n; ++i)
            radius[i] = std::max(opt.min_radius,
                                 opt.max_radius * std::sqrt(static_cast<double>(*nm[i]->population_in(bb.year)) / pop_max));

    svg::Document doc(opt.width, height);
    doc.style(
        ".edge{fill:none;stroke-width:1.2;opacity:0.75}"
        ".pos{stroke:#1f5fbf}"
        ".neg{stroke:#c8302c;stroke-dasharray:5 3}"
        ".node{fill:#777;stroke:#222;stroke-width:0.6;opacity:0.85}"
        ".ego{fill:#f2b705}"
        ".label{font:9px sans-serif;fill:#222}"
        ".title{font:14px sans-serif}");
    doc.defs(
        "  <marker id=\"arrow-pos\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
        "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#1f5fbf\"/></marker>\n"
        "  <marker id=\"arrow-neg\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
        "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#c8302c\"/></marker>\n");
    if (!opt.title.empty()) doc.text(opt.margin, opt.margin, opt.title, {{"class", "title"}});

    doc.open_group({{"class", "edges"}});
    for (const auto& e : bb.edges) {
        const double x1 = px(nm[e.src]), y1 = py(nm[e.src]);
        const double x2 = px(nm[e.dst]), y2 = py(nm[e.dst]);
        const double dx = x2 - x1, dy = y2 - y1;
        const double len = std::max(std::hypot(dx, dy), 1e-9);
        // bend to the right of travel so reciprocal links stay apart
        const double cx = (x1 + x2) / 2 + 0.12 * dy;
        const double cy = (y1 + y2) / 2 - 0.12 * dx;
        const double tx = x2 - cx, ty = y2 - cy;
        const double tl = std::max(std::hypot(tx, ty), 1e-9);
        const double shrink = std::min(radius[e.dst], 0.45 * len);
        const double ex = x2 - tx / tl * shrink, ey = y2 - ty / tl * shrink;
        const bool pos = e.sign > 0;
        doc.element("path", {{"class", pos ? "edge pos" : "edge neg"},
                             {"d", "M" + svg::num(x1) + "," + svg::num(y1) + " Q" + svg::num(cx) + "," + svg::num(cy) +
                                       " " + svg::num(ex) + "," + svg::num(ey)},
                             {"marker-end", pos ? "url(#arrow-pos)" : "url(#arrow-neg)"},
                             {"data-src", bb.nodes[e.src]},
                             {"data-dst", bb.nodes[e.dst]}});
    }
    doc.close_group();

    doc.open_group({{"class", "nodes"}});
    for (std::size_t i = 0; i < n; ++i) {
        const bool ego = opt.highlight && *opt.highlight == i;
        doc.element("circle", {{"class", ego ? "node ego" : "node"},
                               {"cx", svg::num(px(nm[i]))},
                               {"cy", svg::num(py(nm[i]))},
                               {"r", svg::num(radius[i])},
                               {"data-id", bb.nodes[i]}});
    }
    doc.close_group();
    if (opt.labels) {
        doc.open_group({{"class", "labels"}});
        for (std::size_t i = 0; i < n; ++i)
            doc.text(px(nm[i]) + radius[i] + 1, py(nm[i]) + 3, nm[i]->label.empty() ? bb.nodes[i] : nm[i]->label,
                     {{"class", "label"}});
        doc.close_group();
    }
    return doc.str();
}

// ---------------------------------------------------------------------------
// Dendrogram
// ---------------------------------------------------------------------------

/// y = top + plot_height * (1 - height / max_height); the root of the full tree sits at `top`.
struct DendrogramScale {
    double top = 40.0;
    double plot_height = 360.0;
    double max_height = 1.0;

    double y_of(double h) const { return top + plot_height * (1.0 - h / max_height); }
};

struct DendrogramLayout {
    DendrogramScale scale;
    std::vector<std::size_t> leaf_order;      // leaves left to right
    std::vector<double> leaf_x;                // indexed by leaf id
    struct Bracket {
        int id;
        double height;
        double x_a, y_a, x_b, y_b, y;
    };
    std::vector<Bracket> brackets;             // merges at or below the cutoff
};

inline DendrogramLayout layout_dendrogram(const MergeTree& tree, double height_cutoff, double width = 900.0) {
    if (height_cutoff < 0.0) throw DomainError("dendrogram cutoff must be non-negative");
    const std::size_t n = tree.leaves;
    if (n == 0 || tree.merges.size() + 1 != n) throw DomainError("malformed merge tree");
    std::map<int, std::pair<int, int>> children;
    for (const auto& m : tree.merges) children[m.id] = {m.a, m.b};
    DendrogramLayout lay;
    double hmax = 0;
    for (const auto& m : tree.merges) hmax = std::max(hmax, m.height);
    lay.scale.max_height = hmax > 0 ? hmax : 1.0;

    // depth-first from the root, left child first
    std::vector<int> stack{static_cast<int>(n == 1 ? 0 : tree.merges.back().id)};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        auto it = children.find(id);
        if (it == children.end()) {
            lay.leaf_order.push_back(static_cast<std::size_t>(id));
            continue;
        }
        stack.push_back(it->second.second);
        stack.push_back(it->second.first);
    }
    const double margin = 30.0;
    const double step = n > 1 ? (width - 2 * margin) / static_cast<double>(n - 1) : 0.0;
    lay.leaf_x.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) lay.leaf_x[lay.leaf_order[k]] = margin + step * static_cast<double>(k);

    std::map<int, std::pair<double, double>> pos;  // id -> (x, y)
    for (std::size_t i = 0; i < n; ++i) pos[static_cast<int>(i)] = {lay.leaf_x[i], lay.scale.y_of(0.0)};
    for (const auto& m : tree.merges) {
        if (m.height > height_cutoff) break;  // heights are non-decreasing
        const auto [xa, ya] = pos.at(m.a);
        const auto [xb, yb] = pos.at(m.b);
        const double y = lay.scale.y_of(m.height);
        lay.brackets.push_back({m.id, m.height, xa, ya, xb, yb, y});
        pos[m.id] = {(xa + xb) / 2, y};
    }
    return lay;
}

/// Dendrogram with merges above `height_cutoff` left out, so the forest below the cut is shown.
inline std::string render_dendrogram(const MergeTree& tree, double height_cutoff,
                                     std::span<const std::string> labels = {}, const std::string& title = {}) {
    const DendrogramLayout lay = layout_dendrogram(tree, height_cutoff);
    const double width = 900.0;
    const double height = lay.scale.top + lay.scale.plot_height + 70.0;
    svg::Document doc(width, height);
    doc.style(".bracket{fill:none;stroke:#333;stroke-width:1}.leaf{fill:#333}"
              ".label{font:8px sans-serif}.title{font:14px sans-serif}");
    if (!title.empty()) doc.text(30, 20, title, {{"class", "title"}});
    doc.open_group({{"class", "brackets"}});
    for (const auto& b : lay.brackets)
        doc.element("path", {{"class", "bracket"},
                             {"d", "M" + svg::num(b.x_a) + "," + svg::num(b.y_a) + " V" + svg::num(b.y) + " H" +
                                       svg::num(b.x_b) + " V" + svg::num(b.y_b)},
                             {"data-id", std::to_string(b.id)},
                             {"data-height", csv::real(b.height)}});
    doc.close_group();
    const double base = lay.scale.y_of(0.0);
    doc.open_group({{"class", "leaves"}});
    for (std::size_t leaf : lay.leaf_order) {
        doc.element("circle", {{"class", "leaf"},
                               {"cx", svg::num(lay.leaf_x[leaf])},
                               {"cy", svg::num(base)},
                               {"r", "1.50"},
                               {"data-leaf", std::to_string(leaf)}});
        const std::string name = leaf < labels.size() ? labels[leaf] : std::to_string(leaf);
        doc.text(lay.leaf_x[leaf], base + 8, name,
                 {{"class", "label"},
                  {"transform", "rotate(90 " + svg::num(lay.leaf_x[leaf]) + " " + svg::num(base + 8) + ")"}});
    }
    doc.close_group();
    return doc.str();
}

// ---------------------------------------------------------------------------
// Charts
// ---------------------------------------------------------------------------

struct PlotArea {
    double left = 60.0;
    double top = 40.0;
    double width = 520.0;
    double height = 320.0;
};

/// Linear axis box: x in [x0, x1], y in [y0, y1].
struct LinearAxis {
    PlotArea area;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

    std::pair<double, double> map(double x, double y) const {
        return {area.left + (x - x0) / (x1 - x0) * area.width, area.top + (y1 - y) / (y1 - y0) * area.height};
    }
};

/// Log-log axis box over decades: x' = log10 x in [lx0, lx1], y' = log10 y in [ly0, ly1].
struct LogLogAxis {
    PlotArea area;
    double lx0 = 0, lx1 = 1, ly0 = -1, ly1 = 0;

    std::pair<double, double> map(double x, double y) const {
        return {area.left + (std::log10(x) - lx0) / (lx1 - lx0) * area.width,
                area.top + (ly1 - std::log10(y)) / (ly1 - ly0) * area.height};
    }
};

namespace detail {

inline svg::Document chart_frame(const PlotArea& a, const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel) {
    svg::Document doc(a.left + a.width + 140, a.top + a.height + 50);
    doc.style(".axis{stroke:#000;stroke-width:1}.tick{font:10px sans-serif}.title{font:14px sans-serif}"
              ".series{fill:none;stroke-width:1.5}.band{fill:#9ab;opacity:0.35;stroke:none}"
              ".mean{fill:none;stroke:#000;stroke-width:2}.bar{fill:#4a7fb5}.legend{font:10px sans-serif}");
    doc.text(a.left, 20, title, {{"class", "title"}});
    doc.line(a.left, a.top + a.height, a.left + a.width, a.top + a.height, "axis");
    doc.line(a.left, a.top, a.left, a.top + a.height, "axis");
    doc.text(a.left + a.width / 2, a.top + a.height + 38, xlabel, {{"class", "tick"}});
    doc.text(8, a.top - 10, ylabel, {{"class", "tick"}});
    return doc;
}

inline const char* palette(std::size_t k) {
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return colors[k % 10];
}

}  // namespace detail

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

/// Line chart on linear axes. y range starts at 0 unless data go negative.
inline std::string render_lines(const std::string& title, const std::vector<Series>& series, const std::string& xlabel,
                                const std::string& ylabel) {
    LinearAxis ax;
    bool any = false;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 0;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!any) xmin = xmax = x;
            any = true;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax == xmin) {
        xmin -= 1;
        xmax += 1;
    }
    if (ymax == ymin) ymax = ymin + 1;
    ax.x0 = xmin;
    ax.x1 = xmax;
    ax.y0 = ymin;
    ax.y1 = ymax * 1.1;
    auto doc = detail::chart_frame(ax.area, title, xlabel, ylabel);
    for (int t = 0; t <= 4; ++t) {
        const double yv = ax.y0 + (ax.y1 - ax.y0) * t / 4.0;
        const auto [px, py] = ax.map(ax.x0, yv);
        doc.text(px - 55, py + 3, csv::real(yv), {{"class", "tick"}});
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& [x, y] : series[k].points) pts.push_back(ax.map(x, y));
        doc.polyline(pts, {{"class", "series"}, {"stroke", detail::palette(k)}, {"data-label", series[k].label}});
        doc.text(ax.area.left + ax.area.width + 10, ax.area.top + 14.0 * static_cast<double>(k), series[k].label,
                 {{"class", "legend"}, {"fill", detail::palette(k)}});
    }
    return doc.str();
}

/// Vertical bars over integer categories.
inline std::string render_bars(const std::string& title, const std::vector<std::pair<int, std::int64_t>>& bars,
                               const std::string& xlabel, const std::string& ylabel) {
    PlotArea a;
    auto doc = detail::chart_frame(a, title, xlabel, ylabel);
    std::int64_t top = 1;
    for (const auto& [_, c] : bars) top = std::max(top, c);
    const double w = a.width / static_cast<double>(std::max<std::size_t>(bars.size(), 1));
    for (std::size_t k = 0; k < bars.size(); ++k) {
        const double h = a.height * static_cast<double>(bars[k].second) / static_cast<double>(top);
        const double x = a.left + w * static_cast<double>(k);
        doc.element("rect", {{"class", "bar"},
                             {"x", svg::num(x + 1)},
                             {"y", svg::num(a.top + a.height - h)},
                             {"width", svg::num(std::max(w - 2, 0.5))},
                             {"height", svg::num(h)},
                             {"data-bin", std::to_string(bars[k].first)},
                             {"data-count", std::to_string(bars[k].second)}});
        doc.text(x + w / 2 - 4, a.top + a.height + 14, std::to_string(bars[k].first), {{"class", "tick"}});
    }
    return doc.str();
}

/// Number of standard deviations spanned by the across-year band.
inline constexpr double kBandSigmas = 2.58;

struct CcdfChart {
    LogLogAxis axis;
    std::vector<std::pair<int, std::vector<CcdfPoint>>> per_year;
    std::vector<double> grid;       // x values for the mean line and band
    std::vector<double> mean;
    std::vector<double> sd;
};

/// Builds per-year CCDFs of the positive values and their across-year mean and spread
/// on a common log-spaced grid.
inline CcdfChart ccdf_chart(const std::vector<std::pair<int, std::vector<double>>>& samples, int grid_points = 60) {
    CcdfChart c;
    double vmin = 0, vmax = 0, fmin = 1;
    bool any = false;
    for (const auto& [year, vals] : samples) {
        std::vector<double> pos;
        for (double v : vals)
            if (v > 0) pos.push_back(v);
        if (pos.empty()) continue;
        auto cc = ccdf(pos);
        for (const auto& p : cc) {
            if (!any) vmin = vmax = p.value;
            any = true;
            vmin = std::min(vmin, p.value);
            vmax = std::max(vmax, p.value);
            fmin = std::min(fmin, p.fraction);
        }
        c.per_year.emplace_back(year, std::move(cc));
    }
    if (!any) throw DomainError("no positive values to plot");
    c.axis.lx0 = std::floor(std::log10(vmin));
    c.axis.lx1 = std::max(std::ceil(std::log10(vmax)), c.axis.lx0 + 1);
    c.axis.ly0 = std::min(std::floor(std::log10(fmin)), -1.0);
    c.axis.ly1 = 0.0;

    for (int g = 0; g < grid_points; ++g) {
        const double lx = std::log10(vmin) + (std::log10(vmax) - std::log10(vmin)) * g / std::max(grid_points - 1, 1);
        const double x = std::pow(10.0, lx);
        std::vector<double> fr;
        for (const auto& [year, cc] : c.per_year) {
            // share of values >= x: first CCDF point with value >= x
            auto it = std::lower_bound(cc.begin(), cc.end(), x,
                                       [](const CcdfPoint& p, double v) { return p.value < v; });
            fr.push_back(it == cc.end() ? 0.0 : it->fraction);
        }
        double m = 0;
        for (double f : fr) m += f;
        m /= static_cast<double>(fr.size());
        double var = 0;
        for (double f : fr) var += (f - m) * (f - m);
        var /= static_cast<double>(fr.size());
        c.grid.push_back(x);
        c.mean.push_back(m);
        c.sd.push_back(std::sqrt(var));
    }
    return c;
}

inline std::string render_ccdf(const std::string& title, const CcdfChart& c, const std::string& xlabel) {
    auto doc = detail::chart_frame(c.axis.area, title, xlabel, "P(X >= x)");
    for (double d = c.axis.lx0; d <= c.axis.lx1 + 1e-9; d += 1) {
        const auto [px, py] = c.axis.map(std::pow(10.0, d), std::pow(10.0, c.axis.ly0));
        doc.text(px - 8, py + 14, "1e" + std::to_string(static_cast<int>(d)), {{"class", "tick"}});
    }
    for (double d = c.axis.ly0; d <= c.axis.ly1 + 1e-9; d += 1) {
        const auto [px, py] = c.axis.map(std::pow(10.0, c.axis.lx0), std::pow(10.0, d));
        doc.text(px - 40, py + 3, "1e" + std::to_string(static_cast<int>(d)), {{"class", "tick"}});
    }
    const double floor_y = std::pow(10.0, c.axis.ly0);
    std::vector<std::pair<double, double>> upper, lower;
    for (std::size_t g = 0; g < c.grid.size(); ++g) {
        if (c.mean[g] <= 0) continue;
        const double hi = std::min(1.0, c.mean[g] + kBandSigmas * c.sd[g]);
        const double lo = std::max(floor_y, c.mean[g] - kBandSigmas * c.sd[g]);
        upper.push_back(c.axis.map(c.grid[g], hi));
        lower.push_back(c.axis.map(c.grid[g], lo));
    }
    std::string band;
    for (const auto& [x, y] : upper) band += (band.empty() ? "" : " ") + svg::num(x) + "," + svg::num(y);
    for (auto it = lower.rbegin(); it != lower.rend(); ++it) band += " " + svg::num(it->first) + "," + svg::num(it->second);
    if (!upper.empty()) doc.element("polygon", {{"class", "band"}, {"points", band}});
    for (std::size_t k = 0; k < c.per_year.size(); ++k) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : c.per_year[k].second) pts.push_back(c.axis.map(p.value, p.fraction));
        doc.polyline(pts, {{"class", "series ccdf-year"},
                           {"stroke", detail::palette(k)},
                           {"data-year", std::to_string(c.per_year[k].first)}});
    }
    std::vector<std::pair<double, double>> mean_pts;
    for (std::size_t g = 0; g < c.grid.size(); ++g)
        if (c.mean[g] > 0) mean_pts.push_back(c.axis.map(c.grid[g], c.mean[g]));
    doc.polyline(mean_pts, {{"class", "mean"}});
    return doc.str();
}

struct DistributionCharts {
    std::vector<std::pair<std::string, std::string>> documents;  // (name, svg)
    std::vector<std::string> warnings;
};

/// Volume and rate trends plus weight and strength CCDFs for a whole flow set.
inline DistributionCharts render_distributions(const TemporalFlowSet& set) {
    DistributionCharts out;
    Series volume{"total volume", {}};
    Series rate{"migration rate", {}};
    bool rates_ok = true;
    std::vector<std::pair<int, std::vector<double>>> weights, in_s, out_s;
    for (const auto& net : set.networks) {
        volume.points.emplace_back(net.year, static_cast<double>(net.total()));
        try {
            rate.points.emplace_back(net.year, flow_summary(net, set.meta).migration_rate);
        } catch (const DomainError& e) {
            if (rates_ok) out.warnings.push_back(std::string("rate trend skipped: ") + e.what());
            rates_ok = false;
        }
        std::vector<double> w;
        const auto n = static_cast<Eigen::Index>(net.size());
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (i != j) w.push_back(static_cast<double>(net.weights(i, j)));
        weights.emplace_back(net.year, std::move(w));
        std::vector<double> si, so;
        for (const auto& s : node_statistics(net)) {
            si.push_back(static_cast<double>(s.in_strength));
            so.push_back(static_cast<double>(s.out_strength));
        }
        in_s.emplace_back(net.year, std::move(si));
        out_s.emplace_back(net.year, std::move(so));
    }
    out.documents.emplace_back("volume_trend", render_lines("Migration volume", {volume}, "year", "movers"));
    if (rates_ok)
        out.documents.emplace_back("rate_trend", render_lines("Migration rate", {rate}, "year", "movers / population"));
    out.documents.emplace_back("ccdf_weight", render_ccdf("Edge weight CCDF", ccdf_chart(weights), "weight"));
    out.documents.emplace_back("ccdf_in_strength", render_ccdf("In-strength CCDF", ccdf_chart(in_s), "in-strength"));
    out.documents.emplace_back("ccdf_out_strength", render_ccdf("Out-strength CCDF", ccdf_chart(out_s), "out-strength"));
    return out;
}

}  // namespace flowbone
