#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "flowbone/flownet.hpp"

namespace flowbone {

/// Knobs for the seeded synthetic flow generator.
struct SynthConfig {
    int nodes = 81;
    int years = 13;
    int first_year = 2008;
    int regions = 6;                 // kept below the default embedding dimension
    int hubs = 2;
    std::uint64_t seed = 1;
    double pareto_shape = 1.3;       // population tail exponent
    double pareto_scale = 250'000;   // minimum population
    double hub_boost = 8.0;          // population multiplier for hubs
    double mass_exponent = 0.9;      // flow ~ pop_i^e * pop_j^e
    double within_affinity = 1.0;
    double between_affinity = 0.05;
    double hub_affinity = 0.3;       // hub links ignore distance and region
    double decay_degrees = 1.5;      // distance decay length
    double pair_noise = 0.25;        // persistent log-normal pair effect
    double year_noise = 0.05;        // yearly log-normal jitter
    double migration_rate = 0.03;    // movers / population
    double growth = 0.01;            // yearly population growth
};

struct SynthSet {
    TemporalFlowSet flows;
    std::vector<int> planted;  // region per node; hubs get their own label
    std::vector<bool> hub;
};

namespace detail {

inline double poisson_sample(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0.0;
    if (mean > 1e6) {
        std::normal_distribution<double> g(mean, std::sqrt(mean));
        return std::max(0.0, std::round(g(rng)));
    }
    std::poisson_distribution<std::int64_t> p(mean);
    return static_cast<double>(p(rng));
}

}  // namespace detail

/// Multiscale populations (Pareto), planted geographic regions with distance decay,
/// and hub cities with long-range links.
inline SynthSet synthesize(const SynthConfig& cfg) {
    const int n = cfg.nodes;
    const int k = std::max(1, cfg.regions);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // region centres on a coarse grid over a 9 x 20 degree box
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k) * 2.0)));
    const int rows = (k + cols - 1) / cols;
    std::vector<double> rlat(k), rlon(k);
    for (int r = 0; r < k; ++r) {
        rlat[r] = 36.0 + 9.0 * (0.5 + r / cols) / rows;
        rlon[r] = 26.0 + 20.0 * (0.5 + r % cols) / cols;
    }

    SynthSet out;
    std::vector<NodeMeta> meta(static_cast<std::size_t>(n));
    std::vector<double> base_pop(n);
    for (int i = 0; i < n; ++i) {
        auto& m = meta[i];
        char id[16];
        std::snprintf(id, sizeof id, "C%02d", i + 1);
        m.id = id;
        m.label = "City " + std::string(id + 1);
        const int r = i % k;
        m.region = "R" + std::to_string(r + 1);
        m.latitude = rlat[r] + 0.9 * (unif(rng) - 0.5) * 9.0 / rows;
        m.longitude = rlon[r] + 0.9 * (unif(rng) - 0.5) * 20.0 / cols;
        base_pop[i] = cfg.pareto_scale * std::pow(1.0 - unif(rng), -1.0 / cfg.pareto_shape);
        const bool is_hub = i < cfg.hubs;
        if (is_hub) base_pop[i] *= cfg.hub_boost;
        out.hub.push_back(is_hub);
        out.planted.push_back(is_hub ? k + i : r);
    }

    std::vector<double> pair_effect(static_cast<std::size_t>(n * n));
    for (auto& e : pair_effect) e = std::exp(cfg.pair_noise * gauss(rng));

    std::vector<std::string> nodes;
    for (const auto& m : meta) nodes.push_back(m.id);

    for (int y = 0; y < cfg.years; ++y) {
        const int year = cfg.first_year + y;
        std::vector<double> pop(n);
        double pop_total = 0;
        for (int i = 0; i < n; ++i) {
            pop[i] = std::round(base_pop[i] * std::pow(1.0 + cfg.growth, y));
            meta[i].population[year] = static_cast<std::int64_t>(pop[i]);
            pop_total += pop[i];
        }
        std::vector<double> rate(static_cast<std::size_t>(n * n), 0.0);
        double rate_total = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double dlat = meta[i].latitude - meta[j].latitude;
                const double dlon = meta[i].longitude - meta[j].longitude;
                const double dist = std::sqrt(dlat * dlat + dlon * dlon);
                double aff;
                if (out.hub[i] || out.hub[j]) aff = cfg.hub_affinity;
                else if (meta[i].region == meta[j].region) aff = cfg.within_affinity * std::exp(-dist / cfg.decay_degrees);
                else aff = cfg.between_affinity * std::exp(-dist / (4.0 * cfg.decay_degrees));
                const double r = std::pow(pop[i], cfg.mass_exponent) * std::pow(pop[j], cfg.mass_exponent) * aff *
                                 pair_effect[static_cast<std::size_t>(i * n + j)] * std::exp(cfg.year_noise * gauss(rng));
                rate[static_cast<std::size_t>(i * n + j)] = r;
                rate_total += r;
            }
        const double volume = cfg.migration_rate * pop_total;
        FlowNetwork net{year, nodes, CountMatrix::Zero(n, n)};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j)
                    net.weights(i, j) = static_cast<std::int64_t>(
                        detail::poisson_sample(rng, volume * rate[static_cast<std::size_t>(i * n + j)] / rate_total));
        out.flows.networks.push_back(std::move(net));
    }
    out.flows.meta = std::move(meta);
    return out;
}

}  // namespace flowbone
