#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flowbone/error.hpp"
#include "flowbone/flownet.hpp"

namespace flowbone {

/// Strength-preserving null: each of the T movers independently picks pair (i,j)
/// with probability p_ij = (s_i^out / T)(s_j^in / T).
struct NullModel {
    Eigen::MatrixXd expected;          // T * p_ij
    Eigen::MatrixXd pair_probability;  // p_ij
    std::int64_t total = 0;
};

struct SignedEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    std::int64_t weight = 0;
    double expected = 0.0;
    double vigor = 0.0;
    double p_value = 1.0;
    int sign = 0;  // +1 or -1

    bool operator==(const SignedEdge&) const = default;
};

struct SignedBackbone {
    int year = 0;
    std::vector<std::string> nodes;
    std::vector<SignedEdge> edges;

    bool operator==(const SignedBackbone&) const = default;
};

/// Exact two-sided binomial tests are used up to this many trials.
inline constexpr std::int64_t kExactBinomialLimit = 10'000;

inline NullModel null_expectation(const FlowNetwork& net) {
    const std::int64_t total = net.total();
    if (total <= 0) throw DomainError("null model of an all-zero network (year " + std::to_string(net.year) + ")");
    const auto stats = node_statistics(net);
    const auto n = static_cast<Eigen::Index>(net.size());
    const double t = static_cast<double>(total);
    NullModel m;
    m.total = total;
    m.pair_probability = Eigen::MatrixXd::Zero(n, n);
    m.expected = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = (static_cast<double>(stats[i].out_strength) / t) * (static_cast<double>(stats[j].in_strength) / t);
            m.pair_probability(i, j) = p;
            m.expected(i, j) = static_cast<double>(stats[i].out_strength) * static_cast<double>(stats[j].in_strength) / t;
        }
    return m;
}

/// Lift-based signed intensity (lift - 1) / (lift + 1), lift = weight / expected.
inline double vigor(std::int64_t weight, double expected) {
    if (!(expected > 0.0)) throw DomainError("vigor needs a positive expectation");
    const double lift = static_cast<double>(weight) / expected;
    return (lift - 1.0) / (lift + 1.0);
}

namespace detail {

/// log(erfc(x)) for x >= 0 without underflow.
inline double log_erfc(double x) {
    if (x < 26.0) return std::log(std::erfc(x));
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2) - 15.0 / (8.0 * x2 * x2 * x2);
    return -x2 - std::log(x) - 0.5 * std::log(std::numbers::pi) + std::log(series);
}

/// log of the point-probability (minimum likelihood) two-sided binomial p-value.
/// `log_fact` holds log(k!) for k = 0..trials.
inline double log_binomial_two_sided_exact(std::int64_t observed, std::int64_t trials, double p,
                                           const std::vector<double>& log_fact) {
    if (p <= 0.0) return observed == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return observed == trials ? 0.0 : -std::numeric_limits<double>::infinity();
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    auto log_pmf = [&](std::int64_t k) {
        return log_fact[trials] - log_fact[k] - log_fact[trials - k] + static_cast<double>(k) * lp +
               static_cast<double>(trials - k) * lq;
    };
    // Relative slack so numerically tied outcomes count as equally extreme.
    const double cutoff = log_pmf(observed) + 1e-7;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k <= trials; ++k) {
        const double l = log_pmf(k);
        if (l <= cutoff) peak = std::max(peak, l);
    }
    double sum = 0.0;
    for (std::int64_t k = 0; k <= trials; ++k) {
        const double l = log_pmf(k);
        if (l <= cutoff) sum += std::exp(l - peak);
    }
    return std::min(0.0, peak + std::log(sum));
}

/// log of the continuity-corrected normal two-sided p-value.
inline double log_binomial_two_sided_normal(std::int64_t observed, std::int64_t trials, double p) {
    const double mean = static_cast<double>(trials) * p;
    const double sd = std::sqrt(static_cast<double>(trials) * p * (1.0 - p));
    const double dev = std::abs(static_cast<double>(observed) - mean) - 0.5;
    if (dev <= 0.0) return 0.0;
    if (sd <= 0.0) return -std::numeric_limits<double>::infinity();
    return std::min(0.0, log_erfc(dev / (sd * std::numbers::sqrt2)));
}

inline std::vector<double> log_factorials(std::int64_t upto) {
    std::vector<double> lf(static_cast<std::size_t>(upto) + 1, 0.0);
    for (std::int64_t k = 1; k <= upto; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
    return lf;
}

inline double clamp_p(double log_p) {
    return std::clamp(std::exp(log_p), std::numeric_limits<double>::min(), 1.0);
}

}  // namespace detail

/// Two-sided binomial p-value of a single count; exact below kExactBinomialLimit trials.
inline double binomial_two_sided_p(std::int64_t observed, std::int64_t trials, double p) {
    if (trials <= kExactBinomialLimit)
        return detail::clamp_p(detail::log_binomial_two_sided_exact(observed, trials, p, detail::log_factorials(trials)));
    return detail::clamp_p(detail::log_binomial_two_sided_normal(observed, trials, p));
}

/// Natural log of every pair's p-value. Ranking on the log keeps order where the
/// p-value itself underflows; the diagonal is 0.
inline Eigen::MatrixXd log_significance(const FlowNetwork& net, const NullModel& model) {
    const auto n = static_cast<Eigen::Index>(net.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    const bool exact = model.total <= kExactBinomialLimit;
    const auto lf = exact ? detail::log_factorials(model.total) : std::vector<double>{};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = model.pair_probability(i, j);
            out(i, j) = exact ? detail::log_binomial_two_sided_exact(net.weights(i, j), model.total, p, lf)
                              : detail::log_binomial_two_sided_normal(net.weights(i, j), model.total, p);
        }
    return out;
}

/// p-values in (0, 1] for every ordered pair.
inline Eigen::MatrixXd significance(const FlowNetwork& net, const NullModel& model) {
    return log_significance(net, model).unaryExpr([](double l) { return detail::clamp_p(l); });
}

/// Keeps the `keep_fraction * n(n-1)` most significant pairs, then drops those whose
/// |vigor| falls below `vigor_threshold`. Pairs with zero expectation are never ranked;
/// pairs observed exactly at expectation carry no sign and are never kept.
inline SignedBackbone extract_backbone(const FlowNetwork& net, double keep_fraction, double vigor_threshold) {
    if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) throw DomainError("keep_fraction must lie in [0,1]");
    if (!(vigor_threshold >= 0.0 && vigor_threshold <= 1.0)) throw DomainError("vigor_threshold must lie in [0,1]");
    const NullModel model = null_expectation(net);
    const Eigen::MatrixXd log_p = log_significance(net, model);
    const std::size_t n = net.size();

    struct Candidate {
        SignedEdge edge;
        double log_p;
    };
    std::vector<Candidate> cand;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto ii = static_cast<Eigen::Index>(i);
            const auto jj = static_cast<Eigen::Index>(j);
            const double e = model.expected(ii, jj);
            if (!(e > 0.0)) continue;
            SignedEdge edge;
            edge.src = i;
            edge.dst = j;
            edge.weight = net.weights(ii, jj);
            edge.expected = e;
            edge.vigor = vigor(edge.weight, e);
            edge.p_value = detail::clamp_p(log_p(ii, jj));
            const double w = static_cast<double>(edge.weight);
            edge.sign = w > e ? 1 : (w < e ? -1 : 0);
            cand.push_back({edge, log_p(ii, jj)});
        }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.log_p != b.log_p) return a.log_p < b.log_p;
        const double va = std::abs(a.edge.vigor), vb = std::abs(b.edge.vigor);
        if (va != vb) return va > vb;
        if (a.edge.src != b.edge.src) return a.edge.src < b.edge.src;
        return a.edge.dst < b.edge.dst;
    });

    const auto budget = static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(n * (n - 1)) + 1e-9));
    SignedBackbone bb;
    bb.year = net.year;
    bb.nodes = net.nodes;
    for (std::size_t k = 0; k < std::min(budget, cand.size()); ++k) {
        const auto& e = cand[k].edge;
        if (e.sign == 0) continue;
        if (std::abs(e.vigor) < vigor_threshold) continue;
        bb.edges.push_back(e);
    }
    std::sort(bb.edges.begin(), bb.edges.end(),
              [](const SignedEdge& a, const SignedEdge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
    return bb;
}

}  // namespace flowbone
