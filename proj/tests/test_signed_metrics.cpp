#include "catch_amalgamated.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "flowbone/signed_metrics.hpp"
#include "oracles.hpp"

using namespace flowbone;
using flowbone::test::brute_triangles;
using Catch::Matchers::WithinAbs;

namespace {

SignedBackbone backbone(std::size_t n, std::initializer_list<std::tuple<std::size_t, std::size_t, int>> edges) {
    SignedBackbone bb;
    for (std::size_t i = 0; i < n; ++i) bb.nodes.push_back(std::string(1, static_cast<char>('A' + i)));
    for (const auto& [s, d, sg] : edges) {
        SignedEdge e;
        e.src = s;
        e.dst = d;
        e.sign = sg;
        e.vigor = 0.5 * sg;
        bb.edges.push_back(e);
    }
    return bb;
}

std::vector<UndirectedEdge> complete_random(std::mt19937_64& rng, std::size_t n, double keep = 1.0) {
    std::bernoulli_distribution coin(0.5), present(keep);
    std::vector<UndirectedEdge> out;
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
            if (present(rng)) out.push_back({u, v, coin(rng) ? 1 : -1});
    return out;
}

}  // namespace

TEST_CASE("signed_reciprocity", "[signed][reciprocity]") {
    SECTION("positive pair") {
        const auto r = signed_reciprocity(backbone(2, {{0, 1, 1}, {1, 0, 1}}));
        CHECK(r.pos_pos_ratio == 1.0);
        CHECK(r.conflicting_ratio == 0.0);
        CHECK(r.edge_count == 2);
    }
    SECTION("conflicting pair") {
        const auto r = signed_reciprocity(backbone(2, {{0, 1, 1}, {1, 0, -1}}));
        CHECK(r.conflicting_ratio == 1.0);
        CHECK(r.same_sign_ratio == 0.0);
    }
    SECTION("unreciprocated") {
        const auto r = signed_reciprocity(backbone(2, {{0, 1, 1}}));
        CHECK(r.pos_pos_ratio == 0.0);
        CHECK(r.neg_neg_ratio == 0.0);
        CHECK(r.same_sign_ratio == 0.0);
        CHECK(r.conflicting_ratio == 0.0);
    }
    SECTION("mixed, denominators are directed edges") {
        const auto r = signed_reciprocity(backbone(4, {{0, 1, 1}, {1, 0, 1}, {2, 3, -1}, {3, 2, -1}, {0, 2, 1}}));
        CHECK_THAT(r.pos_pos_ratio, WithinAbs(0.4, 1e-15));
        CHECK_THAT(r.neg_neg_ratio, WithinAbs(0.4, 1e-15));
        CHECK_THAT(r.same_sign_ratio, WithinAbs(0.8, 1e-15));
    }
    SECTION("empty backbone") { CHECK_THROWS_AS(signed_reciprocity(backbone(2, {})), DomainError); }
    SECTION("relabelling invariance and ratio bounds") {
        std::mt19937_64 rng(8);
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t n = 6;
            SignedBackbone bb = backbone(n, {});
            std::bernoulli_distribution pick(0.4), coin(0.5);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    if (i != j && pick(rng)) bb.edges.push_back({i, j, 1, 1.0, 0.5, 0.01, coin(rng) ? 1 : -1});
            if (bb.edges.empty()) continue;
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            SignedBackbone relabelled = bb;
            for (auto& e : relabelled.edges) e = {perm[e.src], perm[e.dst], e.weight, e.expected, e.vigor, e.p_value, e.sign};
            const auto a = signed_reciprocity(bb);
            const auto b = signed_reciprocity(relabelled);
            CHECK(a.pos_pos_ratio == b.pos_pos_ratio);
            CHECK(a.neg_neg_ratio == b.neg_neg_ratio);
            CHECK(a.conflicting_ratio == b.conflicting_ratio);
            CHECK_THAT(a.same_sign_ratio, WithinAbs(a.pos_pos_ratio + a.neg_neg_ratio, 1e-15));
            CHECK(a.same_sign_ratio + a.conflicting_ratio <= 1.0 + 1e-15);
        }
    }
}

TEST_CASE("to_undirected", "[signed][projection]") {
    CHECK(to_undirected(backbone(2, {{0, 1, 1}, {1, 0, 1}})) == std::vector<UndirectedEdge>{{0, 1, 1}});
    CHECK(to_undirected(backbone(2, {{0, 1, -1}, {1, 0, -1}})) == std::vector<UndirectedEdge>{{0, 1, -1}});
    CHECK(to_undirected(backbone(2, {{0, 1, 1}, {1, 0, -1}})).empty());
    CHECK(to_undirected(backbone(2, {{1, 0, -1}})) == std::vector<UndirectedEdge>{{0, 1, -1}});

    SECTION("projecting a symmetrized projection changes nothing") {
        std::mt19937_64 rng(21);
        const auto und = complete_random(rng, 7, 0.6);
        SignedBackbone sym = backbone(7, {});
        for (const auto& e : und) {
            sym.edges.push_back({e.src, e.dst, 1, 1.0, 0.5, 0.01, e.sign});
            sym.edges.push_back({e.dst, e.src, 1, 1.0, 0.5, 0.01, e.sign});
        }
        CHECK(to_undirected(sym) == und);
    }
}

TEST_CASE("balance_scores", "[signed][balance]") {
    SECTION("all positive triangle") {
        const std::vector<UndirectedEdge> t = {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}};
        const auto b = balance_scores(t);
        CHECK(b.triangle_count == 1);
        CHECK(b.sb == 1.0);
        CHECK(b.wsb == 1.0);
    }
    SECTION("all negative triangle") {
        const std::vector<UndirectedEdge> t = {{0, 1, -1}, {1, 2, -1}, {0, 2, -1}};
        const auto b = balance_scores(t);
        CHECK(b.sb == 0.0);
        CHECK(b.wsb == 1.0);
    }
    SECTION("no triangles") {
        const std::vector<UndirectedEdge> path = {{0, 1, 1}, {1, 2, -1}};
        const auto b = balance_scores(path);
        CHECK(b.triangle_count == 0);
        CHECK_FALSE(b.sb.has_value());
        CHECK_FALSE(b.wsb.has_value());
    }
    SECTION("complete 5-node graph against exhaustive triples") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            std::mt19937_64 rng(seed);
            const auto g = complete_random(rng, 5);
            const auto want = brute_triangles(g, 5);
            const auto b = balance_scores(g);
            REQUIRE(b.triangle_count == 10);
            CHECK(b.census == want.census);
            CHECK_THAT(*b.sb, WithinAbs(static_cast<double>(want.census[0] + want.census[2]) / 10.0, 1e-15));
            CHECK_THAT(*b.wsb, WithinAbs(1.0 - static_cast<double>(want.census[1]) / 10.0, 1e-15));
        }
    }
    SECTION("sparse random graphs: brute force, wsb >= sb, sign-flip census") {
        std::mt19937_64 rng(1234);
        for (int rep = 0; rep < 30; ++rep) {
            const std::size_t n = 4 + static_cast<std::size_t>(rep % 9);
            const auto g = complete_random(rng, n, 0.5);
            const auto want = brute_triangles(g, n);
            const auto b = balance_scores(g);
            CHECK(b.triangle_count == want.triangles);
            CHECK(b.census == want.census);
            if (b.triangle_count > 0) CHECK(*b.wsb >= *b.sb);

            auto flipped = g;
            for (auto& e : flipped) e.sign = -e.sign;
            const auto f = balance_scores(flipped);
            CHECK(f.census[0] == b.census[3]);
            CHECK(f.census[3] == b.census[0]);
            CHECK(f.census[1] == b.census[2]);
            CHECK(f.census[2] == b.census[1]);
            if (b.triangle_count > 0)
                CHECK_THAT(*f.wsb, WithinAbs(1.0 - static_cast<double>(b.census[2]) / static_cast<double>(b.triangle_count), 1e-15));
        }
    }
}
