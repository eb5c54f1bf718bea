#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmx/block_tree.hpp"
#include "hmx/kernel.hpp"

#include <cmath>
#include <map>
#include <random>

using namespace hmx;

namespace {

Cluster box(std::vector<double> lo, std::vector<double> hi) {
    Cluster c;
    c.bbox_min = std::move(lo);
    c.bbox_max = std::move(hi);
    c.size     = 1;
    return c;
}

std::shared_ptr<const ClusterTree> line_tree(std::size_t n, std::size_t leafsize) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i)
        c[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    return std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, c), leafsize));
}

// Re-derives every node's kind from the construction rules.
void check_cases(const BlockNode &b, double eta) {
    const double lhs = std::min(diam(*b.row), diam(*b.col));
    const double d   = dist(*b.row, *b.col);
    const bool adm   = d > 0.0 && lhs <= eta * d;
    if (adm) {
        CHECK(b.kind == BlockKind::Admissible);
    } else if (!b.row->is_leaf() && !b.col->is_leaf()) {
        REQUIRE(b.kind == BlockKind::Partitioned);
        CHECK(b.rsons == b.row->sons.size());
        CHECK(b.csons == b.col->sons.size());
        for (std::size_t i = 0; i < b.rsons; ++i)
            for (std::size_t j = 0; j < b.csons; ++j) {
                CHECK(b.son(i, j).row == b.row->sons[i].get());
                CHECK(b.son(i, j).col == b.col->sons[j].get());
                check_cases(b.son(i, j), eta);
            }
    } else {
        CHECK(b.kind == BlockKind::Inadmissible);
    }
    if (b.kind != BlockKind::Partitioned)
        CHECK(b.sons.empty());
}

// Leaves tile the index square exactly once.
void check_cover(const BlockTree &bt) {
    const std::size_t n = bt.root().rows();
    std::vector<int> hits(n * bt.root().cols(), 0);
    for_each_leaf(bt.root(), [&](const BlockNode &l) {
        for (std::size_t i = l.row->offset; i < l.row->end(); ++i)
            for (std::size_t j = l.col->offset; j < l.col->end(); ++j)
                ++hits[i * bt.root().cols() + j];
    });
    for (int h : hits)
        REQUIRE(h == 1);
}

std::size_t smallest_diagonal(const BlockNode &b) {
    if (b.is_leaf())
        return b.rows();
    std::size_t m = SIZE_MAX;
    for (std::size_t i = 0; i < b.rsons; ++i)
        m = std::min(m, smallest_diagonal(b.son(i, i)));
    return m;
}

} // namespace

TEST_CASE("admissibility examples") {
    Cluster t = box({0}, {1}), s = box({11}, {12});
    CHECK_FALSE(admissible(t, t, AdmissibilityParam(1.0)));
    CHECK(admissible(t, s, AdmissibilityParam(1.0)));
    Cluster u = box({3}, {4});
    CHECK_FALSE(admissible(t, u, AdmissibilityParam(0.25)));
    CHECK(admissible(t, u, AdmissibilityParam(0.5)));
    CHECK_THROWS_AS(AdmissibilityParam(0.0), InputError);
    CHECK_THROWS_AS(AdmissibilityParam(-1.0), InputError);
}

TEST_CASE("coincident point clusters are never admissible") {
    Cluster p = box({0.5}, {0.5});
    CHECK_FALSE(admissible(p, p, AdmissibilityParam(1.0)));
}

TEST_CASE("two inadmissible leaf clusters give one dense node") {
    auto t  = line_tree(4, 8);
    auto bt = build_block_tree(t, t, AdmissibilityParam(1.0));
    CHECK(bt.root().kind == BlockKind::Inadmissible);
    CHECK(bt.leaf_count() == 1);
}

TEST_CASE("an admissible root pair is a single low-rank leaf") {
    auto r  = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {0.0, 0.1, 0.2, 0.3}), 1));
    auto c  = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {5.0, 5.1, 5.2, 5.3}), 1));
    auto bt = build_block_tree(r, c, AdmissibilityParam(1.0));
    CHECK(bt.root().kind == BlockKind::Admissible);
    CHECK(bt.root().sons.empty());
}

TEST_CASE("one dimensional tree follows the case analysis everywhere") {
    for (double eta : {0.25, 0.5, 1.0, 2.0}) {
        auto t  = line_tree(256, 32);
        auto bt = build_block_tree(t, t, AdmissibilityParam(eta));
        check_cases(bt.root(), eta);
        check_cover(bt);
        // Diagonal blocks are never admissible.
        std::function<void(const BlockNode &)> diag = [&](const BlockNode &b) {
            CHECK(b.kind != BlockKind::Admissible);
            if (b.kind == BlockKind::Partitioned)
                for (std::size_t i = 0; i < b.rsons; ++i)
                    diag(b.son(i, i));
        };
        diag(bt.root());
    }
}

TEST_CASE("symmetric geometry gives a structurally symmetric tree") {
    for (std::size_t d : {1u, 2u, 3u}) {
        auto p  = make_bem_problem(d, 600, 24, KernelSpec(d, KernelSpec::default_order(d), TruncationControl(1e-6)));
        auto bt = build_block_tree(p.tree_ptr(), p.tree_ptr(), AdmissibilityParam(0.5));
        check_cases(bt.root(), 0.5);
        check_cover(bt);
        std::function<void(const BlockNode &, const BlockNode &)> mirror = [&](const BlockNode &a, const BlockNode &b) {
            REQUIRE(a.kind == b.kind);
            if (a.kind == BlockKind::Partitioned)
                for (std::size_t i = 0; i < a.rsons; ++i)
                    for (std::size_t j = 0; j < a.csons; ++j)
                        mirror(a.son(i, j), b.son(j, i));
        };
        mirror(bt.root(), bt.root());
    }
}

TEST_CASE("diagonal 2x2 synthetic structure") {
    SUBCASE("one split of eight") {
        auto bt = build_diagonal_2x2_tree(8, 1);
        REQUIRE(bt.root().kind == BlockKind::Partitioned);
        CHECK(bt.leaf_count() == 4);
        for (const auto &s : bt.root().sons) {
            CHECK(s->kind == BlockKind::Inadmissible);
            CHECK(s->rows() == 4);
            CHECK(s->cols() == 4);
        }
    }
    SUBCASE("smallest diagonal blocks") {
        CHECK(smallest_diagonal(build_diagonal_2x2_tree(10000, 4).root()) == 625);
        const std::size_t b7 = smallest_diagonal(build_diagonal_2x2_tree(10000, 7).root());
        CHECK(b7 >= 78);
        CHECK(b7 <= 79);
    }
    SUBCASE("leaf count and cover") {
        for (std::size_t r = 0; r <= 5; ++r) {
            auto bt = build_diagonal_2x2_tree(256, r);
            // L(r) = 2 + 2 L(r-1), L(0) = 1
            CHECK(bt.leaf_count() == 3 * (std::size_t{1} << r) - 2);
            check_cover(bt);
        }
    }
    CHECK_THROWS_AS(build_diagonal_2x2_tree(8, 4), InputError);
}

TEST_CASE("sample structures") {
    auto a = build_sample_tree(64, false);
    CHECK(a.leaf_count() == 10);
    check_cover(a);
    auto b = build_sample_tree(64, true);
    CHECK(b.leaf_count() == 13);
    check_cover(b);
    auto c = build_sample_tree(64, false, true);
    std::map<BlockKind, int> kinds;
    for_each_leaf(c.root(), [&](const BlockNode &l) { ++kinds[l.kind]; });
    CHECK(kinds[BlockKind::Admissible] == 2);
    CHECK(kinds[BlockKind::Inadmissible] == 8);
}

TEST_CASE("a custom rule cannot split a leaf cluster") {
    auto t = line_tree(8, 8);
    CHECK_THROWS_AS(build_block_tree_with(t, t, [](const Cluster &, const Cluster &) { return BlockKind::Partitioned; }),
                    std::logic_error);
}
