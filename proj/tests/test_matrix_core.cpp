#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmx/serialize.hpp"
#include "hmx/skeleton.hpp"

#include <functional>
#include <random>
#include <sstream>

using namespace hmx;

namespace {

std::shared_ptr<const BlockTree> share(BlockTree t) { return std::make_shared<const BlockTree>(std::move(t)); }

// Random planar points, so the tree mixes dense, low-rank and partitioned blocks.
std::shared_ptr<const BlockTree> random_tree(std::mt19937_64 &rng, std::size_t n, double eta) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> c(2 * n);
    for (auto &x : c)
        x = u(rng);
    auto ct = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(2, c), 8));
    return share(build_block_tree(ct, ct, AdmissibilityParam(eta)));
}

ContentPolicy random_policy(std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    ContentPolicy p;
    p.dense = [rng](const BlockNode &b) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        DenseBlock d(b.rows(), b.cols());
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            for (Eigen::Index i = 0; i < d.rows(); ++i)
                d(i, j) = u(*rng);
        return d;
    };
    p.rk = [rng](const BlockNode &b) {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const auto k = std::uniform_int_distribution<std::size_t>(0, 3)(*rng);
        DenseBlock a(b.rows(), k), bb(b.cols(), k);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a.data()[i] = u(*rng);
        for (Eigen::Index i = 0; i < bb.size(); ++i)
            bb.data()[i] = u(*rng);
        return RkBlock(a, bb);
    };
    return p;
}

// Entrywise scatter of every leaf into a fresh matrix.
DenseBlock scatter(const HMatrix &h) {
    DenseBlock out = DenseBlock::Zero(h.rows(), h.cols());
    const std::size_t r0 = h.row_offset(), c0 = h.col_offset();
    for_each_leaf(h, [&](const HMatrix &l) {
        const DenseBlock v = l.is_dense() ? l.dense() : DenseBlock(l.rk().A * l.rk().B.transpose());
        for (std::size_t i = 0; i < l.rows(); ++i)
            for (std::size_t j = 0; j < l.cols(); ++j)
                out(l.row_offset() - r0 + i, l.col_offset() - c0 + j) = v(i, j);
    });
    return out;
}

struct NodeRange {
    const HMatrix *node;
    Interval iv;
};

// Independent leaf counting walk: returns the interval the node should cover.
Interval expected_ranges(const HMatrix &h, std::size_t &next, std::vector<NodeRange> &out) {
    const std::size_t lo = next;
    if (h.is_leaf()) {
        ++next;
    } else {
        for (std::size_t i = 0; i < h.rsons(); ++i)
            for (std::size_t j = 0; j < h.csons(); ++j)
                expected_ranges(h.son(i, j), next, out);
    }
    out.push_back({&h, {lo, next}});
    return {lo, next};
}

} // namespace

TEST_CASE("zero initialised dense 2x2 tree") {
    auto bt = share(build_diagonal_2x2_tree(8, 1));
    auto h  = build_hmatrix(bt);
    REQUIRE(h->is_partitioned());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            REQUIRE(h->son(i, j).is_dense());
            CHECK(h->son(i, j).dense().isZero(0.0));
        }
}

TEST_CASE("rank-0 admissible leaf is the zero matrix") {
    auto r  = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {0.0, 0.1, 0.2}), 4));
    auto c  = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {9.0, 9.1}), 4));
    auto h  = build_hmatrix(share(build_block_tree(r, c, AdmissibilityParam(1.0))));
    REQUIRE(h->is_rk());
    CHECK(h->rk().rank() == 0);
    CHECK(flatten(*h).isZero(0.0));
    CHECK(flatten(*h).rows() == 3);
    CHECK(flatten(*h).cols() == 2);
}

TEST_CASE("two-level sample layout: ten leaves in traversal order") {
    auto h = build_hmatrix(share(build_sample_tree(16, false)));
    CHECK(h->leaf_count() == 10);
    std::ostringstream os;
    dump_leaves(os, *h);
    CHECK(os.str() == "# leaves 10 rows 16 cols 16\n"
                      "0 4 0 4 dense 4\n"
                      "0 4 4 8 dense 4\n"
                      "4 8 0 4 dense 4\n"
                      "4 8 4 8 dense 4\n"
                      "0 8 8 16 dense 8\n"
                      "8 16 0 8 dense 8\n"
                      "8 12 8 12 dense 4\n"
                      "8 12 12 16 dense 4\n"
                      "12 16 8 12 dense 4\n"
                      "12 16 12 16 dense 4\n");
}

TEST_CASE("skeleton of the two-level sample") {
    auto h = build_hmatrix(share(build_sample_tree(16, false)));
    Skeleton sk(*h);
    CHECK(sk.slot_count() == 10);
    CHECK(sk.range(h->son(0, 0)) == Interval{0, 4});
    CHECK(sk.range(h->son(0, 0).son(0, 0)) == Interval{0, 1});
    CHECK(sk.range(h->son(0, 1)) == Interval{4, 5});
    CHECK(sk.range(h->son(1, 0)) == Interval{5, 6});
    CHECK(sk.range(h->son(1, 1)) == Interval{6, 10});
    CHECK(sk.range(*h) == Interval{0, 10});
    CHECK(&sk.leaf(4) == &h->son(0, 1));
}

TEST_CASE("single leaf skeleton") {
    auto t = std::make_shared<const ClusterTree>(build_regular_cluster_tree(4, 0));
    auto h = build_hmatrix(share(build_block_tree(t, t, AdmissibilityParam(1.0))));
    Skeleton sk(*h);
    CHECK(sk.slot_count() == 1);
    CHECK(sk.range(*h) == Interval{0, 1});
}

TEST_CASE("skeleton intervals agree with a leaf counting walk") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        auto h = build_hmatrix(random_tree(rng, 150 + 20 * static_cast<std::size_t>(trial), 0.7));
        Skeleton sk(*h);
        std::size_t next = 0;
        std::vector<NodeRange> all;
        expected_ranges(*h, next, all);
        CHECK(sk.slot_count() == next);
        for (const auto &nr : all)
            CHECK(sk.range(*nr.node) == nr.iv);
        // Equal, nested or disjoint; never a partial overlap.
        const auto &iv = sk.preorder_ranges();
        for (const auto &a : iv)
            for (const auto &b : iv)
                CHECK((!a.intersects(b) || a.contains(b) || b.contains(a)));
    }
}

TEST_CASE("skeleton hash ignores leaf content and rank") {
    std::mt19937_64 rng(9);
    auto bt = random_tree(rng, 200, 1.0);
    auto a  = build_hmatrix(bt);
    auto b  = build_hmatrix(bt, random_policy(3));
    CHECK(Skeleton(*a).hash() == Skeleton(*b).hash());
    auto other = build_hmatrix(share(build_diagonal_2x2_tree(200, 2)));
    CHECK(Skeleton(*a).hash() != Skeleton(*other).hash());
}

TEST_CASE("hmatvec") {
    SUBCASE("identity") {
        auto h = build_hmatrix(share(build_diagonal_2x2_tree(32, 2)));
        for_each_leaf(*h, [](HMatrix &l) {
            if (l.row_offset() == l.col_offset())
                l.dense().setIdentity();
        });
        Vector x = Vector::LinSpaced(32, -1.0, 2.0);
        CHECK((hmatvec(*h, x) - x).norm() == 0.0);
    }
    SUBCASE("rank-1 leaf") {
        auto r = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {0.0, 0.1, 0.2}), 4));
        auto c = std::make_shared<const ClusterTree>(build_cluster_tree(DofSet(1, {9.0, 9.1}), 4));
        auto h = build_hmatrix(share(build_block_tree(r, c, AdmissibilityParam(1.0))));
        DenseBlock a(3, 1), b(2, 1);
        a << 1, 2, 3;
        b << 4, 5;
        h->rk() = RkBlock(a, b);
        Vector x(2);
        x << 1, -1;
        Vector y = hmatvec(*h, x);
        CHECK(y(0) == -1.0);
        CHECK(y(1) == -2.0);
        CHECK(y(2) == -3.0);
    }
    SUBCASE("dense-only against the flattened product") {
        auto h = build_hmatrix(share(build_diagonal_2x2_tree(300, 3)), random_policy(1));
        Vector x = Vector::Random(300);
        const Vector ref = scatter(*h) * x;
        CHECK((hmatvec(*h, x) - ref).norm() <= 1e-13 * ref.norm());
    }
    SUBCASE("length mismatch") {
        auto h = build_hmatrix(share(build_diagonal_2x2_tree(8, 1)));
        CHECK_THROWS_AS(hmatvec(*h, Vector::Zero(7)), InputError);
    }
}

TEST_CASE("hmatvec is linear") {
    std::mt19937_64 rng(2);
    auto h = build_hmatrix(random_tree(rng, 400, 0.5), random_policy(2));
    const Vector x = Vector::Random(400), y = Vector::Random(400);
    const double al = 0.75, be = -2.5;
    const Vector lhs = hmatvec(*h, al * x + be * y);
    const Vector rhs = al * hmatvec(*h, x) + be * hmatvec(*h, y);
    CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("flatten") {
    SUBCASE("single dense leaf") {
        auto t = std::make_shared<const ClusterTree>(build_regular_cluster_tree(5, 0));
        auto h = build_hmatrix(share(build_block_tree(t, t, AdmissibilityParam(1.0))), random_policy(4));
        CHECK(flatten(*h) == h->dense());
    }
    SUBCASE("mixed tree equals per-leaf scatter") {
        std::mt19937_64 rng(8);
        auto h = build_hmatrix(random_tree(rng, 300, 1.0), random_policy(8));
        std::size_t rk = 0;
        for_each_leaf(*h, [&](const HMatrix &l) { rk += l.is_rk(); });
        CHECK(rk > 0);
        CHECK(flatten(*h) == scatter(*h));
    }
    SUBCASE("zero content flattens to zero") {
        std::mt19937_64 rng(10);
        for (int t = 0; t < 5; ++t)
            CHECK(flatten(*build_hmatrix(random_tree(rng, 120, 0.5))).isZero(0.0));
    }
    SUBCASE("size guard") {
        auto h = build_hmatrix(share(build_diagonal_2x2_tree(flatten_limit + 1, 1)));
        CHECK_THROWS_AS(flatten(*h), std::length_error);
    }
}

TEST_CASE("content kind must match the block kind") {
    auto t  = std::make_shared<const ClusterTree>(build_regular_cluster_tree(4, 0));
    auto bt = share(build_block_tree(t, t, AdmissibilityParam(1.0)));
    CHECK_THROWS_AS(HMatrix(bt->root(), RkBlock(4, 4)), InputError);
    CHECK_THROWS_AS(HMatrix(bt->root(), DenseBlock(3, 4)), InputError);
}

TEST_CASE("binary round trip is bitwise") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 4; ++trial) {
        auto h = build_hmatrix(random_tree(rng, 250, 0.5 + 0.25 * trial), random_policy(static_cast<std::uint64_t>(trial)));
        std::stringstream buf;
        save_hmatrix(buf, *h);
        auto back = load_hmatrix(buf);
        CHECK(bitwise_equal(*h, *back));
        CHECK(Skeleton(*h).hash() == Skeleton(*back).hash());
        CHECK(flatten(*h) == flatten(*back));
    }
    std::stringstream junk("not a matrix");
    CHECK_THROWS_AS(load_hmatrix(junk), InputError);
}

TEST_CASE("clone is independent and equal") {
    auto h = build_hmatrix(share(build_sample_tree(16, true)), random_policy(6));
    auto c = h->clone();
    CHECK(bitwise_equal(*h, *c));
    c->son(0, 0).son(0, 0).dense()(0, 0) += 1.0;
    CHECK_FALSE(bitwise_equal(*h, *c));
}
