#include "hmx/hmatrix.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace hmx {

namespace {

void check_leaf_shape(const BlockNode &b, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<std::size_t>(rows) != b.rows() || static_cast<std::size_t>(cols) != b.cols())
        throw InputError("HMatrix: leaf dimensions do not match the block's clusters");
}

} // namespace

HMatrix::HMatrix(const BlockNode &block, DenseBlock d) : block_(&block), content_(std::move(d)) {
    if (block.kind != BlockKind::Inadmissible)
        throw InputError("HMatrix: dense content on a non-inadmissible block");
    check_leaf_shape(block, dense().rows(), dense().cols());
}

HMatrix::HMatrix(const BlockNode &block, RkBlock r) : block_(&block), content_(std::move(r)) {
    if (block.kind != BlockKind::Admissible)
        throw InputError("HMatrix: low-rank content on a non-admissible block");
    check_leaf_shape(block, rk().A.rows(), rk().B.rows());
}

HMatrix::HMatrix(const BlockNode &block, Sons sons) : block_(&block), content_(std::move(sons)) {
    if (block.kind != BlockKind::Partitioned || std::get<Sons>(content_).size() != block.rsons * block.csons)
        throw InputError("HMatrix: son grid does not match the block");
}

std::unique_ptr<HMatrix> HMatrix::clone() const {
    std::unique_ptr<HMatrix> c;
    if (is_dense()) {
        c = std::make_unique<HMatrix>(*block_, dense());
    } else if (is_rk()) {
        c = std::make_unique<HMatrix>(*block_, rk());
    } else {
        Sons sons;
        for (const auto &s : std::get<Sons>(content_))
            sons.push_back(s->clone());
        c = std::make_unique<HMatrix>(*block_, std::move(sons));
    }
    c->tree_ = tree_;
    return c;
}

std::size_t HMatrix::leaf_count() const {
    std::size_t n = 0;
    for_each_leaf(*this, [&](const HMatrix &) { ++n; });
    return n;
}

std::size_t HMatrix::max_rank() const {
    std::size_t k = 0;
    for_each_leaf(*this, [&](const HMatrix &l) {
        if (l.is_rk())
            k = std::max(k, l.rk().rank());
    });
    return k;
}

std::size_t HMatrix::storage() const {
    std::size_t n = 0;
    for_each_leaf(*this, [&](const HMatrix &l) {
        if (l.is_dense())
            n += l.rows() * l.cols();
        else
            n += l.rk().rank() * (l.rows() + l.cols());
    });
    return n;
}

ContentPolicy ContentPolicy::zero() {
    return {[](const BlockNode &b) { return DenseBlock::Zero(static_cast<Eigen::Index>(b.rows()), static_cast<Eigen::Index>(b.cols())); },
            [](const BlockNode &b) { return RkBlock(b.rows(), b.cols()); }};
}

namespace {

std::unique_ptr<HMatrix> build_node(const BlockNode &b, const ContentPolicy &init) {
    switch (b.kind) {
    case BlockKind::Inadmissible:
        return std::make_unique<HMatrix>(b, init.dense(b));
    case BlockKind::Admissible:
        return std::make_unique<HMatrix>(b, init.rk(b));
    case BlockKind::Partitioned:
        break;
    }
    HMatrix::Sons sons;
    sons.reserve(b.sons.size());
    for (const auto &s : b.sons)
        sons.push_back(build_node(*s, init));
    return std::make_unique<HMatrix>(b, std::move(sons));
}

} // namespace

std::unique_ptr<HMatrix> build_hmatrix(std::shared_ptr<const BlockTree> tree, const ContentPolicy &init) {
    auto h = build_node(tree->root(), init);
    h->set_tree(std::move(tree));
    return h;
}

void for_each_leaf(const HMatrix &h, const std::function<void(const HMatrix &)> &f) {
    if (h.is_leaf()) {
        f(h);
        return;
    }
    for (std::size_t i = 0; i < h.rsons(); ++i)
        for (std::size_t j = 0; j < h.csons(); ++j)
            for_each_leaf(h.son(i, j), f);
}

void for_each_leaf(HMatrix &h, const std::function<void(HMatrix &)> &f) {
    if (h.is_leaf()) {
        f(h);
        return;
    }
    for (std::size_t i = 0; i < h.rsons(); ++i)
        for (std::size_t j = 0; j < h.csons(); ++j)
            for_each_leaf(h.son(i, j), f);
}

DenseBlock flatten(const HMatrix &h) {
    if (h.rows() > flatten_limit || h.cols() > flatten_limit)
        throw std::length_error("flatten: matrix exceeds the dense size guard");
    DenseBlock D = DenseBlock::Zero(static_cast<Eigen::Index>(h.rows()), static_cast<Eigen::Index>(h.cols()));
    for_each_leaf(h, [&](const HMatrix &l) {
        auto r = static_cast<Eigen::Index>(l.row_offset() - h.row_offset());
        auto c = static_cast<Eigen::Index>(l.col_offset() - h.col_offset());
        auto blk = D.block(r, c, static_cast<Eigen::Index>(l.rows()), static_cast<Eigen::Index>(l.cols()));
        if (l.is_dense())
            blk = l.dense();
        else
            blk = l.rk().to_dense();
    });
    return D;
}

void h_addmul(MatRef Y, double alpha, const HMatrix &M, CMatRef X, bool transpose) {
    const auto out_dim = static_cast<Eigen::Index>(transpose ? M.cols() : M.rows());
    const auto in_dim  = static_cast<Eigen::Index>(transpose ? M.rows() : M.cols());
    if (Y.rows() != out_dim || X.rows() != in_dim || X.cols() != Y.cols())
        throw InputError("h_addmul: shape mismatch");
    if (Y.cols() == 0)
        return;

    if (M.is_dense()) {
        if (transpose)
            Y.noalias() += alpha * M.dense().transpose() * X;
        else
            Y.noalias() += alpha * M.dense() * X;
        return;
    }
    if (M.is_rk()) {
        const RkBlock &r = M.rk();
        if (r.rank() == 0)
            return;
        if (transpose) {
            DenseBlock T = r.A.transpose() * X;
            Y.noalias() += alpha * r.B * T;
        } else {
            DenseBlock T = r.B.transpose() * X;
            Y.noalias() += alpha * r.A * T;
        }
        return;
    }
    for (std::size_t i = 0; i < M.rsons(); ++i) {
        for (std::size_t j = 0; j < M.csons(); ++j) {
            const HMatrix &s = M.son(i, j);
            auto ro = static_cast<Eigen::Index>(s.row_offset() - M.row_offset());
            auto co = static_cast<Eigen::Index>(s.col_offset() - M.col_offset());
            auto nr = static_cast<Eigen::Index>(s.rows());
            auto nc = static_cast<Eigen::Index>(s.cols());
            if (transpose)
                h_addmul(Y.middleRows(co, nc), alpha, s, X.middleRows(ro, nr), true);
            else
                h_addmul(Y.middleRows(ro, nr), alpha, s, X.middleRows(co, nc), false);
        }
    }
}

void h_addmul_left(MatRef Y, double alpha, CMatRef X, const HMatrix &M) {
    if (Y.rows() != X.rows() || static_cast<std::size_t>(X.cols()) != M.rows() ||
        static_cast<std::size_t>(Y.cols()) != M.cols())
        throw InputError("h_addmul_left: shape mismatch");
    DenseBlock Yt = Y.transpose();
    DenseBlock Xt = X.transpose();
    h_addmul(Yt, alpha, M, Xt, true);
    Y = Yt.transpose();
}

Vector hmatvec(const HMatrix &h, const Vector &x) {
    if (static_cast<std::size_t>(x.size()) != h.cols())
        throw InputError("hmatvec: vector length does not match the column size");
    Vector y = Vector::Zero(static_cast<Eigen::Index>(h.rows()));
    h_addmul(y, 1.0, h, x);
    return y;
}

void dump_leaves(std::ostream &os, const HMatrix &h) {
    os << "# leaves " << h.leaf_count() << " rows " << h.rows() << " cols " << h.cols() << '\n';
    for_each_leaf(h, [&](const HMatrix &l) {
        os << l.row_offset() << ' ' << l.row_offset() + l.rows() << ' ' << l.col_offset() << ' '
           << l.col_offset() + l.cols() << ' ' << (l.is_dense() ? "dense" : "rk") << ' '
           << (l.is_rk() ? l.rk().rank() : std::min(l.rows(), l.cols())) << '\n';
    });
}

} // namespace hmx
