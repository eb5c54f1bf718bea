#pragma once

#include "hmx/block_tree.hpp"
#include "hmx/lowrank.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <variant>
#include <vector>

namespace hmx {

/// Block hierarchy whose leaves are dense or factorized low-rank blocks. The node kinds
/// mirror the block tree: Admissible -> RkBlock, Inadmissible -> DenseBlock.
class HMatrix {
  public:
    using Sons = std::vector<std::unique_ptr<HMatrix>>;

    HMatrix(const BlockNode &block, DenseBlock d);
    HMatrix(const BlockNode &block, RkBlock r);
    HMatrix(const BlockNode &block, Sons sons);

    HMatrix(const HMatrix &) = delete;
    HMatrix &operator=(const HMatrix &) = delete;

    const BlockNode &block() const { return *block_; }
    std::size_t rows() const { return block_->rows(); }
    std::size_t cols() const { return block_->cols(); }
    std::size_t row_offset() const { return block_->row->offset; }
    std::size_t col_offset() const { return block_->col->offset; }

    bool is_dense() const { return std::holds_alternative<DenseBlock>(content_); }
    bool is_rk() const { return std::holds_alternative<RkBlock>(content_); }
    bool is_leaf() const { return !is_partitioned(); }
    bool is_partitioned() const { return std::holds_alternative<Sons>(content_); }

    DenseBlock &dense() { return std::get<DenseBlock>(content_); }
    const DenseBlock &dense() const { return std::get<DenseBlock>(content_); }
    RkBlock &rk() { return std::get<RkBlock>(content_); }
    const RkBlock &rk() const { return std::get<RkBlock>(content_); }

    std::size_t rsons() const { return block_->rsons; }
    std::size_t csons() const { return block_->csons; }
    HMatrix &son(std::size_t i, std::size_t j) { return *std::get<Sons>(content_).at(i * csons() + j); }
    const HMatrix &son(std::size_t i, std::size_t j) const { return *std::get<Sons>(content_).at(i * csons() + j); }

    /// Set on the root only: keeps the block and cluster trees alive.
    const std::shared_ptr<const BlockTree> &tree() const { return tree_; }
    void set_tree(std::shared_ptr<const BlockTree> t) { tree_ = std::move(t); }

    std::unique_ptr<HMatrix> clone() const;

    std::size_t leaf_count() const;
    std::size_t max_rank() const;
    /// Stored coefficients (dense entries plus factor entries).
    std::size_t storage() const;

  private:
    const BlockNode *block_;
    std::variant<DenseBlock, RkBlock, Sons> content_;
    std::shared_ptr<const BlockTree> tree_;
};

/// How leaves are filled while building an H-matrix from a block tree.
struct ContentPolicy {
    std::function<DenseBlock(const BlockNode &)> dense;
    std::function<RkBlock(const BlockNode &)> rk;

    /// Zero dense blocks and rank-0 low-rank blocks.
    static ContentPolicy zero();
};

std::unique_ptr<HMatrix> build_hmatrix(std::shared_ptr<const BlockTree> tree,
                                       const ContentPolicy &init = ContentPolicy::zero());

/// Visits leaves in the skeleton order (depth-first, row-major over son grids).
void for_each_leaf(const HMatrix &h, const std::function<void(const HMatrix &)> &f);
void for_each_leaf(HMatrix &h, const std::function<void(HMatrix &)> &f);

inline constexpr std::size_t flatten_limit = 4096;

/// Dense copy of the whole matrix (test oracle support); refuses beyond flatten_limit.
DenseBlock flatten(const HMatrix &h);

/// y = H x
Vector hmatvec(const HMatrix &h, const Vector &x);

/// Y += alpha * op(M) * X with op the identity or the transpose.
void h_addmul(MatRef Y, double alpha, const HMatrix &M, CMatRef X, bool transpose = false);
/// Y += alpha * X * M
void h_addmul_left(MatRef Y, double alpha, CMatRef X, const HMatrix &M);

/// Leaf list, one line per leaf in skeleton order: row range, col range, kind, rank.
void dump_leaves(std::ostream &os, const HMatrix &h);

} // namespace hmx
