#pragma once

#include "hmx/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

namespace hmx {

enum class BlockKind { Admissible, Inadmissible, Partitioned };

std::string_view to_string(BlockKind k);

struct BlockNode {
    const Cluster *row = nullptr;
    const Cluster *col = nullptr;
    BlockKind kind     = BlockKind::Inadmissible;
    std::size_t rsons  = 0;
    std::size_t csons  = 0;
    std::vector<std::unique_ptr<BlockNode>> sons; // row-major rsons x csons

    bool is_leaf() const { return kind != BlockKind::Partitioned; }
    const BlockNode &son(std::size_t i, std::size_t j) const { return *sons.at(i * csons + j); }
    std::size_t rows() const { return row->size; }
    std::size_t cols() const { return col->size; }
};

/// Owns the block hierarchy and keeps the cluster trees it points into alive.
class BlockTree {
  public:
    BlockTree(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
              std::unique_ptr<BlockNode> root);

    const BlockNode &root() const { return *root_; }
    const ClusterTree &row_tree() const { return *rows_; }
    const ClusterTree &col_tree() const { return *cols_; }
    std::shared_ptr<const ClusterTree> row_tree_ptr() const { return rows_; }
    std::shared_ptr<const ClusterTree> col_tree_ptr() const { return cols_; }

    std::size_t leaf_count() const;

  private:
    std::shared_ptr<const ClusterTree> rows_;
    std::shared_ptr<const ClusterTree> cols_;
    std::unique_ptr<BlockNode> root_;
};

struct AdmissibilityParam {
    double eta = 1.0;
    explicit AdmissibilityParam(double e = 1.0);
};

/// min(diam t, diam s) <= eta * dist(t, s), with touching boxes (dist = 0) never admissible.
bool admissible(const Cluster &t, const Cluster &s, AdmissibilityParam eta);

/// Recursive construction over cluster pairs: admissible -> Admissible leaf,
/// both clusters split -> Partitioned, otherwise Inadmissible leaf.
BlockTree build_block_tree(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
                           AdmissibilityParam eta);

/// Decides the kind of a block before recursion; returning Partitioned for a pair whose
/// clusters cannot both be split is a construction error.
using BlockRule = std::function<BlockKind(const Cluster &, const Cluster &)>;
BlockTree build_block_tree_with(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
                                const BlockRule &rule);

/// Synthetic dense structure: diagonal blocks recursively split 2x2 down to depth r,
/// every off-diagonal block is a dense leaf at the level where it appears.
BlockTree build_diagonal_2x2_tree(std::size_t n, std::size_t r);

/// The two-level sample structures: diagonal quarters split 2x2 and the off-diagonal halves
/// kept as single leaves (`split_upper_right` additionally splits the top-right half).
/// `lowrank_offdiag` marks the unsplit off-diagonal halves Admissible instead of dense.
BlockTree build_sample_tree(std::size_t n, bool split_upper_right, bool lowrank_offdiag = false);

/// Leaves in depth-first row-major order.
void for_each_leaf(const BlockNode &b, const std::function<void(const BlockNode &)> &f);

} // namespace hmx
