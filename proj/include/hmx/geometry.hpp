#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmx {

/// Raised for malformed input (empty point sets, dimension mismatches, bad parameters).
class InputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Geometric description of the degrees of freedom: n points in d dimensions,
/// stored point-major (`coords[i * dim + a]`).
class DofSet {
  public:
    DofSet() = default;
    DofSet(std::size_t dim, std::vector<double> coords);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    const double *point(std::size_t i) const { return coords_.data() + i * dim_; }
    const std::vector<double> &coords() const { return coords_; }

  private:
    std::size_t dim_ = 0;
    std::vector<double> coords_;
};

/// A node of the cluster tree. Its DoFs are the contiguous range
/// [offset, offset + size) of the tree-ordered index space.
struct Cluster {
    std::size_t offset = 0;
    std::size_t size   = 0;
    std::size_t depth  = 0;
    std::vector<double> bbox_min;
    std::vector<double> bbox_max;
    std::vector<std::unique_ptr<Cluster>> sons;

    bool is_leaf() const { return sons.empty(); }
    std::size_t dim() const { return bbox_min.size(); }
    std::size_t end() const { return offset + size; }
    const Cluster &son(std::size_t i) const { return *sons.at(i); }
};

class ClusterTree {
  public:
    ClusterTree(std::unique_ptr<Cluster> root, std::vector<std::size_t> tree_to_original, std::size_t leafsize,
                std::vector<std::string> warnings = {});

    const Cluster &root() const { return *root_; }
    std::size_t size() const { return root_->size; }
    std::size_t dim() const { return root_->dim(); }
    std::size_t leafsize() const { return leafsize_; }

    /// permutation()[original index] = tree-ordered index.
    const std::vector<std::size_t> &permutation() const { return permutation_; }
    /// Inverse permutation: original index of the DoF at tree position i.
    const std::vector<std::size_t> &tree_order() const { return tree_order_; }
    /// Leaves that could not be split below leafsize (duplicate coordinates).
    const std::vector<std::string> &warnings() const { return warnings_; }

    std::size_t depth() const;
    std::size_t leaf_count() const;

  private:
    std::unique_ptr<Cluster> root_;
    std::vector<std::size_t> tree_order_;
    std::vector<std::size_t> permutation_;
    std::size_t leafsize_;
    std::vector<std::string> warnings_;
};

inline constexpr std::size_t default_leafsize = 32;

/// Geometric bisection: split along the widest bbox axis at its midpoint, falling
/// back to a median split when the midpoint leaves one side empty.
ClusterTree build_cluster_tree(const DofSet &dofs, std::size_t leafsize = default_leafsize);

/// Index-halving tree of the given depth over n points on [0,1); used by the synthetic
/// recursive 2x2 structures.
ClusterTree build_regular_cluster_tree(std::size_t n, std::size_t depth);

/// Euclidean diameter of the cluster's bounding box.
double diam(const Cluster &c);

/// Euclidean distance between two bounding boxes.
double dist(const Cluster &t, const Cluster &s);

/// One line per node in pre-order: depth, index range, bbox.
void dump_cluster_tree(std::ostream &os, const ClusterTree &tree);

} // namespace hmx
