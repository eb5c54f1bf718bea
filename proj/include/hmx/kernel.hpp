#pragma once

#include "hmx/hmatrix.hpp"

#include <memory>

namespace hmx {

/// Laplace-type kernel in d = 1, 2, 3:
///   d=1: -log|x-y|,  d=2: -1/(2 pi) log|x-y|,  d=3: 1/(4 pi |x-y|).
/// Throws InputError for coincident points.
double kernel_eval(const double *x, const double *y, std::size_t d);
double kernel_of_distance(double r, std::size_t d);

struct KernelSpec {
    std::size_t dim   = 1;
    std::size_t order = 5; // Chebyshev nodes per axis
    TruncationControl truncation{1e-6};

    KernelSpec() = default;
    KernelSpec(std::size_t d, std::size_t m, TruncationControl ctl);

    static std::size_t default_order(std::size_t d) { return d == 3 ? 4 : 5; }
};

/// Boundary-like point sets: d=1 uniform midpoints on [0,1], d=2 a circle of
/// radius 1/2, d=3 a Fibonacci lattice on the unit sphere.
DofSet make_geometry(std::size_t d, std::size_t n);
/// Local mesh width of make_geometry(d, n).
double mesh_width(std::size_t d, std::size_t n);

/// A collocation problem: kernel samples at DoF pairs, with coincident pairs replaced by
/// the kernel evaluated at half the mesh width.
class KernelProblem {
  public:
    KernelProblem(DofSet dofs, std::shared_ptr<const ClusterTree> tree, KernelSpec spec, double h);

    /// Entry for tree-ordered indices i, j.
    double entry(std::size_t i, std::size_t j) const;

    DenseBlock assemble_dense_leaf(const Cluster &t, const Cluster &s) const;
    /// Tensor Chebyshev interpolation on bbox(t) x bbox(s), recompressed to the tolerance.
    RkBlock assemble_rk_leaf(const Cluster &t, const Cluster &s) const;
    /// Same interpolant without recompression (rank = product of per-axis orders).
    RkBlock interpolate_leaf(const Cluster &t, const Cluster &s) const;

    std::unique_ptr<HMatrix> assemble(std::shared_ptr<const BlockTree> tree) const;
    /// Full dense matrix in tree order; n must be within flatten_limit.
    DenseBlock dense_matrix() const;

    const DofSet &dofs() const { return dofs_; }
    const ClusterTree &tree() const { return *tree_; }
    std::shared_ptr<const ClusterTree> tree_ptr() const { return tree_; }
    const KernelSpec &spec() const { return spec_; }

  private:
    const double *point(std::size_t tree_index) const { return dofs_.point(tree_->tree_order()[tree_index]); }

    DofSet dofs_;
    std::shared_ptr<const ClusterTree> tree_;
    KernelSpec spec_;
    double diagonal_value_;
};

/// Geometry, cluster tree, and kernel problem for the BEM-style cases.
KernelProblem make_bem_problem(std::size_t d, std::size_t n, std::size_t leafsize, KernelSpec spec);

} // namespace hmx
