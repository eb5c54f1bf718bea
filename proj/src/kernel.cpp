#include "hmx/kernel.hpp"

#include <cmath>
#include <numbers>

namespace hmx {

double kernel_of_distance(double r, std::size_t d) {
    if (!(r > 0.0))
        throw InputError("kernel_eval: coincident points");
    switch (d) {
    case 1:
        return -std::log(r);
    case 2:
        return -std::log(r) / (2.0 * std::numbers::pi);
    case 3:
        return 1.0 / (4.0 * std::numbers::pi * r);
    default:
        throw InputError("kernel_eval: dimension must be 1, 2 or 3");
    }
}

double kernel_eval(const double *x, const double *y, std::size_t d) {
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a)
        s += (x[a] - y[a]) * (x[a] - y[a]);
    return kernel_of_distance(std::sqrt(s), d);
}

KernelSpec::KernelSpec(std::size_t d, std::size_t m, TruncationControl ctl) : dim(d), order(m), truncation(ctl) {
    if (d < 1 || d > 3)
        throw InputError("KernelSpec: dimension must be 1, 2 or 3");
    if (m < 1)
        throw InputError("KernelSpec: interpolation order must be positive");
}

DofSet make_geometry(std::size_t d, std::size_t n) {
    if (n == 0)
        throw InputError("make_geometry: n must be positive");
    std::vector<double> c;
    c.reserve(n * d);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double fi = static_cast<double>(i);
        switch (d) {
        case 1:
            c.push_back((fi + 0.5) / nn);
            break;
        case 2: {
            const double th = 2.0 * std::numbers::pi * (fi + 0.5) / nn;
            c.push_back(0.5 * std::cos(th));
            c.push_back(0.5 * std::sin(th));
            break;
        }
        case 3: {
            const double z   = 1.0 - 2.0 * (fi + 0.5) / nn;
            const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = 2.0 * std::numbers::pi * fi / std::numbers::phi;
            c.push_back(rad * std::cos(phi));
            c.push_back(rad * std::sin(phi));
            c.push_back(z);
            break;
        }
        default:
            throw InputError("make_geometry: dimension must be 1, 2 or 3");
        }
    }
    return DofSet(d, std::move(c));
}

double mesh_width(std::size_t d, std::size_t n) {
    const double nn = static_cast<double>(n);
    switch (d) {
    case 1:
        return 1.0 / nn;
    case 2:
        return std::numbers::pi / nn; // circumference of the radius-1/2 circle over n
    case 3:
        return std::sqrt(4.0 * std::numbers::pi / nn);
    default:
        throw InputError("mesh_width: dimension must be 1, 2 or 3");
    }
}

KernelProblem::KernelProblem(DofSet dofs, std::shared_ptr<const ClusterTree> tree, KernelSpec spec, double h)
    : dofs_(std::move(dofs)), tree_(std::move(tree)), spec_(spec), diagonal_value_(kernel_of_distance(0.5 * h, spec.dim)) {
    if (dofs_.dim() != spec_.dim || tree_->size() != dofs_.size())
        throw InputError("KernelProblem: geometry, tree and kernel dimension disagree");
}

double KernelProblem::entry(std::size_t i, std::size_t j) const {
    const double *x = point(i);
    const double *y = point(j);
    double s        = 0.0;
    for (std::size_t a = 0; a < spec_.dim; ++a)
        s += (x[a] - y[a]) * (x[a] - y[a]);
    if (s == 0.0)
        return diagonal_value_;
    return kernel_of_distance(std::sqrt(s), spec_.dim);
}

DenseBlock KernelProblem::assemble_dense_leaf(const Cluster &t, const Cluster &s) const {
    DenseBlock D(static_cast<Eigen::Index>(t.size), static_cast<Eigen::Index>(s.size));
    for (std::size_t j = 0; j < s.size; ++j)
        for (std::size_t i = 0; i < t.size; ++i)
            D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = entry(t.offset + i, s.offset + j);
    return D;
}

namespace {

// Tensor Chebyshev grid on a bounding box; degenerate axes collapse to one node.
struct ChebyshevGrid {
    std::vector<std::vector<double>> nodes; // per axis

    ChebyshevGrid(const Cluster &c, std::size_t m) {
        nodes.resize(c.dim());
        for (std::size_t a = 0; a < c.dim(); ++a) {
            const double lo = c.bbox_min[a], hi = c.bbox_max[a];
            const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            const std::size_t ma = half > 0.0 ? m : 1;
            for (std::size_t i = 0; i < ma; ++i)
                nodes[a].push_back(mid + half * std::cos((2.0 * static_cast<double>(i) + 1.0) * std::numbers::pi /
                                                         (2.0 * static_cast<double>(ma))));
        }
    }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto &ax : nodes)
            n *= ax.size();
        return n;
    }

    // Multi-index of flat node k, first axis fastest.
    std::vector<std::size_t> unflatten(std::size_t k) const {
        std::vector<std::size_t> idx(nodes.size());
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            idx[a] = k % nodes[a].size();
            k /= nodes[a].size();
        }
        return idx;
    }

    std::vector<double> point(std::size_t k) const {
        auto idx = unflatten(k);
        std::vector<double> p(nodes.size());
        for (std::size_t a = 0; a < nodes.size(); ++a)
            p[a] = nodes[a][idx[a]];
        return p;
    }

    static double lagrange(const std::vector<double> &xs, std::size_t i, double x) {
        double v = 1.0;
        for (std::size_t j = 0; j < xs.size(); ++j)
            if (j != i)
                v *= (x - xs[j]) / (xs[i] - xs[j]);
        return v;
    }

    double basis(std::size_t k, const double *x) const {
        auto idx = unflatten(k);
        double v = 1.0;
        for (std::size_t a = 0; a < nodes.size(); ++a)
            v *= lagrange(nodes[a], idx[a], x[a]);
        return v;
    }
};

} // namespace

RkBlock KernelProblem::interpolate_leaf(const Cluster &t, const Cluster &s) const {
    ChebyshevGrid gt(t, spec_.order), gs(s, spec_.order);
    const auto kt = static_cast<Eigen::Index>(gt.size());
    const auto ks = static_cast<Eigen::Index>(gs.size());

    DenseBlock S(kt, ks);
    for (Eigen::Index j = 0; j < ks; ++j) {
        auto y = gs.point(static_cast<std::size_t>(j));
        for (Eigen::Index i = 0; i < kt; ++i) {
            auto x = gt.point(static_cast<std::size_t>(i));
            S(i, j) = kernel_eval(x.data(), y.data(), spec_.dim);
        }
    }
    DenseBlock Vt(static_cast<Eigen::Index>(t.size), kt), Vs(static_cast<Eigen::Index>(s.size), ks);
    for (std::size_t i = 0; i < t.size; ++i)
        for (Eigen::Index k = 0; k < kt; ++k)
            Vt(static_cast<Eigen::Index>(i), k) = gt.basis(static_cast<std::size_t>(k), point(t.offset + i));
    for (std::size_t i = 0; i < s.size; ++i)
        for (Eigen::Index k = 0; k < ks; ++k)
            Vs(static_cast<Eigen::Index>(i), k) = gs.basis(static_cast<std::size_t>(k), point(s.offset + i));

    // A B^T = (Vt S) Vs^T; keep the smaller inner dimension.
    if (kt <= ks)
        return RkBlock(std::move(Vt), Vs * S.transpose());
    return RkBlock(Vt * S, std::move(Vs));
}

RkBlock KernelProblem::assemble_rk_leaf(const Cluster &t, const Cluster &s) const {
    RkBlock r = interpolate_leaf(t, s);
    return truncate(r.A, r.B, spec_.truncation);
}

std::unique_ptr<HMatrix> KernelProblem::assemble(std::shared_ptr<const BlockTree> tree) const {
    if (&tree->row_tree() != tree_.get() || &tree->col_tree() != tree_.get())
        throw InputError("KernelProblem::assemble: block tree is not built over this problem's clusters");
    ContentPolicy policy{[this](const BlockNode &b) { return assemble_dense_leaf(*b.row, *b.col); },
                         [this](const BlockNode &b) { return assemble_rk_leaf(*b.row, *b.col); }};
    return build_hmatrix(std::move(tree), policy);
}

DenseBlock KernelProblem::dense_matrix() const {
    if (tree_->size() > flatten_limit)
        throw std::length_error("KernelProblem::dense_matrix: n exceeds the dense size guard");
    return assemble_dense_leaf(tree_->root(), tree_->root());
}

KernelProblem make_bem_problem(std::size_t d, std::size_t n, std::size_t leafsize, KernelSpec spec) {
    DofSet dofs = make_geometry(d, n);
    auto tree   = std::make_shared<const ClusterTree>(build_cluster_tree(dofs, leafsize));
    return KernelProblem(std::move(dofs), std::move(tree), spec, mesh_width(d, n));
}

} // namespace hmx
