#include "hmx/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hmx {

DofSet::DofSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ < 1 || dim_ > 3)
        throw InputError("DofSet: dimension must be 1, 2 or 3");
    if (coords_.empty())
        throw InputError("DofSet: empty point set");
    if (coords_.size() % dim_ != 0)
        throw InputError("DofSet: coordinate count is not a multiple of the dimension");
    for (double x : coords_)
        if (!std::isfinite(x))
            throw InputError("DofSet: non-finite coordinate");
}

ClusterTree::ClusterTree(std::unique_ptr<Cluster> root, std::vector<std::size_t> tree_to_original,
                         std::size_t leafsize, std::vector<std::string> warnings)
    : root_(std::move(root)), tree_order_(std::move(tree_to_original)), leafsize_(leafsize),
      warnings_(std::move(warnings)) {
    permutation_.assign(tree_order_.size(), 0);
    for (std::size_t i = 0; i < tree_order_.size(); ++i)
        permutation_[tree_order_[i]] = i;
}

namespace {

std::size_t subtree_depth(const Cluster &c) {
    std::size_t d = 0;
    for (const auto &s : c.sons)
        d = std::max(d, 1 + subtree_depth(*s));
    return d;
}

std::size_t subtree_leaves(const Cluster &c) {
    if (c.is_leaf())
        return 1;
    std::size_t n = 0;
    for (const auto &s : c.sons)
        n += subtree_leaves(*s);
    return n;
}

class Builder {
  public:
    Builder(const DofSet &dofs, std::size_t leafsize) : dofs_(dofs), leafsize_(leafsize) {
        order_.resize(dofs.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
    }

    std::unique_ptr<Cluster> build(std::size_t offset, std::size_t size, std::size_t depth) {
        auto c    = std::make_unique<Cluster>();
        c->offset = offset;
        c->size   = size;
        c->depth  = depth;
        fit_bbox(*c);
        if (size <= leafsize_)
            return c;

        const std::size_t axis = splitting_dimension(*c);
        const double extent    = c->bbox_max[axis] - c->bbox_min[axis];
        if (extent <= 0.0) {
            std::ostringstream msg;
            msg << "cluster [" << offset << "," << offset + size << ") of coincident points kept as leaf of size "
                << size << " > leafsize " << leafsize_;
            warnings_.push_back(msg.str());
            return c;
        }

        const std::size_t left = sort_dofs(*c, axis);
        c->sons.push_back(build(offset, left, depth + 1));
        c->sons.push_back(build(offset + left, size - left, depth + 1));
        return c;
    }

    std::vector<std::size_t> take_order() { return std::move(order_); }
    std::vector<std::string> take_warnings() { return std::move(warnings_); }

  private:
    double coord(std::size_t tree_pos, std::size_t axis) const { return dofs_.point(order_[tree_pos])[axis]; }

    void fit_bbox(Cluster &c) const {
        const std::size_t d = dofs_.dim();
        c.bbox_min.assign(d, 0.0);
        c.bbox_max.assign(d, 0.0);
        for (std::size_t a = 0; a < d; ++a) {
            double lo = coord(c.offset, a), hi = lo;
            for (std::size_t i = c.offset + 1; i < c.end(); ++i) {
                lo = std::min(lo, coord(i, a));
                hi = std::max(hi, coord(i, a));
            }
            c.bbox_min[a] = lo;
            c.bbox_max[a] = hi;
        }
    }

    // widest axis, lowest index on ties
    static std::size_t splitting_dimension(const Cluster &c) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < c.dim(); ++a)
            if (c.bbox_max[a] - c.bbox_min[a] > c.bbox_max[best] - c.bbox_min[best])
                best = a;
        return best;
    }

    // Reorders the cluster's DoFs and returns the size of the first son.
    std::size_t sort_dofs(const Cluster &c, std::size_t axis) {
        auto first      = order_.begin() + static_cast<std::ptrdiff_t>(c.offset);
        auto last       = first + static_cast<std::ptrdiff_t>(c.size);
        const double mid = 0.5 * (c.bbox_min[axis] + c.bbox_max[axis]);
        auto split       = std::stable_partition(first, last, [&](std::size_t i) { return dofs_.point(i)[axis] <= mid; });
        auto left        = static_cast<std::size_t>(split - first);
        if (left > 0 && left < c.size)
            return left;

        // median fallback
        std::stable_sort(first, last, [&](std::size_t i, std::size_t j) { return dofs_.point(i)[axis] < dofs_.point(j)[axis]; });
        return c.size / 2;
    }

    const DofSet &dofs_;
    std::size_t leafsize_;
    std::vector<std::size_t> order_;
    std::vector<std::string> warnings_;
};

} // namespace

std::size_t ClusterTree::depth() const { return subtree_depth(*root_); }
std::size_t ClusterTree::leaf_count() const { return subtree_leaves(*root_); }

ClusterTree build_cluster_tree(const DofSet &dofs, std::size_t leafsize) {
    if (dofs.size() == 0)
        throw InputError("build_cluster_tree: empty DoF set");
    if (leafsize < 1)
        throw InputError("build_cluster_tree: leafsize must be positive");
    Builder b(dofs, leafsize);
    auto root = b.build(0, dofs.size(), 0);
    return ClusterTree(std::move(root), b.take_order(), leafsize, b.take_warnings());
}

namespace {

std::unique_ptr<Cluster> regular_node(std::size_t offset, std::size_t size, std::size_t depth, std::size_t max_depth,
                                      double n) {
    auto c      = std::make_unique<Cluster>();
    c->offset   = offset;
    c->size     = size;
    c->depth    = depth;
    c->bbox_min = {static_cast<double>(offset) / n};
    c->bbox_max = {static_cast<double>(offset + size - 1) / n};
    if (depth < max_depth) {
        const std::size_t left = size / 2;
        c->sons.push_back(regular_node(offset, left, depth + 1, max_depth, n));
        c->sons.push_back(regular_node(offset + left, size - left, depth + 1, max_depth, n));
    }
    return c;
}

} // namespace

ClusterTree build_regular_cluster_tree(std::size_t n, std::size_t depth) {
    if (n == 0)
        throw InputError("build_regular_cluster_tree: empty index set");
    if (depth >= 64 || (std::size_t{1} << depth) > n)
        throw InputError("build_regular_cluster_tree: depth " + std::to_string(depth) + " too deep for n = " +
                         std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto root = regular_node(0, n, 0, depth, static_cast<double>(n));
    const std::size_t leafsize = (n + (std::size_t{1} << depth) - 1) >> depth;
    return ClusterTree(std::move(root), std::move(order), leafsize);
}

double diam(const Cluster &c) {
    double s = 0.0;
    for (std::size_t a = 0; a < c.dim(); ++a) {
        const double e = c.bbox_max[a] - c.bbox_min[a];
        s += e * e;
    }
    return std::sqrt(s);
}

double dist(const Cluster &t, const Cluster &s) {
    if (t.dim() != s.dim())
        throw InputError("dist: clusters have different spatial dimensions");
    double sum = 0.0;
    for (std::size_t a = 0; a < t.dim(); ++a) {
        const double gap = std::max({0.0, s.bbox_min[a] - t.bbox_max[a], t.bbox_min[a] - s.bbox_max[a]});
        sum += gap * gap;
    }
    return std::sqrt(sum);
}

namespace {

void dump_node(std::ostream &os, const Cluster &c) {
    os << c.depth << ' ' << c.offset << ' ' << c.end();
    for (double x : c.bbox_min)
        os << ' ' << x;
    for (double x : c.bbox_max)
        os << ' ' << x;
    os << '\n';
    for (const auto &s : c.sons)
        dump_node(os, *s);
}

} // namespace

void dump_cluster_tree(std::ostream &os, const ClusterTree &tree) {
    os << "# cluster-tree n=" << tree.size() << " dim=" << tree.dim() << " leafsize=" << tree.leafsize() << '\n';
    dump_node(os, tree.root());
}

} // namespace hmx
