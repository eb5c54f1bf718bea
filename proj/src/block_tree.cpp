#include "hmx/block_tree.hpp"

#include <stdexcept>

namespace hmx {

std::string_view to_string(BlockKind k) {
    switch (k) {
    case BlockKind::Admissible:
        return "admissible";
    case BlockKind::Inadmissible:
        return "dense";
    case BlockKind::Partitioned:
        return "partitioned";
    }
    return "?";
}

BlockTree::BlockTree(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
                     std::unique_ptr<BlockNode> root)
    : rows_(std::move(rows)), cols_(std::move(cols)), root_(std::move(root)) {}

std::size_t BlockTree::leaf_count() const {
    std::size_t n = 0;
    for_each_leaf(*root_, [&](const BlockNode &) { ++n; });
    return n;
}

AdmissibilityParam::AdmissibilityParam(double e) : eta(e) {
    if (!(e > 0.0))
        throw InputError("admissibility parameter eta must be positive");
}

bool admissible(const Cluster &t, const Cluster &s, AdmissibilityParam eta) {
    const double d = dist(t, s);
    return d > 0.0 && std::min(diam(t), diam(s)) <= eta.eta * d;
}

namespace {

std::unique_ptr<BlockNode> build_node(const Cluster &t, const Cluster &s, const BlockRule &rule) {
    auto b  = std::make_unique<BlockNode>();
    b->row  = &t;
    b->col  = &s;
    b->kind = rule(t, s);
    if (b->kind == BlockKind::Partitioned) {
        if (t.is_leaf() || s.is_leaf())
            throw std::logic_error("block rule partitioned a pair with a leaf cluster");
        b->rsons = t.sons.size();
        b->csons = s.sons.size();
        for (const auto &ts : t.sons)
            for (const auto &ss : s.sons)
                b->sons.push_back(build_node(*ts, *ss, rule));
    }
    return b;
}

} // namespace

BlockTree build_block_tree_with(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
                                const BlockRule &rule) {
    auto root = build_node(rows->root(), cols->root(), rule);
    return BlockTree(std::move(rows), std::move(cols), std::move(root));
}

BlockTree build_block_tree(std::shared_ptr<const ClusterTree> rows, std::shared_ptr<const ClusterTree> cols,
                           AdmissibilityParam eta) {
    return build_block_tree_with(std::move(rows), std::move(cols), [eta](const Cluster &t, const Cluster &s) {
        if (admissible(t, s, eta))
            return BlockKind::Admissible;
        if (!t.is_leaf() && !s.is_leaf())
            return BlockKind::Partitioned;
        return BlockKind::Inadmissible;
    });
}

BlockTree build_diagonal_2x2_tree(std::size_t n, std::size_t r) {
    auto tree = std::make_shared<const ClusterTree>(build_regular_cluster_tree(n, r));
    return build_block_tree_with(tree, tree, [](const Cluster &t, const Cluster &s) {
        if (&t == &s && !t.is_leaf())
            return BlockKind::Partitioned;
        return BlockKind::Inadmissible;
    });
}

BlockTree build_sample_tree(std::size_t n, bool split_upper_right, bool lowrank_offdiag) {
    auto tree             = std::make_shared<const ClusterTree>(build_regular_cluster_tree(n, 2));
    const Cluster *root   = &tree->root();
    const Cluster *first  = &root->son(0);
    const Cluster *second = &root->son(1);
    return build_block_tree_with(tree, tree, [=](const Cluster &t, const Cluster &s) {
        if (&t == root && &s == root)
            return BlockKind::Partitioned;
        if (&t == &s && t.depth == 1)
            return BlockKind::Partitioned;
        if (split_upper_right && &t == first && &s == second)
            return BlockKind::Partitioned;
        if (t.depth == 1 && lowrank_offdiag)
            return BlockKind::Admissible;
        return BlockKind::Inadmissible;
    });
}

void for_each_leaf(const BlockNode &b, const std::function<void(const BlockNode &)> &f) {
    if (b.is_leaf()) {
        f(b);
        return;
    }
    for (const auto &s : b.sons)
        for_each_leaf(*s, f);
}

} // namespace hmx
