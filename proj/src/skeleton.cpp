#include "hmx/skeleton.hpp"

#include <stdexcept>

namespace hmx {

std::string_view to_string(AccessMode m) {
    switch (m) {
    case AccessMode::Read:
        return "in";
    case AccessMode::Write:
        return "out";
    case AccessMode::ReadWrite:
        return "inout";
    }
    return "?";
}

std::string_view to_string(Strength s) { return s == Strength::Strong ? "strong" : "weak"; }

Skeleton::Skeleton(const HMatrix &root) { visit(root); }

void Skeleton::visit(const HMatrix &node) {
    const std::size_t lo  = slots_.size();
    const std::size_t pos = preorder_.size();
    preorder_.push_back({});
    if (node.is_leaf()) {
        slots_.push_back(&node);
    } else {
        for (std::size_t i = 0; i < node.rsons(); ++i)
            for (std::size_t j = 0; j < node.csons(); ++j)
                visit(node.son(i, j));
    }
    const Interval iv{lo, slots_.size()};
    preorder_[pos] = iv;
    ranges_.emplace(&node, iv);
}

Interval Skeleton::range(const HMatrix &node) const {
    auto it = ranges_.find(&node);
    if (it == ranges_.end())
        throw std::out_of_range("Skeleton: node does not belong to this H-matrix");
    return it->second;
}

std::uint64_t Skeleton::hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix        = [&](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(slots_.size());
    for (const auto &iv : preorder_) {
        mix(iv.lo);
        mix(iv.hi);
    }
    return h;
}

} // namespace hmx
