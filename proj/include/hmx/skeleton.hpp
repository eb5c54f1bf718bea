#pragma once

#include "hmx/hmatrix.hpp"

#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hmx {

/// Half-open interval [lo, hi) of skeleton slots.
struct Interval {
    std::size_t lo = 0;
    std::size_t hi = 0;

    std::size_t size() const { return hi - lo; }
    bool intersects(const Interval &o) const { return lo < o.hi && o.lo < hi; }
    bool contains(const Interval &o) const { return lo <= o.lo && o.hi <= hi; }
    friend bool operator==(const Interval &, const Interval &) = default;
};

enum class AccessMode { Read, Write, ReadWrite };
enum class Strength { Strong, Weak };

inline bool writes(AccessMode m) { return m != AccessMode::Read; }
std::string_view to_string(AccessMode m);
std::string_view to_string(Strength s);

/// A task operand expressed over the skeleton.
struct Region {
    Interval interval;
    AccessMode mode   = AccessMode::Read;
    Strength strength = Strength::Strong;

    friend bool operator==(const Region &, const Region &) = default;
};

/// One representant slot per leaf, enumerated depth-first row-major, and the slot
/// interval of every node of the hierarchy. Built once; never changes afterwards, no
/// matter how leaf storage is reallocated.
class Skeleton {
  public:
    explicit Skeleton(const HMatrix &root);

    std::size_t slot_count() const { return slots_.size(); }
    const HMatrix &leaf(std::size_t slot) const { return *slots_.at(slot); }
    Interval range(const HMatrix &node) const;

    Region region(const HMatrix &node, AccessMode mode, Strength strength = Strength::Strong) const {
        return Region{range(node), mode, strength};
    }

    /// Intervals of all nodes in pre-order (for hashing and exhaustive checks).
    const std::vector<Interval> &preorder_ranges() const { return preorder_; }

    /// FNV-1a over the slot count and every node interval in pre-order.
    std::uint64_t hash() const;

  private:
    void visit(const HMatrix &node);

    std::vector<const HMatrix *> slots_;
    std::unordered_map<const HMatrix *, Interval> ranges_;
    std::vector<Interval> preorder_;
};

inline Skeleton build_skeleton(const HMatrix &h) { return Skeleton(h); }

} // namespace hmx
