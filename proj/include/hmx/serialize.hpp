#pragma once

#include "hmx/hmatrix.hpp"

#include <iosfwd>
#include <memory>

namespace hmx {

/// Binary H-matrix file (little-endian host layout):
///   "HMXB" u32 version
///   row cluster tree, u8 same_cols flag, [column cluster tree]
///   block kinds in pre-order (u8 each, preceded by a u64 count)
///   leaf payloads in skeleton order: dense = rows*cols f64 column-major,
///   rk = u64 k, A (rows*k f64), B (cols*k f64)
/// A cluster tree is u64 dim, u64 leafsize, u64 n, n x u64 tree order, then nodes in
/// pre-order as u64 offset, u64 size, u64 son count, dim f64 bbox_min, dim f64 bbox_max.
void save_hmatrix(std::ostream &os, const HMatrix &h);
std::unique_ptr<HMatrix> load_hmatrix(std::istream &is);

/// Same structure and bit-identical leaf payloads.
bool bitwise_equal(const HMatrix &a, const HMatrix &b);

} // namespace hmx
