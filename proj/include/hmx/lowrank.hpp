#pragma once

#include "hmx/dense.hpp"

#include <cstddef>
#include <optional>

namespace hmx {

/// Factorized block A * B^T with A rows x k and B cols x k.
struct RkBlock {
    DenseBlock A;
    DenseBlock B;

    RkBlock() = default;
    RkBlock(std::size_t rows, std::size_t cols) : A(rows, 0), B(cols, 0) {}
    RkBlock(DenseBlock a, DenseBlock b);

    std::size_t rows() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(B.rows()); }
    std::size_t rank() const { return static_cast<std::size_t>(A.cols()); }

    DenseBlock to_dense() const;
};

/// Relative truncation: singular values sigma_i <= eps * sigma_1 are dropped,
/// and at most kmax are kept when a cap is set.
struct TruncationControl {
    double eps = 1e-6;
    std::optional<std::size_t> kmax;

    TruncationControl() = default;
    explicit TruncationControl(double e, std::optional<std::size_t> cap = std::nullopt);

    std::size_t keep(const Eigen::VectorXd &sigma) const;
};

enum class Side { Left, Right };

/// Z * X = (Z A) B^T
RkBlock rk_apply_left(CMatRef Z, const RkBlock &X);
/// X * Z = A (Z^T B)^T
RkBlock rk_apply_right(const RkBlock &X, CMatRef Z);

/// Left: L^{-1} X (A <- L^{-1} A). Right: X L^{-1} (B <- L^{-T} B). L unit lower.
RkBlock rk_solve_lower(CMatRef L, const RkBlock &X, Side side);
/// Left: U^{-1} X. Right: X U^{-1} (B <- U^{-T} B). U upper.
RkBlock rk_solve_upper(CMatRef U, const RkBlock &X, Side side);

/// Re-factorizes A B^T to the truncation tolerance via QR of both factors and an SVD
/// of the small core.
RkBlock truncate(const DenseBlock &A, const DenseBlock &B, const TruncationControl &ctl);

/// X1 + X2 rounded to the truncation tolerance.
RkBlock rk_add_truncated(const RkBlock &X1, const RkBlock &X2, const TruncationControl &ctl);

/// alpha * X1 + beta * X2 rounded to the truncation tolerance.
RkBlock rk_axpby_truncated(double alpha, const RkBlock &X1, double beta, const RkBlock &X2,
                           const TruncationControl &ctl);

/// SVD-based low-rank approximation of a dense block.
RkBlock compress_dense(CMatRef D, const TruncationControl &ctl);

} // namespace hmx
