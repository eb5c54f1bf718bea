#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmx {

/// Column-major dense block.
using DenseBlock = Eigen::MatrixXd;
using Vector     = Eigen::VectorXd;

using MatRef  = Eigen::Ref<Eigen::MatrixXd>;
using CMatRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Base for failures of the numerics (as opposed to malformed input).
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SingularPivotError : public NumericalError {
  public:
    SingularPivotError(std::string where, std::size_t index, double value);

    std::size_t index() const { return index_; }
    double value() const { return value_; }

  private:
    std::size_t index_;
    double value_;
};

inline constexpr double default_pivot_tol = 1e-12;

/// Unpivoted in-place LU: D is overwritten by the unit lower factor (diagonal implied)
/// and the upper factor. Aborts when |pivot| < pivot_tol * max|D|.
void lu(MatRef D, double pivot_tol = default_pivot_tol);

/// B := L^{-1} B, L unit lower (stored strictly below the diagonal).
void trsm_lower_left(CMatRef L, MatRef B);
/// B := B L^{-1}, L unit lower.
void trsm_lower_right(CMatRef L, MatRef B);
/// B := U^{-1} B, U upper.
void trsm_upper_left(CMatRef U, MatRef B);
/// B := B U^{-1}, U upper.
void trsm_upper_right(CMatRef U, MatRef B);

/// C -= A * B
void gemm_update(MatRef C, CMatRef A, CMatRef B);

} // namespace hmx
