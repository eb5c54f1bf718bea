#include "hmx/dense.hpp"

#include "hmx/geometry.hpp"

#include <cmath>
#include <sstream>

namespace hmx {

namespace {

std::string pivot_message(const std::string &where, std::size_t index, double value) {
    std::ostringstream os;
    os << "singular pivot " << value << " at index " << index;
    if (!where.empty())
        os << " in " << where;
    return os.str();
}

constexpr Eigen::Index lu_base_size = 32;

void lu_recursive(MatRef D, double abs_tol, Eigen::Index base) {
    const Eigen::Index n = D.rows();
    if (n <= lu_base_size) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const double p = D(k, k);
            if (!(std::abs(p) >= abs_tol) || p == 0.0)
                throw SingularPivotError("", static_cast<std::size_t>(base + k), p);
            for (Eigen::Index i = k + 1; i < n; ++i)
                D(i, k) /= p;
            for (Eigen::Index j = k + 1; j < n; ++j) {
                const double u = D(k, j);
                for (Eigen::Index i = k + 1; i < n; ++i)
                    D(i, j) -= D(i, k) * u;
            }
        }
        return;
    }
    const Eigen::Index h = n / 2;
    lu_recursive(D.topLeftCorner(h, h), abs_tol, base);
    auto a11 = D.topLeftCorner(h, h);
    auto a12 = D.topRightCorner(h, n - h);
    auto a21 = D.bottomLeftCorner(n - h, h);
    a11.triangularView<Eigen::UnitLower>().solveInPlace(a12);
    a11.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(a21);
    D.bottomRightCorner(n - h, n - h).noalias() -= a21 * a12;
    lu_recursive(D.bottomRightCorner(n - h, n - h), abs_tol, base + h);
}

} // namespace

SingularPivotError::SingularPivotError(std::string where, std::size_t index, double value)
    : NumericalError(pivot_message(where, index, value)), index_(index), value_(value) {}

void lu(MatRef D, double pivot_tol) {
    if (D.rows() != D.cols())
        throw InputError("lu: block is not square");
    if (D.size() == 0)
        return;
    const double scale = D.cwiseAbs().maxCoeff();
    lu_recursive(D, pivot_tol * scale, 0);
}

void trsm_lower_left(CMatRef L, MatRef B) {
    if (L.rows() != L.cols() || L.cols() != B.rows())
        throw InputError("trsm_lower_left: shape mismatch");
    L.triangularView<Eigen::UnitLower>().solveInPlace(B);
}

void trsm_lower_right(CMatRef L, MatRef B) {
    if (L.rows() != L.cols() || L.rows() != B.cols())
        throw InputError("trsm_lower_right: shape mismatch");
    L.triangularView<Eigen::UnitLower>().solveInPlace<Eigen::OnTheRight>(B);
}

void trsm_upper_left(CMatRef U, MatRef B) {
    if (U.rows() != U.cols() || U.cols() != B.rows())
        throw InputError("trsm_upper_left: shape mismatch");
    U.triangularView<Eigen::Upper>().solveInPlace(B);
}

void trsm_upper_right(CMatRef U, MatRef B) {
    if (U.rows() != U.cols() || U.rows() != B.cols())
        throw InputError("trsm_upper_right: shape mismatch");
    U.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(B);
}

void gemm_update(MatRef C, CMatRef A, CMatRef B) {
    if (A.rows() != C.rows() || B.cols() != C.cols() || A.cols() != B.rows())
        throw InputError("gemm_update: shape mismatch");
    if (A.cols() == 0)
        return;
    C.noalias() -= A * B;
}

} // namespace hmx
