#include "hmx/lowrank.hpp"

#include "hmx/geometry.hpp"

#include <algorithm>

namespace hmx {

RkBlock::RkBlock(DenseBlock a, DenseBlock b) : A(std::move(a)), B(std::move(b)) {
    if (A.cols() != B.cols())
        throw InputError("RkBlock: factor ranks differ");
}

DenseBlock RkBlock::to_dense() const {
    DenseBlock D = DenseBlock::Zero(A.rows(), B.rows());
    if (rank() > 0)
        D.noalias() = A * B.transpose();
    return D;
}

TruncationControl::TruncationControl(double e, std::optional<std::size_t> cap) : eps(e), kmax(cap) {
    if (!(e >= 0.0))
        throw InputError("truncation tolerance must be nonnegative");
}

std::size_t TruncationControl::keep(const Eigen::VectorXd &sigma) const {
    if (sigma.size() == 0 || !(sigma(0) > 0.0))
        return 0;
    const double cut = eps * sigma(0);
    std::size_t k    = 0;
    while (k < static_cast<std::size_t>(sigma.size()) && sigma(static_cast<Eigen::Index>(k)) > cut)
        ++k;
    if (kmax)
        k = std::min(k, *kmax);
    return k;
}

RkBlock rk_apply_left(CMatRef Z, const RkBlock &X) {
    if (static_cast<std::size_t>(Z.cols()) != X.rows())
        throw InputError("rk_apply_left: shape mismatch");
    DenseBlock A(Z.rows(), X.A.cols());
    if (X.rank() > 0)
        A.noalias() = Z * X.A;
    return RkBlock(std::move(A), X.B);
}

RkBlock rk_apply_right(const RkBlock &X, CMatRef Z) {
    if (static_cast<std::size_t>(Z.rows()) != X.cols())
        throw InputError("rk_apply_right: shape mismatch");
    DenseBlock B(Z.cols(), X.B.cols());
    if (X.rank() > 0)
        B.noalias() = Z.transpose() * X.B;
    return RkBlock(X.A, std::move(B));
}

RkBlock rk_solve_lower(CMatRef L, const RkBlock &X, Side side) {
    RkBlock Y = X;
    if (side == Side::Left) {
        trsm_lower_left(L, Y.A);
    } else {
        if (static_cast<std::size_t>(L.rows()) != X.cols() || L.rows() != L.cols())
            throw InputError("rk_solve_lower: shape mismatch");
        // (A B^T) L^{-1} = A (L^{-T} B)^T
        L.transpose().triangularView<Eigen::UnitUpper>().solveInPlace(Y.B);
    }
    return Y;
}

RkBlock rk_solve_upper(CMatRef U, const RkBlock &X, Side side) {
    RkBlock Y = X;
    if (side == Side::Left) {
        trsm_upper_left(U, Y.A);
    } else {
        if (static_cast<std::size_t>(U.rows()) != X.cols() || U.rows() != U.cols())
            throw InputError("rk_solve_upper: shape mismatch");
        U.transpose().triangularView<Eigen::Lower>().solveInPlace(Y.B);
    }
    return Y;
}

namespace {

// Thin QR: M = Q R with Q having min(rows, cols) orthonormal columns.
void thin_qr(const DenseBlock &M, DenseBlock &Q, DenseBlock &R) {
    const Eigen::Index m = std::min(M.rows(), M.cols());
    Eigen::HouseholderQR<DenseBlock> qr(M);
    Q = qr.householderQ() * DenseBlock::Identity(M.rows(), m);
    R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
}

RkBlock from_svd(const Eigen::BDCSVD<DenseBlock> &svd, const TruncationControl &ctl, const DenseBlock *Qa,
                 const DenseBlock *Qb) {
    const auto k        = static_cast<Eigen::Index>(ctl.keep(svd.singularValues()));
    DenseBlock U        = svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal();
    DenseBlock V        = svd.matrixV().leftCols(k);
    if (Qa)
        U = (*Qa * U).eval();
    if (Qb)
        V = (*Qb * V).eval();
    return RkBlock(std::move(U), std::move(V));
}

} // namespace

RkBlock compress_dense(CMatRef D, const TruncationControl &ctl) {
    if (D.size() == 0)
        return RkBlock(static_cast<std::size_t>(D.rows()), static_cast<std::size_t>(D.cols()));
    Eigen::BDCSVD<DenseBlock> svd(D, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return from_svd(svd, ctl, nullptr, nullptr);
}

RkBlock truncate(const DenseBlock &A, const DenseBlock &B, const TruncationControl &ctl) {
    if (A.cols() != B.cols())
        throw InputError("truncate: factor ranks differ");
    const auto rows = static_cast<std::size_t>(A.rows());
    const auto cols = static_cast<std::size_t>(B.rows());
    if (A.cols() == 0 || rows == 0 || cols == 0)
        return RkBlock(rows, cols);

    // Past half the smaller dimension the factorized path loses to a dense SVD.
    if (2 * static_cast<std::size_t>(A.cols()) >= std::min(rows, cols)) {
        DenseBlock D = A * B.transpose();
        return compress_dense(D, ctl);
    }

    DenseBlock Qa, Ra, Qb, Rb;
    thin_qr(A, Qa, Ra);
    thin_qr(B, Qb, Rb);
    DenseBlock core = Ra * Rb.transpose();
    Eigen::BDCSVD<DenseBlock> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return from_svd(svd, ctl, &Qa, &Qb);
}

RkBlock rk_axpby_truncated(double alpha, const RkBlock &X1, double beta, const RkBlock &X2,
                           const TruncationControl &ctl) {
    if (X1.rows() != X2.rows() || X1.cols() != X2.cols())
        throw InputError("rk_add_truncated: shape mismatch");
    const Eigen::Index k1 = X1.A.cols(), k2 = X2.A.cols();
    DenseBlock A(X1.A.rows(), k1 + k2);
    DenseBlock B(X1.B.rows(), k1 + k2);
    A.leftCols(k1)  = alpha * X1.A;
    A.rightCols(k2) = beta * X2.A;
    B.leftCols(k1)  = X1.B;
    B.rightCols(k2) = X2.B;
    return truncate(A, B, ctl);
}

RkBlock rk_add_truncated(const RkBlock &X1, const RkBlock &X2, const TruncationControl &ctl) {
    return rk_axpby_truncated(1.0, X1, 1.0, X2, ctl);
}

} // namespace hmx
