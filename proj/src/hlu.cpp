#include "hmx/hlu.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace hmx {

namespace {

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

// ---------------------------------------------------------------------------
// Operand views: a whole node, or a cluster-aligned window of a leaf.
// ---------------------------------------------------------------------------

struct View {
    const HMatrix *node = nullptr;
    const Cluster *row  = nullptr;
    const Cluster *col  = nullptr;

    std::size_t rows() const { return row->size; }
    std::size_t cols() const { return col->size; }
    bool partitioned() const { return node->is_partitioned(); }
    Eigen::Index r0() const { return ix(row->offset - node->row_offset()); }
    Eigen::Index c0() const { return ix(col->offset - node->col_offset()); }

    auto dense() const { return node->dense().block(r0(), c0(), ix(rows()), ix(cols())); }
    auto rk_a() const { return node->rk().A.middleRows(r0(), ix(rows())); }
    auto rk_b() const { return node->rk().B.middleRows(c0(), ix(cols())); }
    std::size_t rank() const {
        if (partitioned() || node->is_dense())
            return std::min(rows(), cols());
        return node->rk().rank();
    }
};

View whole(const HMatrix &h) { return View{&h, h.block().row, h.block().col}; }

View restrict_view(const View &v, const Cluster *r, const Cluster *c) {
    if (v.partitioned()) {
        for (std::size_t i = 0; i < v.node->rsons(); ++i)
            for (std::size_t j = 0; j < v.node->csons(); ++j) {
                const HMatrix &s = v.node->son(i, j);
                if (s.block().row == r && s.block().col == c)
                    return whole(s);
            }
        throw std::logic_error("hgemm: operand partition does not match the destination");
    }
    if (r->offset < v.row->offset || r->offset + r->size > v.row->offset + v.row->size ||
        c->offset < v.col->offset || c->offset + c->size > v.col->offset + v.col->size)
        throw std::logic_error("hgemm: operand window outside its block");
    return View{v.node, r, c};
}

std::size_t son_row_offset(const HMatrix &parent, std::size_t i) {
    return parent.son(i, 0).row_offset() - parent.row_offset();
}
std::size_t son_col_offset(const HMatrix &parent, std::size_t j) {
    return parent.son(0, j).col_offset() - parent.col_offset();
}

std::string block_path(const HMatrix &h) {
    std::ostringstream os;
    os << "rows [" << h.row_offset() << ',' << h.row_offset() + h.rows() << ") cols [" << h.col_offset() << ','
       << h.col_offset() + h.cols() << ')';
    return os.str();
}

// ---------------------------------------------------------------------------
// In-body H-arithmetic on dense right-hand sides
// ---------------------------------------------------------------------------

// X := L^{-1} X, L unit lower.
void lower_solve_left(const HMatrix &L, MatRef X) {
    if (L.is_leaf()) {
        trsm_lower_left(L.dense(), X);
        return;
    }
    const std::size_t p = L.rsons();
    for (std::size_t i = 0; i < p; ++i) {
        const HMatrix &Lii = L.son(i, i);
        auto Xi            = X.middleRows(ix(son_row_offset(L, i)), ix(Lii.rows()));
        lower_solve_left(Lii, Xi);
        for (std::size_t k = i + 1; k < p; ++k) {
            const HMatrix &Lki = L.son(k, i);
            h_addmul(X.middleRows(ix(son_row_offset(L, k)), ix(Lki.rows())), -1.0, Lki, Xi);
        }
    }
}

// X := U^{-1} X, U upper.
void upper_solve_left(const HMatrix &U, MatRef X) {
    if (U.is_leaf()) {
        trsm_upper_left(U.dense(), X);
        return;
    }
    const std::size_t p = U.rsons();
    for (std::size_t i = p; i-- > 0;) {
        const HMatrix &Uii = U.son(i, i);
        auto Xi            = X.middleRows(ix(son_row_offset(U, i)), ix(Uii.rows()));
        upper_solve_left(Uii, Xi);
        for (std::size_t k = 0; k < i; ++k) {
            const HMatrix &Uki = U.son(k, i);
            h_addmul(X.middleRows(ix(son_row_offset(U, k)), ix(Uki.rows())), -1.0, Uki, Xi);
        }
    }
}

// X := X U^{-1}, U upper.
void upper_solve_right(const HMatrix &U, MatRef X) {
    if (U.is_leaf()) {
        trsm_upper_right(U.dense(), X);
        return;
    }
    const std::size_t p = U.csons();
    for (std::size_t j = 0; j < p; ++j) {
        const HMatrix &Ujj = U.son(j, j);
        auto Xj            = X.middleCols(ix(son_col_offset(U, j)), ix(Ujj.cols()));
        upper_solve_right(Ujj, Xj);
        for (std::size_t k = j + 1; k < p; ++k) {
            const HMatrix &Ujk = U.son(j, k);
            h_addmul_left(X.middleCols(ix(son_col_offset(U, k)), ix(Ujk.cols())), -1.0, Xj, Ujk);
        }
    }
}

// Y += alpha V X
void view_mul_right(const View &V, CMatRef X, MatRef Y, double alpha) {
    if (V.partitioned()) {
        h_addmul(Y, alpha, *V.node, X);
    } else if (V.node->is_dense()) {
        Y.noalias() += alpha * V.dense() * X;
    } else if (V.node->rk().rank() > 0) {
        DenseBlock T = V.rk_b().transpose() * X;
        Y.noalias() += alpha * V.rk_a() * T;
    }
}

// Y += alpha X V
void view_mul_left(CMatRef X, const View &V, MatRef Y, double alpha) {
    if (V.partitioned()) {
        h_addmul_left(Y, alpha, X, *V.node);
    } else if (V.node->is_dense()) {
        Y.noalias() += alpha * X * V.dense();
    } else if (V.node->rk().rank() > 0) {
        DenseBlock T = X * V.rk_a();
        Y.noalias() += alpha * T * V.rk_b().transpose();
    }
}

// C += alpha A B
void dense_product(MatRef C, const View &A, const View &B, double alpha) {
    if (!A.partitioned()) {
        if (A.node->is_dense()) {
            view_mul_left(A.dense(), B, C, alpha);
        } else if (A.node->rk().rank() > 0) {
            DenseBlock T = DenseBlock::Zero(A.node->rk().A.cols(), ix(B.cols()));
            view_mul_left(A.rk_b().transpose(), B, T, 1.0);
            C.noalias() += alpha * A.rk_a() * T;
        }
        return;
    }
    if (!B.partitioned()) {
        if (B.node->is_dense()) {
            view_mul_right(A, B.dense(), C, alpha);
        } else if (B.node->rk().rank() > 0) {
            DenseBlock T = DenseBlock::Zero(ix(A.rows()), B.node->rk().A.cols());
            view_mul_right(A, B.rk_a(), T, 1.0);
            C.noalias() += alpha * T * B.rk_b().transpose();
        }
        return;
    }
    const HMatrix &a = *A.node, &b = *B.node;
    for (std::size_t i = 0; i < a.rsons(); ++i)
        for (std::size_t k = 0; k < b.csons(); ++k)
            for (std::size_t j = 0; j < a.csons(); ++j) {
                const HMatrix &aij = a.son(i, j), &bjk = b.son(j, k);
                dense_product(C.block(ix(son_row_offset(a, i)), ix(son_col_offset(b, k)), ix(aij.rows()), ix(bjk.cols())),
                              whole(aij), whole(bjk), alpha);
            }
}

// A B as a low-rank block.
RkBlock rk_product(const View &A, const View &B, const TruncationControl &ctl) {
    if (!A.partitioned() && A.node->is_rk()) {
        const std::size_t k = A.node->rk().rank();
        DenseBlock T        = DenseBlock::Zero(ix(k), ix(B.cols()));
        if (k > 0)
            view_mul_left(A.rk_b().transpose(), B, T, 1.0);
        return RkBlock(DenseBlock(A.rk_a()), T.transpose());
    }
    if (!B.partitioned() && B.node->is_rk()) {
        const std::size_t k = B.node->rk().rank();
        DenseBlock T        = DenseBlock::Zero(ix(A.rows()), ix(k));
        if (k > 0)
            view_mul_right(A, B.rk_a(), T, 1.0);
        return RkBlock(std::move(T), DenseBlock(B.rk_b()));
    }
    if (A.partitioned() && B.partitioned()) {
        const HMatrix &a = *A.node, &b = *B.node;
        RkBlock acc(A.rows(), B.cols());
        for (std::size_t i = 0; i < a.rsons(); ++i)
            for (std::size_t k = 0; k < b.csons(); ++k) {
                RkBlock part(a.son(i, 0).rows(), b.son(0, k).cols());
                for (std::size_t j = 0; j < a.csons(); ++j)
                    part = rk_add_truncated(part, rk_product(whole(a.son(i, j)), whole(b.son(j, k)), ctl), ctl);
                DenseBlock Ae = DenseBlock::Zero(ix(A.rows()), ix(part.rank()));
                DenseBlock Be = DenseBlock::Zero(ix(B.cols()), ix(part.rank()));
                Ae.middleRows(ix(son_row_offset(a, i)), ix(part.rows())) = part.A;
                Be.middleRows(ix(son_col_offset(b, k)), ix(part.cols())) = part.B;
                acc = rk_add_truncated(acc, RkBlock(std::move(Ae), std::move(Be)), ctl);
            }
        return acc;
    }
    DenseBlock D = DenseBlock::Zero(ix(A.rows()), ix(B.cols()));
    dense_product(D, A, B, 1.0);
    return compress_dense(D, ctl);
}

// ---------------------------------------------------------------------------
// Leaf kernels and their flop estimates
// ---------------------------------------------------------------------------

double cube(double x) { return x * x * x; }

double lu_flops(const HMatrix &A) { return 2.0 * cube(static_cast<double>(A.rows())) / 3.0; }

double trsm_flops(std::size_t m, const HMatrix &B, bool left) {
    const double mm = static_cast<double>(m);
    const double other = static_cast<double>(left ? B.cols() : B.rows());
    if (B.is_rk())
        return mm * mm * static_cast<double>(B.rk().rank());
    return mm * mm * other;
}

double gemm_flops(const HMatrix &C, const View &A, const View &B) {
    const double r = static_cast<double>(C.rows()), c = static_cast<double>(C.cols());
    const double inner = static_cast<double>(A.cols());
    const double k     = static_cast<double>(std::min({A.rank(), B.rank(), A.cols()}));
    double f           = (k < inner) ? 2.0 * (r * c * k + inner * k * (r + c)) : 2.0 * r * c * inner;
    if (C.is_rk()) {
        const double kk = static_cast<double>(C.rk().rank()) + k;
        f               = 2.0 * inner * k * (r + c) + 4.0 * (r + c) * kk * kk;
    }
    return f;
}

void add_flops(FlopCounter *counter, double f) {
    if (counter)
        counter->fetch_add(static_cast<std::uint64_t>(f), std::memory_order_relaxed);
}

void lu_leaf(HMatrix &A, const std::string &label) {
    try {
        lu(A.dense());
    } catch (const SingularPivotError &e) {
        throw SingularPivotError(label + " at " + block_path(A), e.index(), e.value());
    }
}

void trsm_lower_leaf(const HMatrix &L, HMatrix &B) {
    if (B.is_dense())
        lower_solve_left(L, B.dense());
    else if (B.rk().rank() > 0)
        lower_solve_left(L, B.rk().A);
}

void trsm_upper_leaf(const HMatrix &U, HMatrix &B) {
    if (B.is_dense()) {
        upper_solve_right(U, B.dense());
    } else if (B.rk().rank() > 0) {
        // A B^T U^{-1} = A (U^{-T} B)^T
        DenseBlock T = B.rk().B.transpose();
        upper_solve_right(U, T);
        B.rk().B = T.transpose();
    }
}

void gemm_leaf(HMatrix &C, const View &A, const View &B, const TruncationControl &ctl) {
    if (C.is_dense()) {
        dense_product(C.dense(), A, B, -1.0);
        return;
    }
    RkBlock P = rk_product(A, B, ctl);
    if (P.rank() == 0)
        return;
    C.rk() = rk_axpby_truncated(1.0, C.rk(), -1.0, P, ctl);
}

// ---------------------------------------------------------------------------
// Task emission
// ---------------------------------------------------------------------------

class Emitter {
  public:
    Emitter(TaskGraph &g, const Skeleton &sk, bool wd_er, TruncationControl ctl, std::shared_ptr<FlopCounter> flops)
        : g_(g), sk_(sk), parent_strength_(wd_er ? Strength::Weak : Strength::Strong), ctl_(ctl),
          flops_(std::move(flops)) {}

    void hlu_children(TaskId parent, const std::string &prefix, HMatrix &A) {
        std::size_t k       = 0;
        auto next           = [&] { return prefix + std::to_string(++k); };
        const std::size_t p = A.rsons();
        for (std::size_t i = 0; i < p; ++i) {
            hlu(parent, next(), A.son(i, i));
            for (std::size_t j = i + 1; j < p; ++j)
                trsm_lower(parent, next(), A.son(i, i), A.son(i, j));
            for (std::size_t j = i + 1; j < p; ++j)
                trsm_upper(parent, next(), A.son(i, i), A.son(j, i));
            for (std::size_t j = i + 1; j < p; ++j)
                for (std::size_t l = i + 1; l < p; ++l)
                    gemm(parent, next(), A.son(j, l), whole(A.son(j, i)), whole(A.son(i, l)));
        }
    }

    void hlu(TaskId parent, std::string label, HMatrix &A) {
        if (A.block().row != A.block().col)
            throw InputError("hlu: block " + block_path(A) + " is not on the diagonal");
        if (A.is_leaf()) {
            if (!A.is_dense())
                throw InputError("hlu: diagonal leaf " + block_path(A) + " is not dense");
            auto *flops = flops_.get();
            auto keep   = flops_;
            g_.add(parent, label, "lu", {sk_.region(A, AccessMode::ReadWrite)},
                   [&A, label, flops, keep] {
                       lu_leaf(A, label);
                       add_flops(flops, lu_flops(A));
                   },
                   lu_flops(A));
            return;
        }
        if (A.rsons() != A.csons())
            throw InputError("hlu: diagonal block " + block_path(A) + " has a non-square son grid");
        const TaskId id = g_.add(parent, label, "hlu", {sk_.region(A, AccessMode::ReadWrite, parent_strength_)});
        hlu_children(id, label + ".", A);
    }

    void trsm_lower(TaskId parent, std::string label, const HMatrix &L, HMatrix &B) {
        if (L.rows() != L.cols() || L.cols() != B.rows())
            throw InputError("htrsm_lower: shape mismatch at " + block_path(B));
        if (B.is_leaf()) {
            auto *flops = flops_.get();
            auto keep   = flops_;
            g_.add(parent, label, "trsm_l", {sk_.region(L, AccessMode::Read), sk_.region(B, AccessMode::ReadWrite)},
                   [&L, &B, flops, keep] {
                       trsm_lower_leaf(L, B);
                       add_flops(flops, trsm_flops(L.rows(), B, true));
                   },
                   trsm_flops(L.rows(), B, true));
            return;
        }
        if (L.is_leaf() || L.rsons() != B.rsons())
            throw std::logic_error("htrsm_lower: partitioned block " + block_path(B) +
                                   " does not match its diagonal factor");
        const TaskId id = g_.add(parent, label, "htrsm_l",
                                 {sk_.region(L, AccessMode::Read, parent_strength_),
                                  sk_.region(B, AccessMode::ReadWrite, parent_strength_)});
        std::size_t k = 0;
        auto next     = [&] { return label + "." + std::to_string(++k); };
        for (std::size_t i = 0; i < L.rsons(); ++i) {
            for (std::size_t j = 0; j < B.csons(); ++j)
                trsm_lower(id, next(), L.son(i, i), B.son(i, j));
            for (std::size_t r = i + 1; r < L.rsons(); ++r)
                for (std::size_t j = 0; j < B.csons(); ++j)
                    gemm(id, next(), B.son(r, j), whole(L.son(r, i)), whole(B.son(i, j)));
        }
    }

    void trsm_upper(TaskId parent, std::string label, const HMatrix &U, HMatrix &B) {
        if (U.rows() != U.cols() || U.rows() != B.cols())
            throw InputError("htrsm_upper_right: shape mismatch at " + block_path(B));
        if (B.is_leaf()) {
            auto *flops = flops_.get();
            auto keep   = flops_;
            g_.add(parent, label, "trsm_u", {sk_.region(U, AccessMode::Read), sk_.region(B, AccessMode::ReadWrite)},
                   [&U, &B, flops, keep] {
                       trsm_upper_leaf(U, B);
                       add_flops(flops, trsm_flops(U.rows(), B, false));
                   },
                   trsm_flops(U.rows(), B, false));
            return;
        }
        if (U.is_leaf() || U.csons() != B.csons())
            throw std::logic_error("htrsm_upper_right: partitioned block " + block_path(B) +
                                   " does not match its diagonal factor");
        const TaskId id = g_.add(parent, label, "htrsm_u",
                                 {sk_.region(U, AccessMode::Read, parent_strength_),
                                  sk_.region(B, AccessMode::ReadWrite, parent_strength_)});
        std::size_t k = 0;
        auto next     = [&] { return label + "." + std::to_string(++k); };
        for (std::size_t i = 0; i < U.csons(); ++i) {
            for (std::size_t j = 0; j < B.rsons(); ++j)
                trsm_upper(id, next(), U.son(i, i), B.son(j, i));
            for (std::size_t r = i + 1; r < U.csons(); ++r)
                for (std::size_t j = 0; j < B.rsons(); ++j)
                    gemm(id, next(), B.son(j, r), whole(B.son(j, i)), whole(U.son(i, r)));
        }
    }

    void gemm(TaskId parent, std::string label, HMatrix &C, View A, View B) {
        if (A.rows() != C.rows() || B.cols() != C.cols() || A.cols() != B.rows())
            throw InputError("hgemm_update: shape mismatch at " + block_path(C));
        if (C.is_leaf()) {
            auto *flops = flops_.get();
            auto keep   = flops_;
            const double cost = gemm_flops(C, A, B);
            g_.add(parent, label, "gemm",
                   {sk_.region(*A.node, AccessMode::Read), sk_.region(*B.node, AccessMode::Read),
                    sk_.region(C, AccessMode::ReadWrite)},
                   [&C, A, B, ctl = ctl_, flops, keep] {
                       const double f = gemm_flops(C, A, B);
                       gemm_leaf(C, A, B, ctl);
                       add_flops(flops, f);
                   },
                   cost);
            return;
        }
        const TaskId id = g_.add(parent, label, "hgemm",
                                 {sk_.region(*A.node, AccessMode::Read, parent_strength_),
                                  sk_.region(*B.node, AccessMode::Read, parent_strength_),
                                  sk_.region(C, AccessMode::ReadWrite, parent_strength_)});
        std::size_t n = 0;
        auto next     = [&] { return label + "." + std::to_string(++n); };
        for (std::size_t i = 0; i < C.rsons(); ++i) {
            for (std::size_t k = 0; k < C.csons(); ++k) {
                HMatrix &Cik          = C.son(i, k);
                const Cluster *rowc   = Cik.block().row;
                const Cluster *colc   = Cik.block().col;
                if (A.partitioned()) {
                    for (std::size_t j = 0; j < A.node->csons(); ++j) {
                        const Cluster *inner = A.node->son(0, j).block().col;
                        gemm(id, next(), Cik, restrict_view(A, rowc, inner), restrict_view(B, inner, colc));
                    }
                } else if (B.partitioned()) {
                    for (std::size_t j = 0; j < B.node->rsons(); ++j) {
                        const Cluster *inner = B.node->son(j, 0).block().row;
                        gemm(id, next(), Cik, restrict_view(A, rowc, inner), restrict_view(B, inner, colc));
                    }
                } else {
                    gemm(id, next(), Cik, restrict_view(A, rowc, A.col), restrict_view(B, B.row, colc));
                }
            }
        }
    }

  private:
    TaskGraph &g_;
    const Skeleton &sk_;
    Strength parent_strength_;
    TruncationControl ctl_;
    std::shared_ptr<FlopCounter> flops_;
};

bool wd_er_of(const ExecutionMode &mode) {
    if (const auto *p = std::get_if<TaskParallel>(&mode))
        return p->wd_er;
    return false;
}

void check_plan(const HLUPlan &plan) {
    Interval whole_range;
    try {
        whole_range = plan.skeleton.range(plan.root);
    } catch (const std::out_of_range &) {
        throw InputError("HLUPlan: skeleton was not built from this matrix");
    }
    if (whole_range != Interval{0, plan.skeleton.slot_count()})
        throw InputError("HLUPlan: skeleton was not built from this matrix");
    if (const auto *p = std::get_if<TaskParallel>(&plan.mode); p && p->workers < 1)
        throw InputError("HLUPlan: workers must be at least 1");
}

void check_in_plan(const HLUPlan &plan, const HMatrix &node) {
    try {
        (void)plan.skeleton.range(node);
    } catch (const std::out_of_range &) {
        throw InputError("operand is not a block of the planned matrix");
    }
}

TaskGraph build_hlu_graph(const HLUPlan &plan, std::shared_ptr<FlopCounter> flops) {
    check_plan(plan);
    HMatrix &A = plan.root;
    if (A.rows() != A.cols() || A.block().row != A.block().col)
        throw InputError("hlu: matrix is not square");
    TaskGraph g;
    Emitter e(g, plan.skeleton, wd_er_of(plan.mode), plan.truncation, std::move(flops));
    if (A.is_leaf())
        e.hlu(no_task, "O1", A);
    else
        e.hlu_children(no_task, "O", A);
    return g;
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

TaskGraph emit_task_graph(const HLUPlan &plan, std::shared_ptr<FlopCounter> flops) {
    TaskGraph g = build_hlu_graph(plan, std::move(flops));
    g.infer_all_edges();
    return g;
}

TaskGraph emit_trsm_lower_graph(const HMatrix &L, HMatrix &B, const HLUPlan &plan, std::shared_ptr<FlopCounter> flops) {
    check_plan(plan);
    check_in_plan(plan, L);
    check_in_plan(plan, B);
    TaskGraph g;
    Emitter(g, plan.skeleton, wd_er_of(plan.mode), plan.truncation, std::move(flops)).trsm_lower(no_task, "O1", L, B);
    g.infer_all_edges();
    return g;
}

TaskGraph emit_trsm_upper_graph(const HMatrix &U, HMatrix &B, const HLUPlan &plan, std::shared_ptr<FlopCounter> flops) {
    check_plan(plan);
    check_in_plan(plan, U);
    check_in_plan(plan, B);
    TaskGraph g;
    Emitter(g, plan.skeleton, wd_er_of(plan.mode), plan.truncation, std::move(flops)).trsm_upper(no_task, "O1", U, B);
    g.infer_all_edges();
    return g;
}

TaskGraph emit_gemm_graph(HMatrix &C, const HMatrix &A, const HMatrix &B, const HLUPlan &plan,
                          std::shared_ptr<FlopCounter> flops) {
    check_plan(plan);
    check_in_plan(plan, C);
    check_in_plan(plan, A);
    check_in_plan(plan, B);
    if (A.block().row != C.block().row || B.block().col != C.block().col || A.block().col != B.block().row)
        throw InputError("hgemm_update: operands do not share cluster partitions");
    TaskGraph g;
    Emitter(g, plan.skeleton, wd_er_of(plan.mode), plan.truncation, std::move(flops))
        .gemm(no_task, "O1", C, whole(A), whole(B));
    g.infer_all_edges();
    return g;
}

HLUReport execute(const TaskGraph &g, const ExecutionMode &mode, std::size_t slot_count) {
    HLUReport rep;
    rep.tasks     = g.size();
    const auto t0 = std::chrono::steady_clock::now();
    if (const auto *p = std::get_if<TaskParallel>(&mode)) {
        SchedulerConfig cfg;
        cfg.workers         = p->workers;
        cfg.wd_er           = p->wd_er;
        cfg.seed            = p->seed;
        cfg.check_exclusive = p->check_exclusive;
        rep.trace           = Runtime::run_graph(g, cfg, slot_count);
    } else {
        for (TaskId id : g.preorder()) {
            const TaskNode &t = g.task(id);
            if (t.children.empty() && t.kernel)
                t.kernel();
        }
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

HLUReport hlu_factorize(const HLUPlan &plan) {
    auto flops      = std::make_shared<FlopCounter>(0);
    TaskGraph g     = build_hlu_graph(plan, flops);
    HLUReport rep   = execute(g, plan.mode, plan.skeleton.slot_count());
    rep.flops       = static_cast<double>(flops->load());
    return rep;
}

void htrsm_lower(const HMatrix &L, HMatrix &B, const HLUPlan &plan) {
    execute(emit_trsm_lower_graph(L, B, plan), plan.mode, plan.skeleton.slot_count());
}

void htrsm_upper_right(const HMatrix &U, HMatrix &B, const HLUPlan &plan) {
    execute(emit_trsm_upper_graph(U, B, plan), plan.mode, plan.skeleton.slot_count());
}

void hgemm_update(HMatrix &C, const HMatrix &A, const HMatrix &B, const HLUPlan &plan) {
    execute(emit_gemm_graph(C, A, B, plan), plan.mode, plan.skeleton.slot_count());
}

// ---------------------------------------------------------------------------
// Applying and solving with the factors
// ---------------------------------------------------------------------------

namespace {

// y += U x, U the upper triangle (diagonal included) of a factorized diagonal block.
void upper_mul(const HMatrix &U, CMatRef x, MatRef y) {
    if (U.is_leaf()) {
        y.noalias() += U.dense().triangularView<Eigen::Upper>() * x;
        return;
    }
    for (std::size_t i = 0; i < U.rsons(); ++i) {
        auto yi = y.middleRows(ix(son_row_offset(U, i)), ix(U.son(i, 0).rows()));
        for (std::size_t j = i; j < U.csons(); ++j) {
            auto xj = x.middleRows(ix(son_col_offset(U, j)), ix(U.son(0, j).cols()));
            if (j == i)
                upper_mul(U.son(i, i), xj, yi);
            else
                h_addmul(yi, 1.0, U.son(i, j), xj);
        }
    }
}

// y += L x, L the unit lower triangle.
void lower_mul(const HMatrix &L, CMatRef x, MatRef y) {
    if (L.is_leaf()) {
        y.noalias() += L.dense().triangularView<Eigen::UnitLower>() * x;
        return;
    }
    for (std::size_t i = 0; i < L.rsons(); ++i) {
        auto yi = y.middleRows(ix(son_row_offset(L, i)), ix(L.son(i, 0).rows()));
        for (std::size_t j = 0; j <= i; ++j) {
            auto xj = x.middleRows(ix(son_col_offset(L, j)), ix(L.son(0, j).cols()));
            if (j == i)
                lower_mul(L.son(i, i), xj, yi);
            else
                h_addmul(yi, 1.0, L.son(i, j), xj);
        }
    }
}

} // namespace

Vector lu_matvec(const HMatrix &f, const Vector &x) {
    if (static_cast<std::size_t>(x.size()) != f.cols() || f.rows() != f.cols())
        throw InputError("lu_matvec: shape mismatch");
    Vector t = Vector::Zero(x.size()), y = Vector::Zero(x.size());
    Eigen::Map<const DenseBlock> xm(x.data(), x.size(), 1);
    Eigen::Map<DenseBlock> tm(t.data(), t.size(), 1), ym(y.data(), y.size(), 1);
    upper_mul(f, xm, tm);
    lower_mul(f, tm, ym);
    return y;
}

Vector lu_solve(const HMatrix &f, const Vector &b) {
    if (static_cast<std::size_t>(b.size()) != f.rows() || f.rows() != f.cols())
        throw InputError("lu_solve: shape mismatch");
    Vector y = b;
    Eigen::Map<DenseBlock> ym(y.data(), y.size(), 1);
    lower_solve_left(f, ym);
    upper_solve_left(f, ym);
    return y;
}

} // namespace hmx
