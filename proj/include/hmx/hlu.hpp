#pragma once

#include "hmx/runtime.hpp"

#include <atomic>
#include <memory>
#include <optional>
#include <variant>

namespace hmx {

struct Sequential {};

struct TaskParallel {
    bool wd_er                = true;
    std::size_t workers       = 1;
    std::uint64_t seed        = 0;
    bool check_exclusive      = false;
};

using ExecutionMode = std::variant<Sequential, TaskParallel>;

struct HLUPlan {
    HMatrix &root;
    const Skeleton &skeleton;
    ExecutionMode mode = Sequential{};
    TruncationControl truncation{1e-6};
};

/// Flops counted by the leaf kernels as they run (analytic per-kernel estimates).
using FlopCounter = std::atomic<std::uint64_t>;

struct HLUReport {
    std::size_t tasks  = 0;
    double flops       = 0.0;
    double seconds     = 0.0;
    std::optional<ExecutionTrace> trace; // task-parallel runs only
};

/// In-place H-LU without pivoting. Afterwards every diagonal leaf holds a dense LU, the
/// blocks above the diagonal hold U and the blocks below hold L (unit diagonal implied).
HLUReport hlu_factorize(const HLUPlan &plan);

/// B := L^{-1} B with L the unit lower factor stored in a factorized diagonal block.
void htrsm_lower(const HMatrix &L, HMatrix &B, const HLUPlan &plan);
/// B := B U^{-1} with U the upper factor stored in a factorized diagonal block.
void htrsm_upper_right(const HMatrix &U, HMatrix &B, const HLUPlan &plan);
/// C := C - A B in H-arithmetic.
void hgemm_update(HMatrix &C, const HMatrix &A, const HMatrix &B, const HLUPlan &plan);

/// The nested task tree of the factorization with edges inferred at every level.
/// Recursion levels are parent tasks (weak operands when wd_er, strong otherwise);
/// leaf kernels carry strong operands over exactly the slots of their blocks.
TaskGraph emit_task_graph(const HLUPlan &plan, std::shared_ptr<FlopCounter> flops = nullptr);

/// Same task tree for the stand-alone solves and update.
TaskGraph emit_trsm_lower_graph(const HMatrix &L, HMatrix &B, const HLUPlan &plan,
                                std::shared_ptr<FlopCounter> flops = nullptr);
TaskGraph emit_trsm_upper_graph(const HMatrix &U, HMatrix &B, const HLUPlan &plan,
                                std::shared_ptr<FlopCounter> flops = nullptr);
TaskGraph emit_gemm_graph(HMatrix &C, const HMatrix &A, const HMatrix &B, const HLUPlan &plan,
                          std::shared_ptr<FlopCounter> flops = nullptr);

/// Runs a graph either leaf by leaf in pre-order or on the task runtime.
HLUReport execute(const TaskGraph &g, const ExecutionMode &mode, std::size_t slot_count);

/// y = L (U x) for a factorized H-matrix.
Vector lu_matvec(const HMatrix &lu, const Vector &x);
/// Solves L U y = b.
Vector lu_solve(const HMatrix &lu, const Vector &b);

} // namespace hmx
