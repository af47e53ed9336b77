#pragma once

#include <cstdint>
#include <functional>
#include <optional>

#include "locsyn/plant.hpp"
#include "locsyn/spectral.hpp"

namespace locsyn {

// Matrix-free view of a square real operator. `to_dense` is optional and
// only used for the small-n dense fallback.
struct LinearOperator {
    Eigen::Index n = 0;
    std::function<Vec(const Vec&)> apply;
    std::function<Vec(const Vec&)> apply_transpose;
    std::function<Mat()> to_dense;
};

LinearOperator as_operator(const ClosedLoopOperator& op);

struct ArnoldiOptions {
    int n_wanted = 6;      // Ritz values kept at restarts
    int subspace = 0;      // 0 -> min(n, max(40, 2*n_wanted + 10))
    double tol = 1e-10;    // residual tolerance relative to ||S||_F
    int max_restarts = 300;
    int dense_fallback_threshold = 600;
    std::optional<Vec> v0;             // warm-start vector (right run)
    std::optional<Vec> v0_transpose;   // warm-start vector (transpose run)
    std::uint64_t seed = 0x6c6f6373u;  // start-vector RNG when v0 absent
};

// One restarted-Arnoldi run (Krylov-Schur restarting, exact-shift
// selection by largest real part). Returns the rightmost Ritz pair with
// its true residual ||A x - lambda x||_2, plus the gap to the next
// distinct Ritz value (conjugate partner excluded).
struct RitzPair {
    std::complex<double> lambda;
    CVec x;
    double residual = 0.0;
    double gap = 0.0;
    int restarts = 0;
};

RitzPair rightmost_ritz_pair(const LinearOperator& op,
                             const ArnoldiOptions& opts);

// Rightmost eigenvalue only (single Arnoldi run, no left eigenvector, no
// dense fallback inside); cheaper when no gradient is needed.
double rightmost_eigenvalue_iterative(const LinearOperator& op,
                                      const ArnoldiOptions& opts);

// Full eigentriple: a second Arnoldi run on the transpose operator supplies
// the left eigenvector. The transpose run's eigenvalue must match the first
// within 1e-6 (relative); a mismatch triggers one retry with a doubled
// subspace, then failure. On Arnoldi failure the dense path is used when
// n <= dense_fallback_threshold.
std::pair<double, EigenTriple> rightmost_eigentriple_iterative(
    const LinearOperator& op, const ArnoldiOptions& opts = {});

std::pair<double, EigenTriple> rightmost_eigentriple_iterative(
    const ClosedLoopOperator& op, const ArnoldiOptions& opts = {});

}  // namespace locsyn
