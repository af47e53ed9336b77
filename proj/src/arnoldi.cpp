#include "locsyn/arnoldi.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

// LAPACK reordering of a real Schur factorization; used to move the
// selected Ritz cluster to the leading block at each Krylov-Schur restart.
extern "C" {
void dtrsen_(const char* job, const char* compq, const int* select,
             const int* n, double* t, const int* ldt, double* q,
             const int* ldq, double* wr, double* wi, int* m, double* s,
             double* sep, double* work, const int* lwork, int* iwork,
             const int* liwork, int* info);
}

namespace locsyn {

namespace {

bool rightmost_before(const std::complex<double>& a,
                      const std::complex<double>& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    const double ia = std::abs(a.imag()), ib = std::abs(b.imag());
    if (ia != ib) return ia > ib;
    return a.imag() > b.imag();
}

Vec random_unit_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        // uniform in [-1, 1); good enough for a start vector
        const std::uint64_t bits = rng();
        v(i) = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    }
    const double nv = v.norm();
    if (nv == 0.0) {
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / nv;
}

// Reorder the real Schur form (T, Q) so the `select`ed positions occupy the
// leading block; returns its dimension.
int reorder_schur(Mat& T, Mat& Q, const std::vector<int>& select) {
    const int n = static_cast<int>(T.rows());
    Vec wr(n), wi(n);
    int m_out = 0, info = 0;
    double s_cond = 0.0, sep = 0.0;
    const int lwork = std::max(1, n);
    std::vector<double> work(static_cast<size_t>(lwork));
    int iwork_dummy = 0;
    const int liwork = 1;
    const char job = 'N';
    const char compq = 'V';
    const int ldt = n, ldq = n;
    dtrsen_(&job, &compq, select.data(), &n, T.data(), &ldt, Q.data(), &ldq,
            wr.data(), wi.data(), &m_out, &s_cond, &sep, work.data(), &lwork,
            &iwork_dummy, &liwork, &info);
    if (info != 0)
        throw EigensolverFailure("dtrsen failed to reorder the Schur form");
    return m_out;
}

struct RitzCandidate {
    std::complex<double> lambda;
    CVec z;          // unit eigenvector of the compressed matrix
    double rest;     // residual estimate |b^T z|
};

}  // namespace

LinearOperator as_operator(const ClosedLoopOperator& op) {
    LinearOperator lin;
    lin.n = op.n();
    lin.apply = [&op](const Vec& v) { return op.apply(v); };
    lin.apply_transpose = [&op](const Vec& v) { return op.apply_transpose(v); };
    lin.to_dense = [&op]() { return op.to_dense(); };
    return lin;
}

RitzPair rightmost_ritz_pair(const LinearOperator& op,
                             const ArnoldiOptions& opts) {
    const Eigen::Index n = op.n;
    if (n < 1) throw DimensionError("operator dimension must be >= 1");
    if (n == 1) {
        Vec e = Vec::Zero(1);
        e(0) = 1.0;
        const double a = op.apply(e)(0);
        RitzPair out;
        out.lambda = a;
        out.x = CVec::Ones(1);
        out.residual = 0.0;
        out.gap = std::numeric_limits<double>::infinity();
        return out;
    }

    const int m = static_cast<int>(std::min<Eigen::Index>(
        n, opts.subspace > 0 ? opts.subspace
                             : std::max(40, 2 * opts.n_wanted + 10)));
    const int p_target = std::max(opts.n_wanted + 2, m / 2);

    // Krylov decomposition  A V_k = V_k S_k + u b_k^T  with u = V.col(k).
    Mat V(n, m + 1);
    Mat S = Mat::Zero(m, m);
    Vec b = Vec::Zero(m);
    int k = 0;

    Vec v0 = opts.v0 ? *opts.v0 : random_unit_vector(n, opts.seed);
    if (v0.size() != n) throw DimensionError("bad start vector length");
    if (!(v0.norm() > 0)) v0 = random_unit_vector(n, opts.seed + 1);
    V.col(0) = v0 / v0.norm();

    std::uint64_t breakdown_seed = opts.seed + 17;
    bool exhausted = false;  // k reached n: the decomposition is exact

    auto expand_to = [&](int target) {
        while (k < target && k < n) {
            const Vec& u = V.col(k);
            Vec w = op.apply(u);
            // two rounds of classical Gram-Schmidt
            Vec h = V.leftCols(k + 1).transpose() * w;
            w.noalias() -= V.leftCols(k + 1) * h;
            Vec h2 = V.leftCols(k + 1).transpose() * w;
            w.noalias() -= V.leftCols(k + 1) * h2;
            h += h2;
            double beta = w.norm();
            // grow S
            S.block(0, k, k, 1) = h.head(k);
            S.row(k).head(k) = b.head(k).transpose();
            S(k, k) = h(k);
            b.head(k).setZero();
            b(k) = beta;
            ++k;
            if (k >= n) {
                exhausted = true;
                b.head(k).setZero();  // invariant subspace is everything
                break;
            }
            if (beta < 1e-13 * std::max(1.0, S.topLeftCorner(k, k).norm())) {
                // invariant subspace hit: continue with a fresh direction
                Vec r = random_unit_vector(n, breakdown_seed++);
                Vec c = V.leftCols(k).transpose() * r;
                r.noalias() -= V.leftCols(k) * c;
                c = V.leftCols(k).transpose() * r;
                r.noalias() -= V.leftCols(k) * c;
                if (r.norm() < 1e-8) r = random_unit_vector(n, breakdown_seed++);
                V.col(k) = r / r.norm();
                b(k - 1) = 0.0;
            } else {
                V.col(k) = w / beta;
            }
        }
    };

    auto ritz_candidates = [&](std::vector<RitzCandidate>& out) {
        out.clear();
        const Mat Sk = S.topLeftCorner(k, k);
        Eigen::EigenSolver<Mat> es(Sk);
        if (es.info() != Eigen::Success)
            throw EigensolverFailure("restart eigen-decomposition failed");
        const CVec lam = es.eigenvalues();
        for (int i = 0; i < k; ++i) {
            RitzCandidate c;
            c.lambda = lam(i);
            c.z = es.eigenvectors().col(i);
            c.rest = std::abs(b.head(k).transpose().cast<std::complex<double>>() *
                              c.z);
            out.push_back(std::move(c));
        }
        std::sort(out.begin(), out.end(),
                  [](const RitzCandidate& a, const RitzCandidate& bb) {
                      return rightmost_before(a.lambda, bb.lambda);
                  });
    };

    std::vector<RitzCandidate> cands;
    for (int restart = 0; restart <= opts.max_restarts; ++restart) {
        expand_to(m);
        ritz_candidates(cands);
        const double snorm =
            std::max(S.topLeftCorner(k, k).norm(), 1e-300);
        const RitzCandidate& top = cands.front();
        const bool converged = top.rest <= opts.tol * snorm;
        if (converged || exhausted) {
            RitzPair out;
            out.lambda = top.lambda;
            CVec x = V.leftCols(k) * top.z;
            x /= x.norm();
            out.x = x;
            // true residual via the operator
            const Vec xr = x.real(), xi = x.imag();
            CVec Ax = op.apply(xr).cast<std::complex<double>>();
            Ax += std::complex<double>(0, 1) *
                  op.apply(xi).cast<std::complex<double>>();
            out.residual = (Ax - top.lambda * x).norm();
            out.gap = std::numeric_limits<double>::infinity();
            const double scale = std::max(1.0, std::abs(top.lambda));
            for (size_t i = 1; i < cands.size(); ++i) {
                const auto& li = cands[i].lambda;
                if (std::abs(top.lambda.imag()) > 1e-12 * scale &&
                    std::abs(li - std::conj(top.lambda)) <= 1e-10 * scale)
                    continue;  // conjugate partner
                out.gap = std::min(out.gap, std::abs(li - top.lambda));
            }
            out.restarts = restart;
            if (!converged && out.residual > opts.tol * snorm * 10)
                throw EigensolverFailure(
                    "Arnoldi stalled on an exhausted subspace");
            return out;
        }

        // Krylov-Schur compression: keep the p rightmost Ritz positions.
        Mat Sk = S.topLeftCorner(k, k);
        Eigen::RealSchur<Mat> schur(Sk);
        if (schur.info() != Eigen::Success)
            throw EigensolverFailure("real Schur factorization failed");
        Mat T = schur.matrixT();
        Mat Q = schur.matrixU();

        // eigenvalue per diagonal position
        std::vector<std::complex<double>> pos_eig(k);
        for (int i = 0; i < k;) {
            if (i + 1 < k && T(i + 1, i) != 0.0) {
                const double re = 0.5 * (T(i, i) + T(i + 1, i + 1));
                const double det =
                    T(i, i) * T(i + 1, i + 1) - T(i, i + 1) * T(i + 1, i);
                const double disc = re * re - det;
                const double im = disc < 0.0 ? std::sqrt(-disc) : 0.0;
                pos_eig[i] = {re, im};
                pos_eig[i + 1] = {re, -im};
                i += 2;
            } else {
                pos_eig[i] = {T(i, i), 0.0};
                i += 1;
            }
        }
        std::vector<int> order(k);
        for (int i = 0; i < k; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int bb) {
            return rightmost_before(pos_eig[a], pos_eig[bb]);
        });
        std::vector<int> select(k, 0);
        int taken = 0;
        const int p_want = std::min(p_target, k - 2);
        for (int idx : order) {
            if (taken >= p_want) break;
            if (select[idx]) continue;
            select[idx] = 1;
            ++taken;
            // keep 2x2 blocks whole
            if (idx + 1 < k && T(idx + 1, idx) != 0.0 && !select[idx + 1]) {
                select[idx + 1] = 1;
                ++taken;
            }
            if (idx > 0 && T(idx, idx - 1) != 0.0 && !select[idx - 1]) {
                select[idx - 1] = 1;
                ++taken;
            }
        }
        const int p = reorder_schur(T, Q, select);
        if (p < 1 || p >= k)
            throw EigensolverFailure("degenerate Krylov-Schur compression");

        Mat Vk = V.leftCols(k);
        Mat Vnew = Vk * Q.leftCols(p);
        Vec bnew = Q.leftCols(p).transpose() * b.head(k);
        V.leftCols(p) = Vnew;
        V.col(p) = V.col(k);  // residual direction carries over
        S.setZero();
        S.topLeftCorner(p, p) = T.topLeftCorner(p, p);
        b.setZero();
        b.head(p) = bnew;
        k = p;
    }
    throw EigensolverFailure(
        "Arnoldi did not converge within the restart budget");
}

double rightmost_eigenvalue_iterative(const LinearOperator& op,
                                      const ArnoldiOptions& opts) {
    return rightmost_ritz_pair(op, opts).lambda.real();
}

namespace {

std::pair<double, EigenTriple> triple_from_runs(const LinearOperator& op,
                                                const ArnoldiOptions& opts) {
    RitzPair right = rightmost_ritz_pair(op, opts);

    LinearOperator opT;
    opT.n = op.n;
    opT.apply = op.apply_transpose;
    opT.apply_transpose = op.apply;
    ArnoldiOptions opts_t = opts;
    opts_t.v0 = opts.v0_transpose;
    opts_t.seed = opts.seed + 101;
    RitzPair left = rightmost_ritz_pair(opT, opts_t);

    const double scale = std::max(1.0, std::abs(right.lambda));
    const double mismatch =
        std::min(std::abs(left.lambda - right.lambda),
                 std::abs(left.lambda - std::conj(right.lambda)));
    if (mismatch > 1e-6 * scale)
        throw EigensolverFailure(
            "transpose Arnoldi run found a different rightmost eigenvalue");

    // A^T conj(y) = lambda conj(y): pick the transpose eigenvector matching
    // lambda (conjugating if the run returned the partner).
    CVec ybar = (std::abs(left.lambda - right.lambda) <=
                 std::abs(left.lambda - std::conj(right.lambda)))
                    ? left.x
                    : left.x.conjugate().eval();
    EigenTriple t;
    t.lambda = right.lambda;
    t.x = right.x;  // already unit norm
    CVec y = ybar.conjugate();
    const std::complex<double> s = y.dot(t.x);
    if (std::abs(s) > 1e-12) {
        t.y = y / std::conj(s);
        t.simple = true;
    } else {
        t.y = y;  // defective pairing; flagged for the caller
        t.simple = false;
    }
    if (right.gap <= 1e-8 * scale) t.simple = false;
    return {t.lambda.real(), t};
}

}  // namespace

std::pair<double, EigenTriple> rightmost_eigentriple_iterative(
    const LinearOperator& op, const ArnoldiOptions& opts) {
    try {
        return triple_from_runs(op, opts);
    } catch (const EigensolverFailure&) {
        // one retry with a doubled subspace
        try {
            ArnoldiOptions big = opts;
            const int m0 = opts.subspace > 0
                               ? opts.subspace
                               : std::max(40, 2 * opts.n_wanted + 10);
            big.subspace = static_cast<int>(
                std::min<Eigen::Index>(op.n, 2 * m0));
            return triple_from_runs(op, big);
        } catch (const EigensolverFailure&) {
            if (op.to_dense && op.n <= opts.dense_fallback_threshold)
                return spectral_abscissa_dense(op.to_dense());
            throw;
        }
    }
}

std::pair<double, EigenTriple> rightmost_eigentriple_iterative(
    const ClosedLoopOperator& op, const ArnoldiOptions& opts) {
    return rightmost_eigentriple_iterative(as_operator(op), opts);
}

}  // namespace locsyn
