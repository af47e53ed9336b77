#include "locsyn/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace locsyn {

namespace {

// Re descending, then |Im| descending, then Im >= 0 first.
bool rightmost_before(const std::complex<double>& a,
                      const std::complex<double>& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    const double ia = std::abs(a.imag()), ib = std::abs(b.imag());
    if (ia != ib) return ia > ib;
    return a.imag() > b.imag();
}

}  // namespace

CVec eigenvalues_dense(const Mat& M) {
    Eigen::EigenSolver<Mat> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success)
        throw EigensolverFailure("dense eigenvalue iteration did not converge");
    return es.eigenvalues();
}

std::pair<double, EigenTriple> spectral_abscissa_dense(const Mat& M) {
    const int n = static_cast<int>(M.rows());
    if (n < 1 || M.cols() != n)
        throw DimensionError("spectral abscissa needs a square matrix, n >= 1");
    Eigen::EigenSolver<Mat> es(M);
    if (es.info() != Eigen::Success)
        throw EigensolverFailure("dense eigenvalue iteration did not converge");
    const CVec lam = es.eigenvalues();
    const CMat V = es.eigenvectors();

    int best = 0;
    for (int i = 1; i < n; ++i)
        if (rightmost_before(lam(i), lam(best))) best = i;

    EigenTriple t;
    t.lambda = lam(best);
    t.x = V.col(best);

    // Row `best` of V^{-1} is a left eigenvector with y^H x = 1 built in:
    // solve V^T r = e_best, then y = conj(r).
    CVec e = CVec::Zero(n);
    e(best) = 1.0;
    Eigen::PartialPivLU<CMat> lu(V.transpose());
    CVec r = lu.solve(e);
    t.y = r.conjugate();

    // Rescale so ||x|| = 1 while preserving y^H x = 1.
    const double xn = t.x.norm();
    t.x /= xn;
    t.y *= xn;

    const double scale = std::max(1.0, M.norm());
    // Simplicity: eigenvalue gap and a usable left vector.
    double gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        if (i != best) gap = std::min(gap, std::abs(lam(i) - t.lambda));
    const std::complex<double> yhx = t.y.dot(t.x);  // dot conjugates lhs
    t.simple = t.x.allFinite() && t.y.allFinite() &&
               std::abs(yhx - 1.0) < 1e-6 && gap > 1e-8 * scale &&
               t.y.norm() < 1e12;
    return {t.lambda.real(), t};
}

ControllerGradient abscissa_gradient(const PlantRealization& plant,
                                     const Controller& K,
                                     const EigenTriple& triple) {
    const int nx = plant.nx();
    const int nk = K.order();
    if (triple.x.size() != nx + nk || triple.y.size() != nx + nk)
        throw DimensionError("eigentriple length does not match closed loop");
    const CVec x1 = triple.x.head(nx);
    const CVec x2 = triple.x.tail(nk);
    const CVec y1c = triple.y.head(nx).conjugate();
    const CVec y2c = triple.y.tail(nk).conjugate();

    const CVec c2x1 = plant.C2.cast<std::complex<double>>() * x1;
    const CVec b2ty1 = plant.B2.transpose().cast<std::complex<double>>() * y1c;

    ControllerGradient g(nk, plant.nu(), plant.ny());
    g.dAhat = (y2c * x2.transpose()).real();
    g.dBhat = (y2c * c2x1.transpose()).real();
    g.dChat = (b2ty1 * x2.transpose()).real();
    g.dDhat = (b2ty1 * c2x1.transpose()).real();
    return g;
}

}  // namespace locsyn
