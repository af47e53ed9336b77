#include "locsyn/hinf_norm.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

namespace locsyn {

namespace {

using Cplx = std::complex<double>;

bool d_is_zero(const Mat& D) {
    return D.size() == 0 || D.cwiseAbs().maxCoeff() == 0.0;
}

double sigma_max_of(const Mat& M) {
    if (M.size() == 0) return 0.0;
    return M.jacobiSvd().singularValues()(0);
}

// Checked LU of (i omega I - A).
struct Resolvent {
    Eigen::PartialPivLU<CMat> lu;
    Resolvent(const Mat& A, double omega) {
        CMat shifted = (-A).cast<Cplx>();
        shifted.diagonal().array() += Cplx(0.0, omega);
        lu.compute(shifted);
        if (lu.rcond() < 1e-14)
            throw ResolventSingular(
                "iw is (numerically) an eigenvalue of the closed-loop matrix");
    }
    CMat solve(const CMat& rhs) const { return lu.solve(rhs); }
    CMat solve_adjoint(const CMat& rhs) const {
        return lu.adjoint().solve(rhs);
    }
};

SingularTriple zero_gain_triple(const ClosedLoop& cl, double omega) {
    SingularTriple t;
    t.sigma = 0.0;
    t.omega = omega;
    t.u = CVec::Zero(cl.nz());
    if (cl.nz() > 0) t.u(0) = 1.0;
    t.v = CVec::Zero(cl.nw());
    if (cl.nw() > 0) t.v(0) = 1.0;
    t.simple = true;
    return t;
}

}  // namespace

SigmaEvaluator::SigmaEvaluator(const ClosedLoop& cl) : cl_(cl) {
    const Eigen::Index n = cl.Acl.rows();
    const Eigen::Index nz = cl.Ccl.rows();
    const Eigen::Index nw = cl.Bcl.cols();
    factored_ = d_is_zero(cl.Dcl) && (nz > 4 * n || nw > 4 * n);
    if (!factored_ && !d_is_zero(cl.Dcl) && nz * nw > (1 << 22))
        throw Error(
            "sigma_max: performance channels too large for a dense SVD and "
            "D != 0 rules out the factored path");
    if (factored_) {
        Gamma_ = cl.Ccl.transpose() * cl.Ccl;
        Mat theta = cl.Bcl * cl.Bcl.transpose();
        // robust factor Theta = L L^T (Theta may be semidefinite)
        Eigen::LDLT<Mat> ldlt(theta);
        Mat L = Mat(ldlt.matrixL());
        Vec d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
        Ltheta_ = ldlt.transpositionsP().transpose() * Mat(L * d.asDiagonal());
    }
}

SingularTriple SigmaEvaluator::dense_at(double omega) const {
    const CMat G = transfer_value(cl_, omega);
    const Eigen::Index mn = std::min(G.rows(), G.cols());
    SingularTriple t;
    t.omega = omega;
    if (mn == 0) return zero_gain_triple(cl_, omega);
    Eigen::JacobiSVD<CMat> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    t.sigma = svd.singularValues()(0);
    t.u = svd.matrixU().col(0);
    t.v = svd.matrixV().col(0);
    const double s2 = mn >= 2 ? svd.singularValues()(1) : 0.0;
    t.simple = t.sigma == 0.0 || (t.sigma - s2) > 1e-8 * t.sigma;
    return t;
}

SingularTriple SigmaEvaluator::factored_at(double omega) const {
    if (std::isinf(omega)) return dense_at(omega);  // gain of D (= 0 here)
    const Resolvent res(cl_.Acl, omega);
    // Y = Phi^H Gamma Phi
    CMat Q = res.solve_adjoint(Gamma_.cast<Cplx>());
    CMat Y = res.solve_adjoint(Q.adjoint());
    CMat S = Ltheta_.transpose().cast<Cplx>() * (Y * Ltheta_.cast<Cplx>());
    S = 0.5 * (S + S.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> eig(S);
    if (eig.info() != Eigen::Success)
        throw EigensolverFailure("Hermitian eigen-decomposition failed");
    const Eigen::Index n = S.rows();
    const double lmax = eig.eigenvalues()(n - 1);
    if (lmax <= 0.0) return zero_gain_triple(cl_, omega);
    const double l2 = n >= 2 ? std::max(eig.eigenvalues()(n - 2), 0.0) : 0.0;

    const CVec p = eig.eigenvectors().col(n - 1);
    CVec q = Y * (Ltheta_.cast<Cplx>() * p);
    CVec v = cl_.Bcl.transpose().cast<Cplx>() * q;
    const double vn = v.norm();
    if (vn == 0.0) return zero_gain_triple(cl_, omega);
    v /= vn;
    CVec t_state = res.solve(cl_.Bcl.cast<Cplx>() * v);
    CVec u = cl_.Ccl.cast<Cplx>() * t_state;
    const double sigma = u.norm();
    if (sigma == 0.0) return zero_gain_triple(cl_, omega);
    u /= sigma;

    SingularTriple t;
    t.omega = omega;
    t.sigma = sigma;
    t.u = std::move(u);
    t.v = std::move(v);
    const double s2 = std::sqrt(l2);
    t.simple = (sigma - s2) > 1e-8 * sigma;
    return t;
}

SingularTriple SigmaEvaluator::at(double omega) const {
    return factored_ ? factored_at(omega) : dense_at(omega);
}

SingularTriple sigma_max_at(const ClosedLoop& cl, double omega) {
    return SigmaEvaluator(cl).at(omega);
}

Mat hamiltonian(const ClosedLoop& cl, double gamma) {
    const Eigen::Index n = cl.Acl.rows();
    const Eigen::Index nw = cl.Bcl.cols();
    const Eigen::Index nz = cl.Ccl.rows();
    const double sd = sigma_max_of(cl.Dcl);
    if (!(gamma > sd))
        throw LevelNotAdmissible("level gamma must exceed sigma_max(D)");
    Mat H(2 * n, 2 * n);
    if (d_is_zero(cl.Dcl)) {
        H.topLeftCorner(n, n) = cl.Acl;
        H.topRightCorner(n, n).noalias() =
            cl.Bcl * cl.Bcl.transpose() / gamma;
        H.bottomLeftCorner(n, n).noalias() =
            -cl.Ccl.transpose() * cl.Ccl / gamma;
        H.bottomRightCorner(n, n) = -cl.Acl.transpose();
        return H;
    }
    Mat R = cl.Dcl.transpose() * cl.Dcl;
    R.diagonal().array() -= gamma * gamma;
    Mat S = cl.Dcl * cl.Dcl.transpose();
    S.diagonal().array() -= gamma * gamma;
    Eigen::PartialPivLU<Mat> Rlu(R);
    Eigen::PartialPivLU<Mat> Slu(S);
    const Mat RinvDtC = Rlu.solve(cl.Dcl.transpose() * cl.Ccl);  // nw x n
    const Mat RinvBt = Rlu.solve(cl.Bcl.transpose());            // nw x n
    const Mat SinvC = Slu.solve(cl.Ccl);                         // nz x n
    H.topLeftCorner(n, n) = cl.Acl - cl.Bcl * RinvDtC;
    H.topRightCorner(n, n).noalias() = -gamma * cl.Bcl * RinvBt;
    H.bottomLeftCorner(n, n).noalias() = gamma * cl.Ccl.transpose() * SinvC;
    H.bottomRightCorner(n, n) =
        -cl.Acl.transpose() + cl.Ccl.transpose() * cl.Dcl * RinvBt;
    return H;
}

std::vector<double> hamiltonian_imaginary_frequencies(const Mat& H,
                                                      double gamma) {
    const CVec mu = eigenvalues_dense(H);
    const double thr = 1e-8 * H.norm();
    std::vector<double> freqs;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        if (std::abs(mu(i).real()) <= thr) freqs.push_back(std::abs(mu(i).imag()));
    std::sort(freqs.begin(), freqs.end());
    const double tol = 1e-10 * std::max(1.0, gamma);
    std::vector<double> out;
    for (double w : freqs)
        if (out.empty() || w - out.back() > tol) out.push_back(w);
    return out;
}

NormResult linf_norm_bbbs(const ClosedLoop& cl, double tol) {
    NormOptions opts;
    opts.tol = tol;
    return linf_norm_bbbs(cl, opts);
}

NormResult linf_norm_bbbs(const ClosedLoop& cl, const NormOptions& opts) {
    const Eigen::Index n = cl.Acl.rows();
    const CVec lam = eigenvalues_dense(cl.Acl);
    const double anorm = std::max(1.0, cl.Acl.norm());
    double min_re = std::numeric_limits<double>::infinity();
    double rho = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        min_re = std::min(min_re, std::abs(lam(i).real()));
        rho = std::max(rho, std::abs(lam(i)));
    }
    if (n > 0 && min_re <= 1e-12 * anorm)
        throw NormInfinite(
            "closed loop has an imaginary-axis eigenvalue; the L-infinity "
            "norm does not exist");
    if (rho == 0.0) rho = 1.0;

    const SigmaEvaluator eval(cl);

    // initial level: omega = 0, warm-start candidates, |Im| of the
    // rightmost eigenvalues, and a log grid over the spectral scale
    std::vector<double> cand;
    cand.push_back(0.0);
    for (double w : opts.extra_candidates)
        if (std::isfinite(w) && w >= 0.0) cand.push_back(w);
    {
        std::vector<int> order(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return lam(a).real() > lam(b).real();
        });
        const int take = static_cast<int>(std::min<Eigen::Index>(n, 10));
        for (int i = 0; i < take; ++i) {
            const double w = std::abs(lam(order[static_cast<size_t>(i)]).imag());
            if (w > 0.0) cand.push_back(w);
        }
    }
    if (opts.grid_points > 1) {
        const double lo = std::log(opts.grid_lo * rho);
        const double hi = std::log(opts.grid_hi * rho);
        for (int i = 0; i < opts.grid_points; ++i)
            cand.push_back(std::exp(lo + (hi - lo) * i / (opts.grid_points - 1)));
    }

    SingularTriple best;
    bool have = false;
    auto consider = [&](const SingularTriple& t) {
        if (!have || t.sigma > best.sigma ||
            (t.sigma == best.sigma && t.omega < best.omega)) {
            best = t;
            have = true;
        }
    };
    for (double w : cand) consider(eval.at(w));
    const double sd = sigma_max_of(cl.Dcl);
    if (sd > best.sigma)
        consider(eval.at(std::numeric_limits<double>::infinity()));

    NormResult res;
    if (best.sigma <= 0.0) {
        res.value = 0.0;
        res.peak = zero_gain_triple(cl, 0.0);
        res.certified = true;
        return res;
    }

    double second_peak = 0.0;
    for (int it = 1; it <= opts.max_level_iters; ++it) {
        res.iterations = it;
        const double gamma = best.sigma;
        res.levels.push_back(gamma);
        const double gamma_test = gamma * (1.0 + 2.0 * opts.tol);
        const Mat H = hamiltonian(cl, gamma_test);
        const std::vector<double> freqs =
            hamiltonian_imaginary_frequencies(H, gamma_test);
        if (freqs.empty()) {
            res.certified = true;
            break;
        }
        std::vector<double> probes;
        if (freqs.size() == 1) {
            probes.push_back(freqs[0]);
        } else {
            for (size_t i = 0; i + 1 < freqs.size(); ++i)
                probes.push_back(0.5 * (freqs[i] + freqs[i + 1]));
        }
        SingularTriple round_best;
        double round_second = 0.0;
        bool round_have = false;
        for (double w : probes) {
            const SingularTriple t = eval.at(w);
            if (!round_have || t.sigma > round_best.sigma ||
                (t.sigma == round_best.sigma && t.omega < round_best.omega)) {
                if (round_have) round_second = std::max(round_second, round_best.sigma);
                round_best = t;
                round_have = true;
            } else {
                round_second = std::max(round_second, t.sigma);
            }
        }
        if (!round_have || round_best.sigma <= gamma) break;  // stagnation
        best = round_best;
        second_peak = round_second;
    }

    // fresh peak data at the final frequency
    res.peak = eval.at(best.omega);
    res.value = res.peak.sigma;
    res.unique_peak =
        second_peak == 0.0 || (res.value - second_peak) >= 1e-8 * res.value;
    return res;
}

ControllerGradient linf_gradient(const PlantRealization& plant,
                                 const Controller& K,
                                 const SingularTriple& peak) {
    const ClosedLoop cl = assemble_closed_loop(plant, K);
    const int nx = plant.nx();
    const int nk = K.order();
    if (peak.u.size() != cl.nz() || peak.v.size() != cl.nw())
        throw DimensionError("singular triple does not match the closed loop");

    CVec r, s;
    if (std::isinf(peak.omega)) {
        r = CVec::Zero(nx + nk);
        s = CVec::Zero(nx + nk);
    } else {
        const Resolvent res(cl.Acl, peak.omega);
        r = res.solve(cl.Bcl.cast<Cplx>() * peak.v);
        s = res.solve_adjoint(cl.Ccl.transpose().cast<Cplx>() * peak.u);
    }

    const CVec r1 = r.head(nx), r2 = r.tail(nk);
    const CVec s1c = s.head(nx).conjugate(), s2c = s.tail(nk).conjugate();
    const CVec ubar = peak.u.conjugate();

    const CVec right_in = plant.C2.cast<Cplx>() * r1 +
                          plant.D21.cast<Cplx>() * peak.v;
    const CVec left_out = plant.B2.transpose().cast<Cplx>() * s1c +
                          plant.D12.transpose().cast<Cplx>() * ubar;

    ControllerGradient g(nk, plant.nu(), plant.ny());
    g.dAhat = (s2c * r2.transpose()).real();
    g.dBhat = (s2c * right_in.transpose()).real();
    g.dChat = (left_out * r2.transpose()).real();
    g.dDhat = (left_out * right_in.transpose()).real();
    return g;
}

}  // namespace locsyn
