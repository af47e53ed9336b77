#include "locsyn/nsbfgs.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>

#include "locsyn/errors.hpp"

namespace locsyn::nsbfgs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double violation(const Vec& c) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) v += std::max(c(i), 0.0);
    return v;
}

double predicted_violation(const Vec& c, const Mat& J, const Vec& d) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        v += std::max(c(i) + J.row(i).dot(d), 0.0);
    return v;
}

Vec penalty_gradient(const OraclePoint& p, double mu) {
    Vec g = mu * p.g;
    for (Eigen::Index i = 0; i < p.c.size(); ++i)
        if (p.c(i) > 0.0) g += p.J.row(i).transpose();
    return g;
}

double penalty_value(const OraclePoint& p, double mu) {
    return mu * p.f + violation(p.c);
}

}  // namespace

const char* to_string(Status s) {
    switch (s) {
        case Status::StationaritySatisfied: return "StationaritySatisfied";
        case Status::MaxIterations: return "MaxIterations";
        case Status::LineSearchFailure: return "LineSearchFailure";
        case Status::InfeasibleIterate: return "InfeasibleIterate";
        case Status::FeasibleFound: return "FeasibleFound";
    }
    return "Unknown";
}

WolfeResult weak_wolfe_linesearch(const ScalarOracle& phi, double t0,
                                  double f0, double dphi0,
                                  const Options& opts) {
    if (!(dphi0 < 0.0))
        throw Error("weak Wolfe line search needs a descent direction");
    if (!(t0 > 0.0)) throw Error("weak Wolfe line search needs t0 > 0");

    double alpha = 0.0;
    double beta = kInf;
    double t = t0;
    ScalarEval alpha_eval{f0, dphi0};
    WolfeResult out;
    for (int i = 0; i < opts.ls_budget; ++i) {
        const ScalarEval e = phi(t);
        ++out.evals;
        const bool armijo =
            std::isfinite(e.value) && e.value <= f0 + opts.c1 * t * dphi0;
        if (!armijo) {
            beta = t;
        } else if (std::isnan(e.deriv) || e.deriv < opts.c2 * dphi0) {
            alpha = t;
            alpha_eval = e;
        } else {
            out.success = true;
            out.t = t;
            out.at = e;
            return out;
        }
        t = std::isfinite(beta) ? 0.5 * (alpha + beta) : 2.0 * t;
        if (std::isfinite(beta) && beta - alpha <= 1e-300) break;
    }
    out.success = false;
    out.t = alpha;
    out.at = alpha_eval;
    return out;
}

bool bfgs_update(Mat& Hinv, const Vec& s, const Vec& y, double skip_tol) {
    const double sy = s.dot(y);
    if (!(sy > skip_tol * s.norm() * y.norm())) return false;
    const double rho = 1.0 / sy;
    const Vec Hy = Hinv * y;
    const double yHy = y.dot(Hy);
    // (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded
    Hinv.noalias() -= rho * (Hy * s.transpose() + s * Hy.transpose());
    Hinv.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
    return true;
}

double min_norm_in_hull(const Mat& P) {
    const Eigen::Index m = P.cols();
    if (m == 0) throw Error("min_norm_in_hull: empty point set");
    const Eigen::Index d = P.rows();

    // Wolfe's minimum-norm-point algorithm over the corral S.
    std::vector<Eigen::Index> S;
    Vec w;  // weights over S
    {
        Eigen::Index i0 = 0;
        double best = P.col(0).squaredNorm();
        for (Eigen::Index j = 1; j < m; ++j) {
            const double nj = P.col(j).squaredNorm();
            if (nj < best) {
                best = nj;
                i0 = j;
            }
        }
        S = {i0};
        w = Vec::Ones(1);
    }
    Vec x = P.col(S[0]);
    double scale = 1.0;
    for (Eigen::Index j = 0; j < m; ++j)
        scale = std::max(scale, P.col(j).squaredNorm());
    const double tol = 1e-12 * scale;

    const int max_major = static_cast<int>(8 * m + 32);
    for (int major = 0; major < max_major; ++major) {
        // most violating vertex
        Eigen::Index jbest = 0;
        double vbest = kInf;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double v = x.dot(P.col(j));
            if (v < vbest) {
                vbest = v;
                jbest = j;
            }
        }
        if (vbest >= x.squaredNorm() - tol) return x.norm();
        if (std::find(S.begin(), S.end(), jbest) != S.end()) return x.norm();
        S.push_back(jbest);
        Vec w2(S.size());
        w2.head(w.size()) = w;
        w2(w.size()) = 0.0;
        w = w2;

        // minor loop: affine minimizer over S, pruning negative weights
        for (int minor = 0; minor < 2 * static_cast<int>(m) + 8; ++minor) {
            const Eigen::Index k = static_cast<Eigen::Index>(S.size());
            Mat Ps(d, k);
            for (Eigen::Index i = 0; i < k; ++i) Ps.col(i) = P.col(S[i]);
            Mat KKT = Mat::Zero(k + 1, k + 1);
            KKT.topLeftCorner(k, k) = Ps.transpose() * Ps;
            KKT.topLeftCorner(k, k).diagonal().array() += 1e-14 * scale;
            KKT.topRightCorner(k, 1).setOnes();
            KKT.bottomLeftCorner(1, k).setOnes();
            Vec rhs = Vec::Zero(k + 1);
            rhs(k) = 1.0;
            Vec sol = KKT.fullPivLu().solve(rhs);
            Vec a = sol.head(k);
            if ((a.array() > 1e-12).all()) {
                w = a;
                x = Ps * w;
                break;
            }
            // step from w toward a until a weight hits zero
            double theta = 1.0;
            for (Eigen::Index i = 0; i < k; ++i)
                if (a(i) <= 1e-12 && w(i) - a(i) > 0.0)
                    theta = std::min(theta, w(i) / (w(i) - a(i)));
            theta = std::max(0.0, std::min(1.0, theta));
            w = (1.0 - theta) * w + theta * a;
            std::vector<Eigen::Index> S2;
            std::vector<double> w2v;
            for (Eigen::Index i = 0; i < k; ++i)
                if (w(i) > 1e-12) {
                    S2.push_back(S[i]);
                    w2v.push_back(w(i));
                }
            if (S2.empty()) {
                S2.push_back(S[0]);
                w2v.push_back(1.0);
            }
            S = std::move(S2);
            w = Eigen::Map<Vec>(w2v.data(), static_cast<Eigen::Index>(w2v.size()));
            const double tot = w.sum();
            if (tot > 0) w /= tot;
            Mat Ps2(d, static_cast<Eigen::Index>(S.size()));
            for (size_t i = 0; i < S.size(); ++i)
                Ps2.col(static_cast<Eigen::Index>(i)) = P.col(S[i]);
            x = Ps2 * w;
        }
    }
    return x.norm();
}

double stationarity_measure(const std::deque<OraclePoint>& history, double mu,
                            double active_tol) {
    std::vector<Vec> verts;
    for (const auto& p : history) {
        if (p.g.size() == 0 || !std::isfinite(p.f)) continue;
        const Vec base = mu * p.g;
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < p.c.size(); ++i)
            if (p.c(i) >= -active_tol) active.push_back(i);
        const size_t subsets = size_t{1} << active.size();
        for (size_t mask = 0; mask < subsets; ++mask) {
            Vec v = base;
            for (size_t b = 0; b < active.size(); ++b)
                if (mask & (size_t{1} << b))
                    v += p.J.row(active[b]).transpose();
            verts.push_back(std::move(v));
        }
    }
    if (verts.empty()) return kInf;
    Mat P(verts[0].size(), static_cast<Eigen::Index>(verts.size()));
    for (size_t i = 0; i < verts.size(); ++i)
        P.col(static_cast<Eigen::Index>(i)) = verts[i];
    return min_norm_in_hull(P);
}

namespace {

struct EngineOracle {
    const Oracle& oracle;
    int evals = 0;
    OraclePoint operator()(const Vec& x) {
        ++evals;
        OraclePoint p = oracle(x);
        p.x = x;
        return p;
    }
};

// One weak-Wolfe search along d for a merit function defined by `value`
// and `slope` applied to oracle points. Returns the accepted point.
struct SearchResult {
    bool success = false;
    double t = 0.0;
    OraclePoint point;
    bool have_point = false;
};

template <class ValueFn, class SlopeFn>
SearchResult line_search(EngineOracle& ev, const OraclePoint& cur,
                         const Vec& d, double f0, double dphi0,
                         const Options& opts, const ValueFn& value,
                         const SlopeFn& slope) {
    std::map<double, OraclePoint> seen;
    auto phi = [&](double t) {
        OraclePoint p = ev(cur.x + t * d);
        ScalarEval e;
        e.value = value(p);
        e.deriv = (std::isfinite(e.value) && p.g.size() > 0)
                      ? slope(p)
                      : std::numeric_limits<double>::quiet_NaN();
        seen.emplace(t, std::move(p));
        return e;
    };
    const WolfeResult wr = weak_wolfe_linesearch(phi, 1.0, f0, dphi0, opts);
    SearchResult out;
    out.success = wr.success;
    out.t = wr.t;
    auto it = seen.find(wr.t);
    if (it != seen.end()) {
        out.point = std::move(it->second);
        out.have_point = true;
    }
    return out;
}

}  // namespace

SolveOutcome minimize_unconstrained(const Oracle& oracle, const Vec& x0,
                                    const Options& opts) {
    EngineOracle ev{oracle};
    OraclePoint cur = ev(x0);
    if (!std::isfinite(cur.f))
        throw Error("minimize_unconstrained: f(x0) must be finite");

    SolveOutcome out;
    out.x = cur.x;
    out.f = cur.f;

    std::deque<OraclePoint> history;
    auto push_history = [&](const OraclePoint& p) {
        history.push_back(p);
        while (static_cast<int>(history.size()) > opts.history)
            history.pop_front();
    };
    push_history(cur);

    if (opts.stop_predicate && opts.stop_predicate(cur.x, cur.f)) {
        out.status = Status::FeasibleFound;
        out.final_point = cur;
        out.fevals = ev.evals;
        return out;
    }

    const Eigen::Index nv = x0.size();
    const double g0n = cur.g.size() ? cur.g.norm() : 0.0;
    if (g0n <= opts.stat_tol) {
        out.status = Status::StationaritySatisfied;
        out.stationarity = g0n;
        out.final_point = cur;
        out.fevals = ev.evals;
        return out;
    }
    Mat Hinv = Mat::Identity(nv, nv) / std::max(g0n, 1e-300);

    for (int iter = 1; iter <= opts.maxit; ++iter) {
        Vec d = -(Hinv * cur.g);
        double dphi0 = cur.g.dot(d);
        if (!(dphi0 < 0.0)) {
            Hinv = Mat::Identity(nv, nv) / std::max(cur.g.norm(), 1e-300);
            d = -(Hinv * cur.g);
            dphi0 = cur.g.dot(d);
            if (!(dphi0 < 0.0)) {
                out.status = Status::StationaritySatisfied;
                out.stationarity = cur.g.norm();
                break;
            }
        }
        const auto sr = line_search(
            ev, cur, d, cur.f, dphi0, opts,
            [](const OraclePoint& p) { return p.f; },
            [&](const OraclePoint& p) { return p.g.dot(d); });
        if (!sr.success) {
            if (sr.have_point && sr.point.f < cur.f) {
                cur = sr.point;
                out.x = cur.x;
                out.f = cur.f;
            }
            out.status = Status::LineSearchFailure;
            break;
        }
        const Vec s = sr.t * d;
        const Vec y = sr.point.g - cur.g;
        if (!bfgs_update(Hinv, s, y, opts.curvature_skip_tol))
            ++out.bfgs_skips;
        if (opts.on_hinv) opts.on_hinv(Hinv);
        cur = sr.point;
        push_history(cur);
        out.x = cur.x;
        out.f = cur.f;
        out.iterations = iter;
        if (opts.on_accept) opts.on_accept(cur, iter);
        if (opts.stop_predicate && opts.stop_predicate(cur.x, cur.f)) {
            out.status = Status::FeasibleFound;
            break;
        }
        out.stationarity = stationarity_measure(history, 1.0, opts.active_tol);
        if (out.stationarity <= opts.stat_tol) {
            out.status = Status::StationaritySatisfied;
            break;
        }
        if (iter == opts.maxit) out.status = Status::MaxIterations;
    }
    out.final_point = cur;
    out.fevals = ev.evals;
    return out;
}

SolveOutcome minimize_constrained(const Oracle& oracle, const Vec& x0,
                                  const Options& opts) {
    EngineOracle ev{oracle};
    OraclePoint cur = ev(x0);
    if (!std::isfinite(cur.f))
        throw Error("minimize_constrained: f(x0) must be finite");
    if (cur.c.size() == 0)
        throw Error("minimize_constrained: oracle returned no constraints");
    if ((cur.c.array() >= 0.0).any())
        throw Error("minimize_constrained: x0 must be strictly feasible");

    SolveOutcome out;
    out.x = cur.x;
    out.f = cur.f;
    out.best_feasible = {cur.x, cur.f};

    std::deque<OraclePoint> history;
    auto push_history = [&](const OraclePoint& p) {
        history.push_back(p);
        while (static_cast<int>(history.size()) > opts.history)
            history.pop_front();
    };
    push_history(cur);

    double mu = opts.mu0;
    const Eigen::Index nv = x0.size();
    Vec pg = penalty_gradient(cur, mu);
    Mat Hinv = Mat::Identity(nv, nv) / std::max(pg.norm(), 1e-300);

    for (int iter = 1; iter <= opts.maxit; ++iter) {
        out.iterations = iter;
        pg = penalty_gradient(cur, mu);
        Vec d = -(Hinv * pg);
        // steering: insist the direction makes a healthy fraction of the
        // pure-feasibility direction's predicted violation reduction
        {
            Vec vgrad = Vec::Zero(nv);
            for (Eigen::Index i = 0; i < cur.c.size(); ++i)
                if (cur.c(i) > 0.0) vgrad += cur.J.row(i).transpose();
            const double v0 = violation(cur.c);
            const Vec dfeas = -(Hinv * vgrad);
            const double red_feas = v0 - predicted_violation(cur.c, cur.J, dfeas);
            while (mu > opts.mu_floor) {
                const double red_cur = v0 - predicted_violation(cur.c, cur.J, d);
                if (red_cur >= opts.steering_ratio * red_feas) break;
                mu = std::max(mu * opts.mu_factor, opts.mu_floor);
                pg = penalty_gradient(cur, mu);
                d = -(Hinv * pg);
            }
        }
        double dphi0 = pg.dot(d);
        if (!(dphi0 < 0.0)) {
            Hinv = Mat::Identity(nv, nv) / std::max(pg.norm(), 1e-300);
            d = -(Hinv * pg);
            dphi0 = pg.dot(d);
            if (!(dphi0 < 0.0)) {
                out.status = Status::StationaritySatisfied;
                out.stationarity = pg.norm();
                break;
            }
        }
        const double phi0 = penalty_value(cur, mu);
        const double mu_now = mu;
        const auto sr = line_search(
            ev, cur, d, phi0, dphi0, opts,
            [mu_now](const OraclePoint& p) { return penalty_value(p, mu_now); },
            [&, mu_now](const OraclePoint& p) {
                return penalty_gradient(p, mu_now).dot(d);
            });
        if (!sr.success) {
            if (sr.have_point &&
                penalty_value(sr.point, mu_now) < phi0 &&
                violation(sr.point.c) == 0.0) {
                cur = sr.point;
                out.x = cur.x;
                out.f = cur.f;
            }
            out.status = Status::LineSearchFailure;
            break;
        }
        if (violation(sr.point.c) > 0.0) {
            if (mu > opts.mu_floor) {
                // boundary crossed at a healthy mu: damp and retry from the
                // same iterate rather than accepting a deep cut
                mu = std::max(mu * opts.mu_factor, opts.mu_floor);
                continue;
            }
            out.x = sr.point.x;
            out.f = sr.point.f;
            out.status = Status::InfeasibleIterate;
            out.final_point = sr.point;
            if (opts.on_accept) opts.on_accept(sr.point, iter);
            out.fevals = ev.evals;
            return out;
        }
        const Vec s = sr.t * d;
        const Vec y = penalty_gradient(sr.point, mu_now) - pg;
        if (!bfgs_update(Hinv, s, y, opts.curvature_skip_tol))
            ++out.bfgs_skips;
        if (opts.on_hinv) opts.on_hinv(Hinv);
        cur = sr.point;
        push_history(cur);
        out.x = cur.x;
        out.f = cur.f;
        if (cur.f < out.best_feasible->second)
            out.best_feasible = {cur.x, cur.f};
        if (opts.on_accept) opts.on_accept(cur, iter);
        if (opts.stop_predicate && opts.stop_predicate(cur.x, cur.f)) {
            out.status = Status::FeasibleFound;
            break;
        }
        out.stationarity = stationarity_measure(history, mu, opts.active_tol);
        if (out.stationarity <= opts.stat_tol) {
            out.status = Status::StationaritySatisfied;
            break;
        }
        if (iter == opts.maxit) out.status = Status::MaxIterations;
    }
    out.final_point = cur;
    out.fevals = ev.evals;
    return out;
}

}  // namespace locsyn::nsbfgs
