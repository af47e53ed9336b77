#pragma once

#include <deque>
#include <functional>
#include <limits>
#include <optional>

#include "locsyn/plant.hpp"

namespace locsyn::nsbfgs {

// One oracle evaluation. f may be +inf (e.g. a destabilized closed loop);
// g is then empty. c holds inequality-constraint values (feasible c < 0)
// and J their gradients, one row per constraint; both are empty in
// unconstrained use. `extras` is carried through untouched for callers
// that want per-iterate bookkeeping.
struct OraclePoint {
    Vec x;
    double f = std::numeric_limits<double>::infinity();
    Vec g;
    Vec c;
    Mat J;
    std::vector<double> extras;
};

using Oracle = std::function<OraclePoint(const Vec&)>;

enum class Status {
    StationaritySatisfied,
    MaxIterations,
    LineSearchFailure,
    InfeasibleIterate,
    FeasibleFound,
};

const char* to_string(Status s);

struct Options {
    int maxit = 1000;
    double stat_tol = 1e-8;
    int history = 10;  // points kept for the stationarity certificate
    double c1 = 1e-4;  // Armijo
    double c2 = 0.5;   // weak Wolfe curvature
    int ls_budget = 60;
    double curvature_skip_tol = 1e-10;
    // constrained mode
    double mu0 = 1.0;
    double mu_factor = 0.5;
    double mu_floor = 1e-10;
    double steering_ratio = 0.1;
    double active_tol = 1e-6;
    // stop as soon as an accepted iterate satisfies this (e.g. feasibility)
    std::function<bool(const Vec&, double)> stop_predicate;
    // fired on every accepted iterate
    std::function<void(const OraclePoint&, int iter)> on_accept;
    // test hook: inverse-Hessian approximation after each update
    std::function<void(const Mat&)> on_hinv;
};

struct SolveOutcome {
    Vec x;
    double f = std::numeric_limits<double>::infinity();
    Status status = Status::MaxIterations;
    double stationarity = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int fevals = 0;
    int bfgs_skips = 0;
    std::optional<std::pair<Vec, double>> best_feasible;
    OraclePoint final_point;
};

// ---- weak Wolfe line search ------------------------------------------

struct ScalarEval {
    double value = std::numeric_limits<double>::infinity();
    double deriv = std::numeric_limits<double>::quiet_NaN();
};
using ScalarOracle = std::function<ScalarEval(double)>;

struct WolfeResult {
    bool success = false;
    double t = 0.0;
    ScalarEval at;
    int evals = 0;
};

// Bracketing bisection for phi(t) <= phi(0) + c1 t phi'(0) and
// phi'(t) >= c2 phi'(0). Trials with phi(t) = +inf count as Armijo
// failures, so the bracket contracts away from stability walls and every
// accepted step has finite value. Requires phi'(0) < 0.
WolfeResult weak_wolfe_linesearch(const ScalarOracle& phi, double t0,
                                  double f0, double dphi0,
                                  const Options& opts = {});

// ---- BFGS pieces ------------------------------------------------------

// Inverse-Hessian update; returns false (and leaves Hinv untouched) when
// s^T y <= tol ||s|| ||y||.
bool bfgs_update(Mat& Hinv, const Vec& s, const Vec& y, double skip_tol);

// Norm of the minimum-norm point of conv{columns of P}; exact finite
// algorithm (Wolfe's method). Used for the stationarity certificate.
double min_norm_in_hull(const Mat& P);

// Approximate Clarke-stationarity certificate: minimum-norm element of the
// convex hull of {mu g^k + J^k^T lambda^k} over the recent history, where
// lambda ranges over [0,1] on violated/near-active constraints (the hull of
// all vertex combinations is equivalent and finite).
double stationarity_measure(const std::deque<OraclePoint>& history, double mu,
                            double active_tol);

// ---- drivers ----------------------------------------------------------

SolveOutcome minimize_unconstrained(const Oracle& oracle, const Vec& x0,
                                    const Options& opts);

// Exact l1-penalty BFGS with steering: minimizes mu f + sum max(c_i, 0),
// halving mu whenever the linearized direction makes insufficient progress
// toward feasibility or the line search crosses the boundary at a healthy
// mu. The run halts with InfeasibleIterate the first time an accepted
// iterate violates a constraint (at that point mu has hit its floor, so
// the crossing is small); the best feasible point seen is returned too.
SolveOutcome minimize_constrained(const Oracle& oracle, const Vec& x0,
                                  const Options& opts);

}  // namespace locsyn::nsbfgs
