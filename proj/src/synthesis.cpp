#include "locsyn/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "locsyn/nsbfgs.hpp"
#include "locsyn/plant_io.hpp"
#include "locsyn/spectral.hpp"

namespace locsyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

const char* to_string(SynthesisMode m) {
    return m == SynthesisMode::R_ONLY ? "r-only" : "r+f";
}
const char* to_string(SynthesisAlgorithm a) {
    return a == SynthesisAlgorithm::ALG1 ? "1" : "2";
}
SynthesisMode mode_from_string(const std::string& s) {
    if (s == "r-only") return SynthesisMode::R_ONLY;
    if (s == "r+f") return SynthesisMode::R_PLUS_F;
    throw Error("unknown mode: " + s + " (expected r-only or r+f)");
}
SynthesisAlgorithm algorithm_from_string(const std::string& s) {
    if (s == "1") return SynthesisAlgorithm::ALG1;
    if (s == "2") return SynthesisAlgorithm::ALG2;
    throw Error("unknown algorithm: " + s + " (expected 1 or 2)");
}
const char* to_string(SynthesisStatus s) {
    switch (s) {
        case SynthesisStatus::StationaritySatisfied:
            return "StationaritySatisfied";
        case SynthesisStatus::MaxIterations: return "MaxIterations";
        case SynthesisStatus::LineSearchFailure: return "LineSearchFailure";
        case SynthesisStatus::StabilizationFailed:
            return "StabilizationFailed";
    }
    return "Unknown";
}
SynthesisStatus synthesis_status_from_string(const std::string& s) {
    if (s == "StationaritySatisfied") return SynthesisStatus::StationaritySatisfied;
    if (s == "MaxIterations") return SynthesisStatus::MaxIterations;
    if (s == "LineSearchFailure") return SynthesisStatus::LineSearchFailure;
    if (s == "StabilizationFailed") return SynthesisStatus::StabilizationFailed;
    throw Error("unknown synthesis status: " + s);
}

void SynthesisProblem::validate() const {
    if (!fom.sparse()) throw Error("FOM plant must store a sparse A1");
    if (rom.sparse()) throw Error("ROM plant must store a dense A1");
    if (rom.nw() != fom.nw() || rom.nu() != fom.nu() ||
        rom.nz() != fom.nz() || rom.ny() != fom.ny())
        throw DimensionError(
            "ROM and FOM must share (n_w, n_u, n_z, n_y)");
    if (n_k < 0) throw Error("controller order must be >= 0");
}

namespace {

// Warm-started per-run evaluator. A synthesis run is sequential, so the
// mutable warm-start state is safe; reruns with the same inputs follow the
// same sequence and reproduce results bit-for-bit.
class RunEvaluator {
  public:
    RunEvaluator(const SynthesisProblem& p, bool use_fom)
        : p_(p), use_fom_(use_fom) {}

    // extras layout: [alpha_rom, alpha_fom, norm]
    static double extra_alpha_rom(const nsbfgs::OraclePoint& pt) {
        return pt.extras.empty() ? kNaN : pt.extras[0];
    }
    static double extra_alpha_fom(const nsbfgs::OraclePoint& pt) {
        return pt.extras.size() < 2 ? kNaN : pt.extras[1];
    }
    static double extra_norm(const nsbfgs::OraclePoint& pt) {
        return pt.extras.size() < 3 ? kNaN : pt.extras[2];
    }

    Controller unflatten(const Vec& x) const {
        return Controller::from_flat(p_.n_k, p_.rom.nu(), p_.rom.ny(), x);
    }

    double alpha_rom(const Controller& K, EigenTriple* triple,
                     ClosedLoop* cl_out = nullptr) const {
        ClosedLoop cl = assemble_closed_loop(p_.rom, K);
        auto [a, t] = spectral_abscissa_dense(cl.Acl);
        if (triple) *triple = std::move(t);
        if (cl_out) *cl_out = std::move(cl);
        return a;
    }

    double alpha_fom(const Controller& K, EigenTriple* triple) {
        ClosedLoopOperator op(p_.fom, K);
        ArnoldiOptions opts = p_.config.arnoldi;
        if (warm_right_.size() == op.n()) opts.v0 = warm_right_;
        if (warm_left_.size() == op.n()) opts.v0_transpose = warm_left_;
        auto [a, t] = rightmost_eigentriple_iterative(op, opts);
        warm_right_ = real_direction(t.x);
        warm_left_ = real_direction(t.y);
        if (triple) *triple = std::move(t);
        return a;
    }

    NormResult rom_norm(const ClosedLoop& cl) {
        NormOptions no;
        no.tol = p_.config.norm_tol;
        no.grid_points = first_norm_ ? p_.config.norm_grid_points
                                     : p_.config.norm_grid_points_warm;
        if (!first_norm_ && std::isfinite(prev_peak_) && prev_peak_ >= 0.0)
            no.extra_candidates.push_back(prev_peak_);
        NormResult nr = linf_norm_bbbs(cl, no);
        first_norm_ = false;
        if (std::isfinite(nr.peak.omega)) prev_peak_ = nr.peak.omega;
        return nr;
    }

    // phase (A): minimize the worst spectral abscissa
    nsbfgs::OraclePoint oracle_stabilize(const Vec& x) {
        const Controller K = unflatten(x);
        nsbfgs::OraclePoint pt;
        EigenTriple t_rom;
        const double a_rom = alpha_rom(K, &t_rom);
        double a_fom = kNaN;
        if (use_fom_) {
            EigenTriple t_fom;
            a_fom = alpha_fom(K, &t_fom);
            // ties go to the FOM branch
            if (a_fom >= a_rom) {
                pt.f = a_fom;
                pt.g = abscissa_gradient(p_.fom, K, t_fom).flatten();
            } else {
                pt.f = a_rom;
                pt.g = abscissa_gradient(p_.rom, K, t_rom).flatten();
            }
        } else {
            pt.f = a_rom;
            pt.g = abscissa_gradient(p_.rom, K, t_rom).flatten();
        }
        pt.extras = {a_rom, a_fom, kNaN};
        return pt;
    }

    // Alg. 1 optimize phase: F(K) with the +inf wall
    nsbfgs::OraclePoint oracle_F(const Vec& x) {
        const Controller K = unflatten(x);
        nsbfgs::OraclePoint pt;
        ClosedLoop cl;
        const double a_rom = alpha_rom(K, nullptr, &cl);
        double a_fom = kNaN;
        double worst = a_rom;
        if (use_fom_) {
            a_fom = alpha_fom(K, nullptr);
            worst = std::max(a_rom, a_fom);
        }
        if (worst >= 0.0) {
            pt.f = kInf;  // norm deliberately not computed
            pt.extras = {a_rom, a_fom, kNaN};
            return pt;
        }
        NormResult nr;
        try {
            nr = rom_norm(cl);
        } catch (const NormInfinite&) {
            pt.f = kInf;
            pt.extras = {a_rom, a_fom, kNaN};
            return pt;
        }
        pt.f = nr.value;
        pt.g = linf_gradient(p_.rom, K, nr.peak).flatten();
        pt.extras = {a_rom, a_fom, nr.value};
        return pt;
    }

    // Alg. 2 phase (B): L-infinity norm objective, abscissa constraints
    nsbfgs::OraclePoint oracle_constrained(const Vec& x) {
        const Controller K = unflatten(x);
        nsbfgs::OraclePoint pt;
        ClosedLoop cl;
        EigenTriple t_rom;
        const double a_rom = alpha_rom(K, &t_rom, &cl);
        double a_fom = kNaN;
        EigenTriple t_fom;
        if (use_fom_) a_fom = alpha_fom(K, &t_fom);

        try {
            const NormResult nr = rom_norm(cl);
            pt.f = nr.value;
            pt.g = linf_gradient(p_.rom, K, nr.peak).flatten();
            pt.extras = {a_rom, a_fom, nr.value};
        } catch (const NormInfinite&) {
            pt.f = kInf;
            pt.extras = {a_rom, a_fom, kNaN};
            return pt;  // wall: the line search backs off
        } catch (const ResolventSingular&) {
            pt.f = kInf;
            pt.extras = {a_rom, a_fom, kNaN};
            return pt;
        }

        const int m = use_fom_ ? 2 : 1;
        pt.c.resize(m);
        pt.J.resize(m, x.size());
        pt.c(0) = a_rom;
        pt.J.row(0) = abscissa_gradient(p_.rom, K, t_rom).flatten();
        if (use_fom_) {
            pt.c(1) = a_fom;
            pt.J.row(1) = abscissa_gradient(p_.fom, K, t_fom).flatten();
        }
        return pt;
    }

  private:
    static Vec real_direction(const CVec& z) {
        Vec v = z.real() + z.imag();
        const double n = v.norm();
        if (n < 1e-12) v = z.real();
        return v;
    }
    const SynthesisProblem& p_;
    bool use_fom_;
    bool first_norm_ = true;
    double prev_peak_ = kNaN;
    Vec warm_right_, warm_left_;
};

}  // namespace

FEvaluation evaluate_F(const SynthesisProblem& problem, const Controller& K) {
    problem.validate();
    FEvaluation ev;
    ClosedLoop cl = assemble_closed_loop(problem.rom, K);
    ev.alpha_rom = spectral_abscissa_dense(cl.Acl).first;
    ClosedLoopOperator op(problem.fom, K);
    ev.alpha_fom =
        rightmost_eigentriple_iterative(op, problem.config.arnoldi).first;
    if (std::max(ev.alpha_rom, ev.alpha_fom) < 0.0) {
        NormOptions no;
        no.tol = problem.config.norm_tol;
        no.grid_points = problem.config.norm_grid_points;
        ev.norm = linf_norm_bbbs(cl, no);
        ev.F = ev.norm->value;
    } else {
        ev.F = kInf;  // stability check is an order of magnitude cheaper
    }
    return ev;
}

std::pair<double, ControllerGradient> stabilization_objective(
    const SynthesisProblem& problem, const Controller& K) {
    problem.validate();
    RunEvaluator ev(problem,
                    problem.config.mode == SynthesisMode::R_PLUS_F);
    const nsbfgs::OraclePoint pt = ev.oracle_stabilize(K.flatten());
    ControllerGradient g(problem.n_k, problem.rom.nu(), problem.rom.ny());
    const Controller gk = Controller::from_flat(problem.n_k, problem.rom.nu(),
                                                problem.rom.ny(), pt.g);
    g.dAhat = gk.Ahat;
    g.dBhat = gk.Bhat;
    g.dChat = gk.Chat;
    g.dDhat = gk.Dhat;
    return {pt.f, g};
}

namespace {

struct RunContext {
    const SynthesisProblem& problem;
    RunEvaluator eval;
    Clock::time_point t0 = Clock::now();
    std::vector<HistoryRow> history;
    // best point by the mode objective (feasible w.r.t. the mode)
    std::optional<Vec> best_x;
    double best_f = kInf;

    explicit RunContext(const SynthesisProblem& p)
        : problem(p),
          eval(p, p.config.mode == SynthesisMode::R_PLUS_F) {}

    void log(char phase, int iter, const nsbfgs::OraclePoint& pt) {
        HistoryRow row;
        row.phase = phase;
        row.iteration = iter;
        row.alpha_rom = RunEvaluator::extra_alpha_rom(pt);
        row.alpha_fom = RunEvaluator::extra_alpha_fom(pt);
        row.norm = RunEvaluator::extra_norm(pt);
        row.seconds = seconds_since(t0);
        history.push_back(row);
    }

    bool mode_feasible(const nsbfgs::OraclePoint& pt) const {
        const double ar = RunEvaluator::extra_alpha_rom(pt);
        if (!(ar < 0.0)) return false;
        if (problem.config.mode == SynthesisMode::R_PLUS_F) {
            const double af = RunEvaluator::extra_alpha_fom(pt);
            if (!(af < 0.0)) return false;
        }
        return true;
    }

    void consider_best(const nsbfgs::OraclePoint& pt) {
        const double nv = RunEvaluator::extra_norm(pt);
        if (!std::isfinite(nv) || !mode_feasible(pt)) return;
        if (nv < best_f) {
            best_f = nv;
            best_x = pt.x;
        }
    }
};

SynthesisResult finalize(RunContext& ctx, const Controller& fallback_K,
                         SynthesisStatus status) {
    SynthesisResult res;
    res.status = status;
    res.history = std::move(ctx.history);
    res.F_tracked = ctx.best_f;
    res.best_K = ctx.best_x
                     ? Controller::from_flat(ctx.problem.n_k,
                                             ctx.problem.rom.nu(),
                                             ctx.problem.rom.ny(), *ctx.best_x)
                     : fallback_K;
    // independent final evaluation, fresh eigensolves and fresh norm
    const FEvaluation fe = evaluate_F(ctx.problem, res.best_K);
    res.F_best = fe.F;
    res.alpha_rom = fe.alpha_rom;
    res.alpha_fom = fe.alpha_fom;
    res.seconds = seconds_since(ctx.t0);
    return res;
}

nsbfgs::Options engine_options(const SynthesisProblem& p) {
    nsbfgs::Options o;
    o.stat_tol = p.config.stat_tol;
    return o;
}

}  // namespace

SynthesisResult algorithm1(const SynthesisProblem& problem,
                           const Controller& K0) {
    problem.validate();
    if (K0.order() != problem.n_k)
        throw DimensionError("K0 order does not match the problem");
    RunContext ctx(problem);
    Vec x = K0.flatten();
    int phase_a_iterations = 0;

    const nsbfgs::OraclePoint pt0 = ctx.eval.oracle_stabilize(x);
    ctx.log('I', 0, pt0);
    if (pt0.f >= 0.0) {
        // phase Stabilize
        nsbfgs::Options oa = engine_options(problem);
        oa.maxit = problem.config.phase_a_maxit;
        oa.stop_predicate = [](const Vec&, double f) { return f < 0.0; };
        oa.on_accept = [&](const nsbfgs::OraclePoint& pt, int it) {
            ctx.log('A', it, pt);
        };
        auto outcome = nsbfgs::minimize_unconstrained(
            [&](const Vec& xx) { return ctx.eval.oracle_stabilize(xx); }, x,
            oa);
        phase_a_iterations = outcome.iterations;
        if (outcome.status != nsbfgs::Status::FeasibleFound) {
            // least-infeasible controller, F = +inf
            SynthesisResult res =
                finalize(ctx,
                         Controller::from_flat(problem.n_k, problem.rom.nu(),
                                               problem.rom.ny(), outcome.x),
                         SynthesisStatus::StabilizationFailed);
            res.phase_a_iterations = phase_a_iterations;
            return res;
        }
        x = outcome.x;
    }

    // phase Optimize: minimize F directly; the line search rejects
    // infinite trial values so every accepted iterate stays stable
    nsbfgs::Options ob = engine_options(problem);
    ob.maxit = problem.config.phase_b_maxit_cumulative;
    ob.on_accept = [&](const nsbfgs::OraclePoint& pt, int it) {
        ctx.log('B', it, pt);
        ctx.consider_best(pt);
    };
    auto outcome = nsbfgs::minimize_unconstrained(
        [&](const Vec& xx) { return ctx.eval.oracle_F(xx); }, x, ob);
    ctx.consider_best(outcome.final_point);
    if (!ctx.best_x) ctx.best_x = outcome.x;
    SynthesisStatus st;
    switch (outcome.status) {
        case nsbfgs::Status::StationaritySatisfied:
            st = SynthesisStatus::StationaritySatisfied;
            break;
        case nsbfgs::Status::LineSearchFailure:
            st = SynthesisStatus::LineSearchFailure;
            break;
        default: st = SynthesisStatus::MaxIterations;
    }
    SynthesisResult res = finalize(
        ctx,
        Controller::from_flat(problem.n_k, problem.rom.nu(), problem.rom.ny(),
                              outcome.x),
        st);
    res.phase_a_iterations = phase_a_iterations;
    res.phase_b_iterations = outcome.iterations;
    return res;
}

SynthesisResult algorithm2(const SynthesisProblem& problem,
                           const Controller& K0) {
    problem.validate();
    if (K0.order() != problem.n_k)
        throw DimensionError("K0 order does not match the problem");
    RunContext ctx(problem);
    Vec x = K0.flatten();

    int phase_a_total = 0;
    int phase_b_total = 0;
    int restabs = 0;
    bool any_b = false;
    SynthesisStatus status = SynthesisStatus::MaxIterations;

    {
        const nsbfgs::OraclePoint pt0 = ctx.eval.oracle_stabilize(x);
        ctx.log('I', 0, pt0);
    }

    while (true) {
        // (A) restore feasibility when needed
        const nsbfgs::OraclePoint probe = ctx.eval.oracle_stabilize(x);
        if (probe.f >= 0.0) {
            if (any_b) ++restabs;
            nsbfgs::Options oa = engine_options(problem);
            oa.maxit = problem.config.phase_a_maxit;
            oa.stop_predicate = [](const Vec&, double f) { return f < 0.0; };
            oa.on_accept = [&](const nsbfgs::OraclePoint& pt, int it) {
                ctx.log('A', it, pt);
            };
            auto outcome = nsbfgs::minimize_unconstrained(
                [&](const Vec& xx) { return ctx.eval.oracle_stabilize(xx); },
                x, oa);
            phase_a_total += outcome.iterations;
            x = outcome.x;  // least-infeasible point on failure
            if (outcome.status != nsbfgs::Status::FeasibleFound) {
                status = any_b ? SynthesisStatus::MaxIterations
                               : SynthesisStatus::StabilizationFailed;
                break;
            }
        }
        if (phase_b_total >= problem.config.phase_b_maxit_cumulative) {
            status = SynthesisStatus::MaxIterations;
            break;
        }

        // (B) constrained norm minimization from the feasible point
        nsbfgs::Options obopts = engine_options(problem);
        obopts.maxit =
            problem.config.phase_b_maxit_cumulative - phase_b_total;
        obopts.on_accept = [&](const nsbfgs::OraclePoint& pt, int it) {
            ctx.log('B', it, pt);
            ctx.consider_best(pt);
        };
        auto outcome = nsbfgs::minimize_constrained(
            [&](const Vec& xx) { return ctx.eval.oracle_constrained(xx); },
            x, obopts);
        phase_b_total += outcome.iterations;
        any_b = true;
        ctx.consider_best(outcome.final_point);
        if (outcome.status == nsbfgs::Status::InfeasibleIterate) {
            // continue from the infeasible iterate, back to (A)
            x = outcome.x;
            continue;
        }
        if (outcome.status == nsbfgs::Status::StationaritySatisfied) {
            status = SynthesisStatus::StationaritySatisfied;
        } else if (outcome.status == nsbfgs::Status::LineSearchFailure) {
            status = SynthesisStatus::LineSearchFailure;
        } else {
            status = SynthesisStatus::MaxIterations;
        }
        break;
    }

    SynthesisResult res = finalize(
        ctx,
        Controller::from_flat(problem.n_k, problem.rom.nu(), problem.rom.ny(),
                              x),
        status);
    res.phase_a_iterations = phase_a_total;
    res.phase_b_iterations = phase_b_total;
    res.restabilizations = restabs;
    return res;
}

SynthesisResult synthesize(const SynthesisProblem& problem,
                           const Controller& K0) {
    return problem.config.algorithm == SynthesisAlgorithm::ALG1
               ? algorithm1(problem, K0)
               : algorithm2(problem, K0);
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& history) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "phase,iter,norm,alpha_rom,alpha_fom,seconds\n";
    for (const auto& r : history)
        os << r.phase << ',' << r.iteration << ',' << format_double(r.norm)
           << ',' << format_double(r.alpha_rom) << ','
           << format_double(r.alpha_fom) << ',' << format_double(r.seconds)
           << '\n';
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty history file");
    std::vector<HistoryRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        HistoryRow r;
        if (!(ss >> r.phase >> r.iteration >> r.norm >> r.alpha_rom >>
              r.alpha_fom >> r.seconds))
            throw FormatError("bad history row: " + line);
        rows.push_back(r);
    }
    return rows;
}

void write_result(const std::filesystem::path& path,
                  const SynthesisResult& result, SynthesisAlgorithm algorithm,
                  SynthesisMode mode) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "locsyn-result-v1\n";
    os << "algorithm " << to_string(algorithm) << '\n';
    os << "mode " << to_string(mode) << '\n';
    os << "status " << to_string(result.status) << '\n';
    os << "F " << format_double(result.F_best) << '\n';
    os << "F_tracked " << format_double(result.F_tracked) << '\n';
    os << "alpha_rom " << format_double(result.alpha_rom) << '\n';
    os << "alpha_fom " << format_double(result.alpha_fom) << '\n';
    os << "phase_a_iterations " << result.phase_a_iterations << '\n';
    os << "phase_b_iterations " << result.phase_b_iterations << '\n';
    os << "restabilizations " << result.restabilizations << '\n';
    os << "seconds " << format_double(result.seconds) << '\n';
    os << "controller\n";
    write_controller(os, result.best_K);
}

SynthesisResult read_result(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::string tag;
    if (!(is >> tag) || tag != "locsyn-result-v1")
        throw FormatError("not a locsyn-result-v1 file");
    SynthesisResult res;
    std::string key;
    while (is >> key) {
        if (key == "algorithm" || key == "mode") {
            std::string v;
            is >> v;
        } else if (key == "status") {
            std::string v;
            is >> v;
            res.status = synthesis_status_from_string(v);
        } else if (key == "F") {
            is >> res.F_best;
        } else if (key == "F_tracked") {
            is >> res.F_tracked;
        } else if (key == "alpha_rom") {
            is >> res.alpha_rom;
        } else if (key == "alpha_fom") {
            is >> res.alpha_fom;
        } else if (key == "phase_a_iterations") {
            is >> res.phase_a_iterations;
        } else if (key == "phase_b_iterations") {
            is >> res.phase_b_iterations;
        } else if (key == "restabilizations") {
            is >> res.restabilizations;
        } else if (key == "seconds") {
            is >> res.seconds;
        } else if (key == "controller") {
            res.best_K = read_controller(is);
            break;
        } else {
            throw FormatError("unknown result key: " + key);
        }
        if (is.fail()) throw FormatError("bad result field: " + key);
    }
    return res;
}

}  // namespace locsyn
