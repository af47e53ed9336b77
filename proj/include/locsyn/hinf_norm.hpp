#pragma once

#include <vector>

#include "locsyn/plant.hpp"
#include "locsyn/spectral.hpp"

namespace locsyn {

// Peak-gain data at one frequency: sigma = ||G(i omega)||_2 with unit
// singular vectors, u^H G v = sigma real. `simple` is set when
// sigma1 - sigma2 > 1e-8 * sigma1. omega may be +inf (gain of D).
struct SingularTriple {
    double sigma = 0.0;
    CVec u, v;
    double omega = 0.0;
    bool simple = true;
};

SingularTriple sigma_max_at(const ClosedLoop& cl, double omega);

// Caches the closed-loop Gramian factors so repeated frequency evaluations
// are cheap. When D = 0 and the performance channels are much wider than
// the state dimension, the largest singular value is computed from the
// n x n pencil Phi^H (C^T C) Phi (B B^T) instead of a dense SVD of G.
class SigmaEvaluator {
  public:
    explicit SigmaEvaluator(const ClosedLoop& cl);
    SingularTriple at(double omega) const;

  private:
    SingularTriple dense_at(double omega) const;
    SingularTriple factored_at(double omega) const;
    const ClosedLoop& cl_;
    bool factored_ = false;
    Mat Gamma_, Ltheta_;
};

// Hamiltonian level-test matrix H(gamma); requires gamma > sigma_max(D).
// For D = 0 this is [[A, B B^T / gamma], [-C^T C / gamma, -A^T]].
Mat hamiltonian(const ClosedLoop& cl, double gamma);

// Frequencies of the imaginary-axis eigenvalues of H: |Re mu| is tested
// against 1e-8 * ||H||_F; the |Im mu| values are deduplicated within
// 1e-10 * max(1, gamma) and returned sorted ascending.
std::vector<double> hamiltonian_imaginary_frequencies(const Mat& H,
                                                      double gamma);

struct NormOptions {
    double tol = 1e-14;       // relative tolerance (the delta_high preset)
    int max_level_iters = 50;
    int grid_points = 128;    // initial log-grid samples
    double grid_lo = 1e-3;    // grid range factors times the spectral scale
    double grid_hi = 1e3;
    std::vector<double> extra_candidates;  // warm-start frequencies
};

// The tolerance used by the low-accuracy comparison preset.
inline constexpr double kNormTolLow = 1e-7;

struct NormResult {
    double value = 0.0;
    SingularTriple peak;
    int iterations = 0;
    bool certified = false;
    bool unique_peak = true;
    std::vector<double> levels;  // strictly increasing until certification
};

// L-infinity norm by the BBBS level-set iteration: start from the best
// frequency sample, then repeatedly test H(gamma (1 + 2 tol)) for
// imaginary-axis eigenvalues and jump to the best midpoint gain. Throws
// NormInfinite when the closed loop has an imaginary-axis eigenvalue.
NormResult linf_norm_bbbs(const ClosedLoop& cl, const NormOptions& opts = {});
NormResult linf_norm_bbbs(const ClosedLoop& cl, double tol);

// Gradient of the norm with respect to the controller blocks at a simple
// peak, from d sigma = Re(u^H dG v) and the affine closed-loop structure,
// with r = resolvent * B v and s = resolvent^H * C^H u.
ControllerGradient linf_gradient(const PlantRealization& plant,
                                 const Controller& K,
                                 const SingularTriple& peak);

}  // namespace locsyn
