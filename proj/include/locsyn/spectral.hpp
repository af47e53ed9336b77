#pragma once

#include <complex>

#include "locsyn/plant.hpp"

namespace locsyn {

// Rightmost eigenvalue with right/left eigenvectors, normalized so that
// ||x||_2 = 1 and y^H x = 1. `simple` is cleared when the eigenvalue is
// (numerically) multiple or the y^H x normalization is ill conditioned;
// gradients built from a non-simple triple are unreliable but still usable
// by the nonsmooth optimizer.
struct EigenTriple {
    std::complex<double> lambda;
    CVec x;
    CVec y;
    bool simple = true;
};

// Gradient of a scalar function with respect to the controller blocks;
// shapes match Controller, flat view matches Controller::flatten().
struct ControllerGradient {
    Mat dAhat, dBhat, dChat, dDhat;

    ControllerGradient() = default;
    ControllerGradient(int n_k, int n_u, int n_y)
        : dAhat(Mat::Zero(n_k, n_k)),
          dBhat(Mat::Zero(n_k, n_y)),
          dChat(Mat::Zero(n_u, n_k)),
          dDhat(Mat::Zero(n_u, n_y)) {}

    Vec flatten() const {
        Controller tmp(dAhat, dBhat, dChat, dDhat);
        return tmp.flatten();
    }
};

// Spectral abscissa of a dense matrix together with an eigentriple
// attaining it. Ties on the real part are broken toward the eigenvalue with
// largest |Im| so conjugate-pair perturbations give a stable selection.
// The left eigenvector comes from the same decomposition (a row of V^{-1}).
std::pair<double, EigenTriple> spectral_abscissa_dense(const Mat& M);

// Eigenvalues only (no vectors); used where triples are not needed.
CVec eigenvalues_dense(const Mat& M);

// Gradient of the spectral abscissa of the closed loop with respect to the
// controller blocks, from d(lambda) = y^H dA x and the affine block
// structure; the perturbation matrix dA is never formed. x = [x1; x2] and
// y = [y1; y2] are split conformally with (n_x, n_K).
ControllerGradient abscissa_gradient(const PlantRealization& plant,
                                     const Controller& K,
                                     const EigenTriple& triple);

}  // namespace locsyn
