#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <complex>
#include <optional>

#include "locsyn/errors.hpp"

namespace locsyn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<double>;

// Partitioned open-loop state-space data
//
//   [ xdot ]   [ A1  | B1   B2  ] [ x ]
//   [ z    ] = [ C1  | D11  D12 ] [ w ]
//   [ y    ]   [ C2  | D21  D22 ] [ u ]
//
// A1 is stored dense (ROM-scale plants) or sparse (large FOMs). D22 must be
// exactly zero; the closed-loop assembly is affine in the controller only
// under that assumption and nonzero D22 is rejected at construction.
class PlantRealization {
  public:
    PlantRealization(Mat A1, Mat B1, Mat B2, Mat C1, Mat C2, Mat D11, Mat D12,
                     Mat D21, Mat D22);
    PlantRealization(SpMat A1, Mat B1, Mat B2, Mat C1, Mat C2, Mat D11,
                     Mat D12, Mat D21, Mat D22);

    int nx() const { return nx_; }
    int nw() const { return static_cast<int>(B1.cols()); }
    int nu() const { return static_cast<int>(B2.cols()); }
    int nz() const { return static_cast<int>(C1.rows()); }
    int ny() const { return static_cast<int>(C2.rows()); }

    bool sparse() const { return sparse_; }
    const SpMat& A1_sparse() const;
    const Mat& A1_dense() const;
    // A1 as a dense matrix regardless of storage (materializes when sparse).
    Mat A1_as_dense() const;

    Mat B1, B2, C1, C2, D11, D12, D21, D22;

  private:
    void check_dims() const;
    bool sparse_ = false;
    int nx_ = 0;
    Mat A1_dense_;
    SpMat A1_sparse_;
};

// Fixed-order output-feedback controller
//
//   [ xhat_dot ]   [ Ahat  Bhat ] [ xhat ]
//   [ u        ] = [ Chat  Dhat ] [ y    ]
//
// The flat-vector view stacks [vec(Ahat); vec(Bhat); vec(Chat); vec(Dhat)]
// column-major; it is the optimization variable.
struct Controller {
    Mat Ahat, Bhat, Chat, Dhat;

    Controller() = default;
    Controller(Mat Ahat_, Mat Bhat_, Mat Chat_, Mat Dhat_);

    int order() const { return static_cast<int>(Ahat.rows()); }
    int nu() const { return static_cast<int>(Chat.rows()); }
    int ny() const { return static_cast<int>(Bhat.cols()); }

    static int flat_size(int n_k, int n_u, int n_y) {
        return n_k * n_k + n_k * n_y + n_u * n_k + n_u * n_y;
    }
    Vec flatten() const;
    static Controller from_flat(int n_k, int n_u, int n_y, const Vec& v);

    static Controller zero(int n_k, int n_u, int n_y);
};

// Assembled closed-loop realization (dense).
struct ClosedLoop {
    Mat Acl, Bcl, Ccl, Dcl;
    int n() const { return static_cast<int>(Acl.rows()); }
    int nw() const { return static_cast<int>(Bcl.cols()); }
    int nz() const { return static_cast<int>(Ccl.rows()); }
};

ClosedLoop assemble_closed_loop(const PlantRealization& plant,
                                const Controller& K);

// G(iw) = Ccl (iwI - Acl)^{-1} Bcl + Dcl, one LU factorization with the nw
// right-hand sides batched. omega = +inf returns Dcl. Throws
// ResolventSingular when iw is (numerically) an eigenvalue of Acl.
CMat transfer_value(const ClosedLoop& cl, double omega);

// Matrix-free closed-loop operator for a sparse-A1 plant: applies
//
//   Acl = [ A1 + B2 Dhat C2   B2 Chat ]
//         [ Bhat C2           Ahat    ]
//
// using only sparse A1 products plus low-rank controller couplings. The
// operator is immutable and safe to share across threads.
class ClosedLoopOperator {
  public:
    ClosedLoopOperator(const PlantRealization& fom, const Controller& K);

    int n() const { return n_; }
    Vec apply(const Vec& v) const;
    Vec apply_transpose(const Vec& v) const;

    // Densely assembled Acl; intended for tests and the small-n fallback.
    Mat to_dense() const;

  private:
    int nx_, nk_, n_;
    SpMat A1_, A1t_;
    Mat B2_, C2_;
    Controller K_;
};

}  // namespace locsyn
