#include "locsyn/plant.hpp"

#include <Eigen/Dense>
#include <limits>
#include <sstream>

namespace locsyn {

namespace {

void require(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace

PlantRealization::PlantRealization(Mat A1, Mat B1_, Mat B2_, Mat C1_, Mat C2_,
                                   Mat D11_, Mat D12_, Mat D21_, Mat D22_)
    : B1(std::move(B1_)),
      B2(std::move(B2_)),
      C1(std::move(C1_)),
      C2(std::move(C2_)),
      D11(std::move(D11_)),
      D12(std::move(D12_)),
      D21(std::move(D21_)),
      D22(std::move(D22_)),
      sparse_(false),
      nx_(static_cast<int>(A1.rows())),
      A1_dense_(std::move(A1)) {
    check_dims();
}

PlantRealization::PlantRealization(SpMat A1, Mat B1_, Mat B2_, Mat C1_,
                                   Mat C2_, Mat D11_, Mat D12_, Mat D21_,
                                   Mat D22_)
    : B1(std::move(B1_)),
      B2(std::move(B2_)),
      C1(std::move(C1_)),
      C2(std::move(C2_)),
      D11(std::move(D11_)),
      D12(std::move(D12_)),
      D21(std::move(D21_)),
      D22(std::move(D22_)),
      sparse_(true),
      nx_(static_cast<int>(A1.rows())) {
    A1.makeCompressed();
    A1_sparse_ = std::move(A1);
    check_dims();
}

void PlantRealization::check_dims() const {
    const int nx = nx_;
    const Eigen::Index a_cols =
        sparse_ ? A1_sparse_.cols() : A1_dense_.cols();
    require(a_cols == nx, "A1 must be square");
    const int nw = static_cast<int>(B1.cols());
    const int nu = static_cast<int>(B2.cols());
    const int nz = static_cast<int>(C1.rows());
    const int ny = static_cast<int>(C2.rows());
    require(B1.rows() == nx, "B1 rows != n_x");
    require(B2.rows() == nx, "B2 rows != n_x");
    require(C1.cols() == nx, "C1 cols != n_x");
    require(C2.cols() == nx, "C2 cols != n_x");
    require(D11.rows() == nz && D11.cols() == nw, "D11 must be n_z x n_w");
    require(D12.rows() == nz && D12.cols() == nu, "D12 must be n_z x n_u");
    require(D21.rows() == ny && D21.cols() == nw, "D21 must be n_y x n_w");
    require(D22.rows() == ny && D22.cols() == nu, "D22 must be n_y x n_u");
    if (D22.size() > 0 && D22.cwiseAbs().maxCoeff() != 0.0)
        throw NonzeroD22Error(
            "nonzero D22 is not supported (closed loop would not be affine "
            "in the controller)");
}

const SpMat& PlantRealization::A1_sparse() const {
    if (!sparse_) throw Error("plant stores a dense A1");
    return A1_sparse_;
}

const Mat& PlantRealization::A1_dense() const {
    if (sparse_) throw Error("plant stores a sparse A1");
    return A1_dense_;
}

Mat PlantRealization::A1_as_dense() const {
    return sparse_ ? Mat(A1_sparse_) : A1_dense_;
}

Controller::Controller(Mat Ahat_, Mat Bhat_, Mat Chat_, Mat Dhat_)
    : Ahat(std::move(Ahat_)),
      Bhat(std::move(Bhat_)),
      Chat(std::move(Chat_)),
      Dhat(std::move(Dhat_)) {
    const int nk = static_cast<int>(Ahat.rows());
    if (Ahat.cols() != nk) throw DimensionError("Ahat must be square");
    if (Bhat.rows() != nk) throw DimensionError("Bhat rows != n_K");
    if (Chat.cols() != nk) throw DimensionError("Chat cols != n_K");
    if (Dhat.rows() != Chat.rows() || Dhat.cols() != Bhat.cols())
        throw DimensionError("Dhat must be n_u x n_y");
}

Vec Controller::flatten() const {
    Vec v(flat_size(order(), nu(), ny()));
    Eigen::Index at = 0;
    auto put = [&](const Mat& m) {
        Eigen::Map<const Vec> flat(m.data(), m.size());
        v.segment(at, m.size()) = flat;
        at += m.size();
    };
    put(Ahat);
    put(Bhat);
    put(Chat);
    put(Dhat);
    return v;
}

Controller Controller::from_flat(int n_k, int n_u, int n_y, const Vec& v) {
    if (v.size() != flat_size(n_k, n_u, n_y))
        throw DimensionError("flat controller vector has wrong length");
    Controller K = zero(n_k, n_u, n_y);
    Eigen::Index at = 0;
    auto take = [&](Mat& m) {
        m = Eigen::Map<const Mat>(v.data() + at, m.rows(), m.cols());
        at += m.size();
    };
    take(K.Ahat);
    take(K.Bhat);
    take(K.Chat);
    take(K.Dhat);
    return K;
}

Controller Controller::zero(int n_k, int n_u, int n_y) {
    return Controller(Mat::Zero(n_k, n_k), Mat::Zero(n_k, n_y),
                      Mat::Zero(n_u, n_k), Mat::Zero(n_u, n_y));
}

ClosedLoop assemble_closed_loop(const PlantRealization& plant,
                                const Controller& K) {
    if (K.nu() != plant.nu() || K.ny() != plant.ny())
        throw DimensionError("controller I/O dimensions do not match plant");
    const int nx = plant.nx();
    const int nk = K.order();
    const int n = nx + nk;

    ClosedLoop cl;
    cl.Acl.resize(n, n);
    cl.Acl.topLeftCorner(nx, nx) = plant.A1_as_dense();
    cl.Acl.topLeftCorner(nx, nx).noalias() += plant.B2 * K.Dhat * plant.C2;
    cl.Acl.topRightCorner(nx, nk).noalias() = plant.B2 * K.Chat;
    cl.Acl.bottomLeftCorner(nk, nx).noalias() = K.Bhat * plant.C2;
    cl.Acl.bottomRightCorner(nk, nk) = K.Ahat;

    cl.Bcl.resize(n, plant.nw());
    cl.Bcl.topRows(nx) = plant.B1;
    cl.Bcl.topRows(nx).noalias() += plant.B2 * K.Dhat * plant.D21;
    cl.Bcl.bottomRows(nk).noalias() = K.Bhat * plant.D21;

    cl.Ccl.resize(plant.nz(), n);
    cl.Ccl.leftCols(nx) = plant.C1;
    cl.Ccl.leftCols(nx).noalias() += plant.D12 * K.Dhat * plant.C2;
    cl.Ccl.rightCols(nk).noalias() = plant.D12 * K.Chat;

    cl.Dcl = plant.D11;
    cl.Dcl.noalias() += plant.D12 * K.Dhat * plant.D21;
    return cl;
}

CMat transfer_value(const ClosedLoop& cl, double omega) {
    if (std::isinf(omega)) return cl.Dcl.cast<std::complex<double>>();
    const int n = cl.n();
    CMat shifted = -cl.Acl.cast<std::complex<double>>();
    shifted.diagonal().array() += std::complex<double>(0.0, omega);
    Eigen::PartialPivLU<CMat> lu(shifted);
    CMat X = lu.solve(cl.Bcl.cast<std::complex<double>>());
    // PartialPivLU does not flag singularity; check the solve residual.
    const double resid = (shifted * X - cl.Bcl.cast<std::complex<double>>())
                             .norm();
    const double scale =
        shifted.norm() * X.norm() + cl.Bcl.norm() + 1e-300;
    if (!X.allFinite() || resid > 1e-8 * scale)
        throw ResolventSingular(
            "iw is an eigenvalue of the closed-loop matrix (resolvent "
            "solve failed)");
    CMat G = cl.Ccl.cast<std::complex<double>>() * X;
    G += cl.Dcl.cast<std::complex<double>>();
    return G;
}

ClosedLoopOperator::ClosedLoopOperator(const PlantRealization& fom,
                                       const Controller& K)
    : nx_(fom.nx()),
      nk_(K.order()),
      n_(fom.nx() + K.order()),
      A1_(fom.A1_sparse()),
      B2_(fom.B2),
      C2_(fom.C2),
      K_(K) {
    if (K.nu() != fom.nu() || K.ny() != fom.ny())
        throw DimensionError("controller I/O dimensions do not match plant");
    A1t_ = A1_.transpose();
}

Vec ClosedLoopOperator::apply(const Vec& v) const {
    if (v.size() != n_) throw DimensionError("operator apply: bad length");
    const auto v1 = v.head(nx_);
    const auto v2 = v.tail(nk_);
    Vec y2 = C2_ * v1;
    Vec out(n_);
    out.head(nx_) = A1_ * v1;
    out.head(nx_).noalias() += B2_ * (K_.Dhat * y2);
    out.head(nx_).noalias() += B2_ * (K_.Chat * v2);
    out.tail(nk_).noalias() = K_.Bhat * y2;
    out.tail(nk_).noalias() += K_.Ahat * v2;
    return out;
}

Vec ClosedLoopOperator::apply_transpose(const Vec& v) const {
    if (v.size() != n_)
        throw DimensionError("operator applyTranspose: bad length");
    const auto v1 = v.head(nx_);
    const auto v2 = v.tail(nk_);
    Vec b2tv = B2_.transpose() * v1;
    Vec out(n_);
    out.head(nx_) = A1t_ * v1;
    out.head(nx_).noalias() += C2_.transpose() * (K_.Dhat.transpose() * b2tv);
    out.head(nx_).noalias() += C2_.transpose() * (K_.Bhat.transpose() * v2);
    out.tail(nk_).noalias() = K_.Chat.transpose() * b2tv;
    out.tail(nk_).noalias() += K_.Ahat.transpose() * v2;
    return out;
}

Mat ClosedLoopOperator::to_dense() const {
    Mat A(n_, n_);
    A.topLeftCorner(nx_, nx_) = Mat(A1_);
    A.topLeftCorner(nx_, nx_).noalias() += B2_ * K_.Dhat * C2_;
    A.topRightCorner(nx_, nk_).noalias() = B2_ * K_.Chat;
    A.bottomLeftCorner(nk_, nx_).noalias() = K_.Bhat * C2_;
    A.bottomRightCorner(nk_, nk_) = K_.Ahat;
    return A;
}

}  // namespace locsyn
