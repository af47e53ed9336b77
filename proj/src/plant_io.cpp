#include "locsyn/plant_io.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace locsyn {

namespace {

constexpr const char* kPlantTag = "locsyn-plant-v1";
constexpr const char* kControllerTag = "locsyn-controller-v1";

void write_dense_block(std::ostream& os, const std::string& name,
                       const Mat& m) {
    os << name << " dense\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ' ';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

Mat read_dense_block(std::istream& is, const std::string& name,
                     Eigen::Index rows, Eigen::Index cols) {
    std::string label, kind;
    if (!(is >> label >> kind) || label != name || kind != "dense")
        throw FormatError("expected '" + name + " dense' block");
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            if (!(is >> m(i, j)))
                throw FormatError("truncated block " + name);
    return m;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_plant(std::ostream& os, const PlantRealization& plant) {
    os << kPlantTag << '\n';
    os << plant.nx() << ' ' << plant.nw() << ' ' << plant.nu() << ' '
       << plant.nz() << ' ' << plant.ny() << '\n';
    if (plant.sparse()) {
        const SpMat& A = plant.A1_sparse();
        os << "A1 sparse " << A.nonZeros() << '\n';
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                os << (it.row() + 1) << ' ' << (it.col() + 1) << ' '
                   << format_double(it.value()) << '\n';
    } else {
        write_dense_block(os, "A1", plant.A1_dense());
    }
    write_dense_block(os, "B1", plant.B1);
    write_dense_block(os, "B2", plant.B2);
    write_dense_block(os, "C1", plant.C1);
    write_dense_block(os, "C2", plant.C2);
    write_dense_block(os, "D11", plant.D11);
    write_dense_block(os, "D12", plant.D12);
    write_dense_block(os, "D21", plant.D21);
    write_dense_block(os, "D22", plant.D22);
}

void write_plant(const std::filesystem::path& path,
                 const PlantRealization& plant) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_plant(os, plant);
    if (!os) throw Error("write failed: " + path.string());
}

PlantRealization read_plant(std::istream& is) {
    std::string tag;
    if (!(is >> tag) || tag != kPlantTag)
        throw FormatError("not a locsyn-plant-v1 file");
    int nx, nw, nu, nz, ny;
    if (!(is >> nx >> nw >> nu >> nz >> ny) || nx < 1 || nw < 0 || nu < 0 ||
        nz < 0 || ny < 0)
        throw FormatError("bad dimension header");

    std::string label, kind;
    if (!(is >> label >> kind) || label != "A1")
        throw FormatError("expected A1 block");
    bool sparse = false;
    Mat A1d;
    SpMat A1s;
    if (kind == "sparse") {
        sparse = true;
        long long nnz;
        if (!(is >> nnz) || nnz < 0) throw FormatError("bad A1 nnz count");
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<size_t>(nnz));
        for (long long k = 0; k < nnz; ++k) {
            long long i, j;
            double v;
            if (!(is >> i >> j >> v)) throw FormatError("truncated A1 triplets");
            if (i < 1 || i > nx || j < 1 || j > nx)
                throw FormatError("A1 triplet index out of range");
            trips.emplace_back(static_cast<int>(i - 1),
                               static_cast<int>(j - 1), v);
        }
        A1s.resize(nx, nx);
        A1s.setFromTriplets(trips.begin(), trips.end());
    } else if (kind == "dense") {
        A1d.resize(nx, nx);
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < nx; ++j)
                if (!(is >> A1d(i, j))) throw FormatError("truncated A1 block");
    } else {
        throw FormatError("A1 must be 'dense' or 'sparse'");
    }

    Mat B1 = read_dense_block(is, "B1", nx, nw);
    Mat B2 = read_dense_block(is, "B2", nx, nu);
    Mat C1 = read_dense_block(is, "C1", nz, nx);
    Mat C2 = read_dense_block(is, "C2", ny, nx);
    Mat D11 = read_dense_block(is, "D11", nz, nw);
    Mat D12 = read_dense_block(is, "D12", nz, nu);
    Mat D21 = read_dense_block(is, "D21", ny, nw);
    Mat D22 = read_dense_block(is, "D22", ny, nu);
    if (sparse)
        return PlantRealization(std::move(A1s), std::move(B1), std::move(B2),
                                std::move(C1), std::move(C2), std::move(D11),
                                std::move(D12), std::move(D21), std::move(D22));
    return PlantRealization(std::move(A1d), std::move(B1), std::move(B2),
                            std::move(C1), std::move(C2), std::move(D11),
                            std::move(D12), std::move(D21), std::move(D22));
}

PlantRealization read_plant(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    return read_plant(is);
}

void write_controller(std::ostream& os, const Controller& K) {
    os << kControllerTag << '\n';
    os << K.order() << ' ' << K.nu() << ' ' << K.ny() << '\n';
    write_dense_block(os, "Ahat", K.Ahat);
    write_dense_block(os, "Bhat", K.Bhat);
    write_dense_block(os, "Chat", K.Chat);
    write_dense_block(os, "Dhat", K.Dhat);
}

void write_controller(const std::filesystem::path& path, const Controller& K) {
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_controller(os, K);
    if (!os) throw Error("write failed: " + path.string());
}

Controller read_controller(std::istream& is) {
    std::string tag;
    if (!(is >> tag) || tag != kControllerTag)
        throw FormatError("not a locsyn-controller-v1 file");
    int nk, nu, ny;
    if (!(is >> nk >> nu >> ny) || nk < 0 || nu < 0 || ny < 0)
        throw FormatError("bad controller dimension header");
    Mat Ahat = read_dense_block(is, "Ahat", nk, nk);
    Mat Bhat = read_dense_block(is, "Bhat", nk, ny);
    Mat Chat = read_dense_block(is, "Chat", nu, nk);
    Mat Dhat = read_dense_block(is, "Dhat", nu, ny);
    return Controller(std::move(Ahat), std::move(Bhat), std::move(Chat),
                      std::move(Dhat));
}

Controller read_controller(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    return read_controller(is);
}

}  // namespace locsyn
