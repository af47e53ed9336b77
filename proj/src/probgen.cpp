#include "locsyn/probgen.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "locsyn/plant_io.hpp"

namespace locsyn {

namespace {

std::vector<int> rect_indices(const GridRect& r, int m) {
    std::vector<int> idx;
    for (int j = r.col0; j <= r.col1; ++j)
        for (int i = r.row0; i <= r.row1; ++i)
            idx.push_back((j - 1) * m + (i - 1));
    return idx;
}

bool rect_ok(const GridRect& r, int m) {
    return r.row0 >= 1 && r.row0 <= r.row1 && r.row1 <= m && r.col0 >= 1 &&
           r.col0 <= r.col1 && r.col1 <= m;
}

}  // namespace

void HeatProblemSpec::validate() const {
    if (grid_m < 2) throw Error("heat spec: grid must be at least 2");
    if (kappa <= 0) throw Error("heat spec: kappa must be positive");
    if (disturbance <= 0) throw Error("heat spec: disturbance weight must be positive");
    if (noise <= 0) throw Error("heat spec: noise weight must be positive");
    if (std::abs(conv_x) > 1e4 || std::abs(conv_y) > 1e4)
        throw Error("heat spec: convection magnitude out of range");
    if (actuators.size() != 2) throw Error("heat spec: exactly 2 actuators required");
    if (sensors.size() < 2 || sensors.size() > 4)
        throw Error("heat spec: between 2 and 4 sensors required");
    for (const auto& r : actuators)
        if (!rect_ok(r, grid_m)) throw Error("heat spec: actuator region out of grid");
    for (const auto& r : sensors)
        if (!rect_ok(r, grid_m)) throw Error("heat spec: sensor region out of grid");
    std::set<int> a0set;
    for (int i : rect_indices(actuators[0], grid_m)) a0set.insert(i);
    for (int i : rect_indices(actuators[1], grid_m))
        if (a0set.count(i)) throw Error("heat spec: actuator regions overlap");
}

HeatProblemSpec default_heat_spec(int grid_m, int n_y) {
    if (n_y < 2 || n_y > 4) throw Error("default heat spec: n_y must be 2..4");
    HeatProblemSpec s;
    s.grid_m = grid_m;
    auto rect = [&](double r0, double r1, double c0, double c1) {
        auto clampi = [&](double f) {
            return std::min(grid_m, std::max(1, static_cast<int>(
                                                    std::lround(f * grid_m))));
        };
        GridRect g{clampi(r0), clampi(r1), clampi(c0), clampi(c1)};
        if (g.row1 < g.row0) g.row1 = g.row0;
        if (g.col1 < g.col0) g.col1 = g.col0;
        return g;
    };
    s.actuators = {rect(0.15, 0.25, 0.15, 0.25), rect(0.70, 0.80, 0.70, 0.80)};
    s.sensors = {rect(0.15, 0.25, 0.70, 0.80), rect(0.70, 0.80, 0.15, 0.25)};
    if (n_y >= 3) s.sensors.push_back(rect(0.45, 0.55, 0.45, 0.55));
    if (n_y >= 4) s.sensors.push_back(rect(0.40, 0.50, 0.08, 0.18));
    s.validate();
    return s;
}

PlantRealization generate_fom(const HeatProblemSpec& spec) {
    spec.validate();
    const int m = spec.grid_m;
    const int nx = m * m;
    const double h = 1.0 / (m + 1);
    const double kd = spec.kappa / (h * h);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(5 * nx));
    auto idx = [&](int i, int j) { return (j - 1) * m + (i - 1); };
    for (int j = 1; j <= m; ++j) {
        for (int i = 1; i <= m; ++i) {
            const int k = idx(i, j);
            double diag = -4.0 * kd;
            if (i > 1) trips.emplace_back(k, idx(i - 1, j), kd);
            if (i < m) trips.emplace_back(k, idx(i + 1, j), kd);
            if (j > 1) trips.emplace_back(k, idx(i, j - 1), kd);
            if (j < m) trips.emplace_back(k, idx(i, j + 1), kd);
            // first-order upwind convection, -c . grad(u)
            if (spec.conv_x > 0) {
                diag -= spec.conv_x / h;
                if (i > 1) trips.emplace_back(k, idx(i - 1, j), spec.conv_x / h);
            } else if (spec.conv_x < 0) {
                diag += spec.conv_x / h;
                if (i < m) trips.emplace_back(k, idx(i + 1, j), -spec.conv_x / h);
            }
            if (spec.conv_y > 0) {
                diag -= spec.conv_y / h;
                if (j > 1) trips.emplace_back(k, idx(i, j - 1), spec.conv_y / h);
            } else if (spec.conv_y < 0) {
                diag += spec.conv_y / h;
                if (j < m) trips.emplace_back(k, idx(i, j + 1), -spec.conv_y / h);
            }
            trips.emplace_back(k, k, diag);
        }
    }
    SpMat A1(nx, nx);
    A1.setFromTriplets(trips.begin(), trips.end());

    const int ny = spec.ny();
    Mat B2 = Mat::Zero(nx, 2);
    for (int a = 0; a < 2; ++a) {
        const auto ids = rect_indices(spec.actuators[a], m);
        const double v = 1.0 / std::sqrt(static_cast<double>(ids.size()));
        for (int i : ids) B2(i, a) = v;
    }
    Mat C2 = Mat::Zero(ny, nx);
    for (int s = 0; s < ny; ++s) {
        const auto ids = rect_indices(spec.sensors[s], m);
        const double v = 1.0 / static_cast<double>(ids.size());
        for (int i : ids) C2(s, i) = v;
    }

    const int nw = nx + 2;
    Mat B1 = Mat::Zero(nx, nw);
    B1.leftCols(nx) = spec.disturbance * Mat::Identity(nx, nx);
    Mat C1 = Mat::Identity(nx, nx);
    Mat D11 = Mat::Zero(nx, nw);
    Mat D12 = Mat::Zero(nx, 2);
    Mat D21 = Mat::Zero(ny, nw);
    D21.rightCols(2) = spec.noise * Mat::Ones(ny, 2);
    Mat D22 = Mat::Zero(ny, 2);

    return PlantRealization(std::move(A1), std::move(B1), std::move(B2),
                            std::move(C1), std::move(C2), std::move(D11),
                            std::move(D12), std::move(D21), std::move(D22));
}

ProblemPair reduce_modal(const PlantRealization& fom, int r) {
    const int nx = fom.nx();
    if (r < 1 || r >= nx) throw Error("reduction order must satisfy 1 <= r < n_x");
    const Mat A = fom.A1_as_dense();
    const bool symmetric = (A - A.transpose()).cwiseAbs().maxCoeff() == 0.0;

    Mat basis(nx, r);
    if (symmetric) {
        Eigen::SelfAdjointEigenSolver<Mat> es(A);
        if (es.info() != Eigen::Success)
            throw EigensolverFailure("symmetric eigendecomposition failed");
        // ascending order; rightmost are the last r
        for (int c = 0; c < r; ++c)
            basis.col(c) = es.eigenvectors().col(nx - 1 - c);
    } else {
        Eigen::EigenSolver<Mat> es(A);
        if (es.info() != Eigen::Success)
            throw EigensolverFailure("eigendecomposition failed");
        const CVec lam = es.eigenvalues();
        std::vector<int> order(nx);
        for (int i = 0; i < nx; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (lam(a).real() != lam(b).real())
                return lam(a).real() > lam(b).real();
            if (std::abs(lam(a).imag()) != std::abs(lam(b).imag()))
                return std::abs(lam(a).imag()) > std::abs(lam(b).imag());
            return lam(a).imag() > lam(b).imag();
        });
        const double scale = std::max(1.0, A.norm());
        int cols = 0;
        for (size_t oi = 0; oi < order.size() && cols < r; ++oi) {
            const int i = order[oi];
            const double im = lam(i).imag();
            if (im < -1e-12 * scale) continue;  // partner of a handled pair
            const CVec v = es.eigenvectors().col(i);
            if (im > 1e-12 * scale) {
                basis.col(cols++) = v.real();
                if (cols < r)
                    basis.col(cols++) = v.imag();
                // else: pair straddles the cut; keep the real part only
            } else {
                const Vec vr = v.real(), vi = v.imag();
                basis.col(cols++) = (vr.norm() >= vi.norm()) ? vr : vi;
            }
        }
        if (cols < r)
            throw EigensolverFailure("could not assemble a modal basis");
    }

    Eigen::HouseholderQR<Mat> qr(basis);
    Mat V = qr.householderQ() * Mat::Identity(nx, r);

    Mat A1r = V.transpose() * (fom.sparse() ? Mat(fom.A1_sparse() * V)
                                            : Mat(fom.A1_dense() * V));
    PlantRealization rom(std::move(A1r), V.transpose() * fom.B1,
                         V.transpose() * fom.B2, fom.C1 * V, fom.C2 * V,
                         fom.D11, fom.D12, fom.D21, fom.D22);
    return ProblemPair{fom, std::move(rom), std::move(V)};
}

namespace {

// Standard normals from MT19937-64 via Box-Muller on 53-bit uniforms.
class NormalStream {
  public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}
    double next() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * M_PI * u2;
        spare_ = rad * std::sin(ang);
        have_ = true;
        return rad * std::cos(ang);
    }

  private:
    double uniform() {
        return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }
    std::mt19937_64 rng_;
    bool have_ = false;
    double spare_ = 0.0;
};

}  // namespace

Controller random_controller(ControllerDims dims, int n_k, std::uint64_t seed,
                             double scale) {
    if (n_k < 0) throw Error("controller order must be >= 0");
    NormalStream ns(seed);
    Vec flat(Controller::flat_size(n_k, dims.n_u, dims.n_y));
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = scale * ns.next();
    return Controller::from_flat(n_k, dims.n_u, dims.n_y, flat);
}

void write_heat_spec(const std::filesystem::path& path,
                     const HeatProblemSpec& spec) {
    spec.validate();
    std::ofstream os(path);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << "locsyn-heatspec-v1\n";
    os << "grid " << spec.grid_m << '\n';
    os << "kappa " << format_double(spec.kappa) << '\n';
    os << "convection " << format_double(spec.conv_x) << ' '
       << format_double(spec.conv_y) << '\n';
    os << "disturbance " << format_double(spec.disturbance) << '\n';
    os << "noise " << format_double(spec.noise) << '\n';
    os << "seed " << spec.seed << '\n';
    for (const auto& r : spec.actuators)
        os << "actuator rect " << r.row0 << ' ' << r.row1 << ' ' << r.col0
           << ' ' << r.col1 << '\n';
    for (const auto& r : spec.sensors)
        os << "sensor rect " << r.row0 << ' ' << r.row1 << ' ' << r.col0 << ' '
           << r.col1 << '\n';
}

HeatProblemSpec read_heat_spec(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open " + path.string());
    std::string tag;
    if (!(is >> tag) || tag != "locsyn-heatspec-v1")
        throw FormatError("not a locsyn-heatspec-v1 file");
    HeatProblemSpec s;
    s.actuators.clear();
    s.sensors.clear();
    std::string key;
    while (is >> key) {
        if (key == "grid") {
            if (!(is >> s.grid_m)) throw FormatError("bad grid line");
        } else if (key == "kappa") {
            if (!(is >> s.kappa)) throw FormatError("bad kappa line");
        } else if (key == "convection") {
            if (!(is >> s.conv_x >> s.conv_y))
                throw FormatError("bad convection line");
        } else if (key == "disturbance") {
            if (!(is >> s.disturbance)) throw FormatError("bad disturbance line");
        } else if (key == "noise") {
            if (!(is >> s.noise)) throw FormatError("bad noise line");
        } else if (key == "seed") {
            if (!(is >> s.seed)) throw FormatError("bad seed line");
        } else if (key == "actuator" || key == "sensor") {
            std::string kind;
            GridRect r;
            if (!(is >> kind >> r.row0 >> r.row1 >> r.col0 >> r.col1) ||
                kind != "rect")
                throw FormatError("bad region line");
            (key == "actuator" ? s.actuators : s.sensors).push_back(r);
        } else {
            throw FormatError("unknown heat spec key: " + key);
        }
    }
    s.validate();
    return s;
}

std::vector<SuiteProblem> default_suite() {
    std::vector<SuiteProblem> suite;
    auto add = [&](std::string name, int m, int n_y, double cx, double cy,
                   int r, int nk, std::uint64_t seed) {
        HeatProblemSpec s = default_heat_spec(m, n_y);
        s.conv_x = cx;
        s.conv_y = cy;
        s.seed = seed;
        suite.push_back(SuiteProblem{std::move(name), std::move(s), r, nk});
    };
    // Diffusion-only problems.
    add("hf20a", 20, 3, 0.0, 0.0, 40, 10, 101);
    add("hf20b", 20, 2, 0.0, 0.0, 30, 4, 102);
    add("hf25a", 25, 4, 0.0, 0.0, 50, 10, 103);
    add("hf25b", 25, 2, 0.0, 0.0, 40, 4, 104);
    add("hf30a", 30, 3, 0.0, 0.0, 40, 10, 105);
    add("hf30b", 30, 4, 0.0, 0.0, 50, 4, 106);
    // Convection problems; strengths calibrated so aggressive ROM-only
    // designs destabilize the full model on several of these.
    add("cd20a", 20, 2, 42.0, 21.0, 30, 10, 111);
    add("cd20b", 20, 4, 30.0, 15.0, 40, 10, 112);
    add("cd25a", 25, 2, 52.0, 26.0, 30, 10, 113);
    add("cd25b", 25, 3, 36.0, 24.0, 40, 4, 114);
    add("cd30a", 30, 2, 60.0, 30.0, 30, 10, 115);
    add("cd30b", 30, 3, 45.0, 22.0, 50, 4, 116);
    return suite;
}

}  // namespace locsyn
