#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "locsyn/plant.hpp"

namespace locsyn {

// Rectangular region of interior grid points, 1-based inclusive bounds.
struct GridRect {
    int row0 = 1, row1 = 1, col0 = 1, col1 = 1;
};

// 2D heat-flow plant on an m x m interior grid (unit square, Dirichlet
// boundary, spacing h = 1/(m+1)):
//
//   u_t = kappa * lap(u) - conv_x * u_x - conv_y * u_y + actuation + noise
//
// Dimension pattern: n_x = m^2, n_w = n_x + 2, n_z = n_x, n_u = 2,
// n_y = #sensors. Actuators inject normalized indicators over two disjoint
// rectangles; sensors average the state over their rectangles.
struct HeatProblemSpec {
    int grid_m = 10;
    double kappa = 1.0;
    double conv_x = 0.0;
    double conv_y = 0.0;
    std::vector<GridRect> actuators;  // exactly 2, disjoint
    std::vector<GridRect> sensors;    // 2..4
    double disturbance = 1e-2;        // w_d: state disturbance weight in B1
    double noise = 1e-2;              // eta: measurement noise weight in D21
    std::uint64_t seed = 0;

    void validate() const;
    int nx() const { return grid_m * grid_m; }
    int ny() const { return static_cast<int>(sensors.size()); }
};

// Default actuator/sensor placement scaled to the grid.
HeatProblemSpec default_heat_spec(int grid_m, int n_y);

PlantRealization generate_fom(const HeatProblemSpec& spec);

// Galerkin modal reduction: orthonormalized real basis of the r rightmost
// eigenvectors of A1 (complex pairs realified).
struct ProblemPair {
    PlantRealization fom;
    PlantRealization rom;
    Mat basis;  // n_x x r, orthonormal columns
};

ProblemPair reduce_modal(const PlantRealization& fom, int r);

struct ControllerDims {
    int n_u = 0;
    int n_y = 0;
};

// Entries i.i.d. standard normal scaled by `scale`, drawn from MT19937-64
// with Box-Muller in flat-vector order; bit-reproducible for a fixed seed.
Controller random_controller(ControllerDims dims, int n_k, std::uint64_t seed,
                             double scale = 1e-2);

// Heat spec text format "locsyn-heatspec-v1".
void write_heat_spec(const std::filesystem::path& path,
                     const HeatProblemSpec& spec);
HeatProblemSpec read_heat_spec(const std::filesystem::path& path);

// One problem of the default benchmark suite.
struct SuiteProblem {
    std::string name;
    HeatProblemSpec spec;
    int rom_order = 40;
    int n_k = 10;
};

// Twelve desk-scale problems spanning grid sizes, sensor counts, reduction
// orders and controller orders, with and without convection. The convection
// strengths were calibrated so that several ROM-only designs destabilize
// the full model.
std::vector<SuiteProblem> default_suite();

}  // namespace locsyn
