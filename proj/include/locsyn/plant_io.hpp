#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "locsyn/plant.hpp"

namespace locsyn {

// Plant file format "locsyn-plant-v1":
//
//   locsyn-plant-v1
//   <n_x> <n_w> <n_u> <n_z> <n_y>
//   A1 sparse <nnz>            (or: A1 dense)
//   <row> <col> <value>        1-based triplets, nnz lines
//   B1 dense
//   <row-major whitespace-separated block>
//   ... B2 C1 C2 D11 D12 D21 D22 in this order ...
//
// Controller file format "locsyn-controller-v1":
//
//   locsyn-controller-v1
//   <n_K> <n_u> <n_y>
//   Ahat dense
//   ...
//   Bhat / Chat / Dhat blocks likewise.
//
// Values are written with 17 significant digits so write/read round-trips
// bit-exactly.

void write_plant(std::ostream& os, const PlantRealization& plant);
void write_plant(const std::filesystem::path& path,
                 const PlantRealization& plant);
PlantRealization read_plant(std::istream& is);
PlantRealization read_plant(const std::filesystem::path& path);

void write_controller(std::ostream& os, const Controller& K);
void write_controller(const std::filesystem::path& path, const Controller& K);
Controller read_controller(std::istream& is);
Controller read_controller(const std::filesystem::path& path);

// Full-precision decimal formatting used by all text outputs.
std::string format_double(double x);

}  // namespace locsyn
