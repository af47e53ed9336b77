#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "locsyn/arnoldi.hpp"
#include "locsyn/hinf_norm.hpp"
#include "locsyn/plant.hpp"

namespace locsyn {

enum class SynthesisMode { R_ONLY, R_PLUS_F };
enum class SynthesisAlgorithm { ALG1, ALG2 };

const char* to_string(SynthesisMode m);
const char* to_string(SynthesisAlgorithm a);
SynthesisMode mode_from_string(const std::string& s);
SynthesisAlgorithm algorithm_from_string(const std::string& s);

struct SynthesisConfig {
    SynthesisMode mode = SynthesisMode::R_PLUS_F;
    SynthesisAlgorithm algorithm = SynthesisAlgorithm::ALG2;
    double norm_tol = 1e-14;
    double stat_tol = 1e-8;
    int phase_a_maxit = 1000;
    int phase_b_maxit_cumulative = 1000;
    std::uint64_t seed = 0;
    // first norm call uses the full initialization grid; subsequent calls
    // warm-start from the previous peak frequency
    int norm_grid_points = 128;
    int norm_grid_points_warm = 32;
    ArnoldiOptions arnoldi;
};

struct SynthesisProblem {
    PlantRealization rom;  // dense A1
    PlantRealization fom;  // sparse A1
    int n_k = 0;
    SynthesisConfig config;

    void validate() const;
};

struct HistoryRow {
    char phase = 'I';  // 'I' initial point, 'A' stabilize, 'B' optimize
    int iteration = 0;
    double norm = std::numeric_limits<double>::quiet_NaN();
    double alpha_rom = std::numeric_limits<double>::quiet_NaN();
    double alpha_fom = std::numeric_limits<double>::quiet_NaN();
    double seconds = 0.0;
};

enum class SynthesisStatus {
    StationaritySatisfied,
    MaxIterations,
    LineSearchFailure,
    StabilizationFailed,
};
const char* to_string(SynthesisStatus s);
SynthesisStatus synthesis_status_from_string(const std::string& s);

struct SynthesisResult {
    Controller best_K;
    double F_best = std::numeric_limits<double>::infinity();
    double alpha_rom = std::numeric_limits<double>::quiet_NaN();
    double alpha_fom = std::numeric_limits<double>::quiet_NaN();
    // F tracked during the run at best_K (mode objective); the stored
    // F_best comes from an independent final evaluation
    double F_tracked = std::numeric_limits<double>::infinity();
    std::vector<HistoryRow> history;
    SynthesisStatus status = SynthesisStatus::MaxIterations;
    int phase_a_iterations = 0;
    int phase_b_iterations = 0;
    int restabilizations = 0;
    double seconds = 0.0;
};

// F(K): alpha(ROM closed loop) densely, alpha(FOM closed loop) via the
// matrix-free eigensolver; the ROM norm is computed only when both are
// strictly negative, otherwise F = +inf.
struct FEvaluation {
    double F = std::numeric_limits<double>::infinity();
    double alpha_rom = 0.0;
    double alpha_fom = 0.0;
    std::optional<NormResult> norm;
};
FEvaluation evaluate_F(const SynthesisProblem& problem, const Controller& K);

// max(alpha_rom, alpha_fom) with the gradient of the attaining branch
// (ties go to the FOM branch); in R_ONLY mode the FOM term is dropped.
std::pair<double, ControllerGradient> stabilization_objective(
    const SynthesisProblem& problem, const Controller& K);

SynthesisResult algorithm1(const SynthesisProblem& problem,
                           const Controller& K0);
SynthesisResult algorithm2(const SynthesisProblem& problem,
                           const Controller& K0);
SynthesisResult synthesize(const SynthesisProblem& problem,
                           const Controller& K0);

// Result file ("locsyn-result-v1", controller embedded) and the history
// table as CSV (columns: phase,iter,norm,alpha_rom,alpha_fom,seconds).
void write_result(const std::filesystem::path& path,
                  const SynthesisResult& result, SynthesisAlgorithm algorithm,
                  SynthesisMode mode);
SynthesisResult read_result(const std::filesystem::path& path);
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& history);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

}  // namespace locsyn
