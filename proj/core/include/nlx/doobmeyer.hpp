#pragma once

#include <ostream>
#include <vector>

#include "nlx/efsde.hpp"
#include "nlx/fexp.hpp"
#include "nlx/lattice.hpp"
#include "nlx/report.hpp"

namespace nlx {

/// Solution of the penalized equation
///   y_k + z.B_k = E[Y_N + z.B_N + sum_{j >= k} n (Y_j - y_j) dt | F_k]
/// at one level n, with A_k = sum_{j<k} n (Y_j - y_j) dt.
struct LevelResult {
    double level = 0.0;
    AdaptedField y;
    AdaptedField a;
    double gap_sup = 0.0;       // max (Y - y)
    double a_terminal_min = 0.0;
    double a_terminal_max = 0.0;
    double a_terminal_mean = 0.0;
    double residual = 0.0;      // decomposition identity defect using this level's A
    double picard_residual = 0.0;
    int iterations = 0;
    bool stiff = false;         // n dt > 1/2: damped Picard
    bool oracle_checked = false;
    double oracle_error = 0.0;  // max |picard - backward_oracle| when checked
    double energy_z = 0.0;      // E sum |Z^n|^2 dt with Z^n the increment projection of y^n
    double energy_a = 0.0;      // E |A_N|^2
};

struct PenalizationRun {
    std::vector<LevelResult> levels;
    CheckReport monotone{"penalization_monotone"};    // Y >= y^{n'} >= y^n for n < n'
    CheckReport increasing{"a_increasing"};           // A_0 = 0, A nondecreasing in k
    CheckReport residual_decrease{"residual_decrease"};
    CheckReport energy{"energy_bound"};               // only filled when a cap is set
};

struct PenalizeOptions {
    double tol = 1e-12;
    bool oracle = true;     // cross-check levels with n dt < 1
    double energy_cap = 0.0; // > 0 adds an energy bound check
    PicardOptions picard{};
};

/// Powers of two n = 1, 2, 4, ... with n dt <= max_ndt, then optionally a
/// final level.
std::vector<double> power_schedule(double dt, double max_ndt = 1e6, double max_level = 0.0);

/// Throws ContractError when Y + z.B fails the one-step supermartingale test
/// or when levels are not increasing and positive.
PenalizationRun penalize(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                         const std::vector<double>& levels, const PenalizeOptions& options = {});

/// max over k, nodes of |E[Y_N + z.B_N + A_N | F_k] - (Y_k + z.B_k + A_k)|.
double decomposition_residual(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                              const AdaptedField& a);

struct DoobMeyerDecomposition {
    AdaptedField a;
    double residual = 0.0;
    double level = 0.0;
    bool converged = false;
    std::vector<double> levels_tried;
    std::vector<double> residuals;
};

/// Walks the schedule (default: power_schedule(dt)) until the identity
/// residual drops to `target`. Reaching the end returns the last level with
/// converged = false.
DoobMeyerDecomposition decompose(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                                 double target, std::vector<double> schedule = {},
                                 const PenalizeOptions& options = {});

/// level,gap_sup,a_T_min,a_T_max,a_T_mean,residual,picard_residual,iterations,stiff,oracle_checked,oracle_error,energy_z,energy_a
void write_levels_csv(std::ostream& out, const PenalizationRun& run);

}  // namespace nlx
