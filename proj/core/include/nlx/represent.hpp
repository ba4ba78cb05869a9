#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlx/bsde.hpp"
#include "nlx/corpus.hpp"
#include "nlx/fexp.hpp"
#include "nlx/generators.hpp"
#include "nlx/lattice.hpp"
#include "nlx/report.hpp"

namespace nlx {

enum class Interpolation {
    LinearInNorm,  // isotropic table, piecewise linear in |z|
    Linear1D,      // d = 1, piecewise linear in signed z
    NearestGrid,   // anisotropic d > 1
};

const char* to_string(Interpolation rule);
Interpolation interpolation_from_string(const std::string& name);

/// Tabulated g(t_k, z) on a finite z-grid, one row per step. Queries outside
/// the grid extrapolate linearly from the end segment and are flagged.
class RecoveredGenerator {
public:
    RecoveredGenerator(double horizon, int steps, int dim, std::vector<std::vector<double>> z_grid,
                       std::vector<std::vector<double>> table, Interpolation rule, Modulus phi);

    double horizon() const { return horizon_; }
    int steps() const { return steps_; }
    int dim() const { return dim_; }
    double dt() const { return horizon_ / static_cast<double>(steps_); }
    const std::vector<std::vector<double>>& z_grid() const { return z_grid_; }
    /// table()[k][i] = g(t_k, z_grid()[i]); a single row serves every step.
    const std::vector<std::vector<double>>& table() const { return table_; }
    Interpolation rule() const { return rule_; }
    const Modulus& phi() const { return phi_; }
    /// Largest |z| that needs no extrapolation.
    double reach() const { return reach_; }

    /// *extrapolated is only ever set to true, so one flag can cover a batch.
    double operator()(int step, std::span<const double> z, bool* extrapolated = nullptr) const;
    /// Step index of time t on the recovery grid.
    int step_of(double t) const;

    double richardson = 0.0;  // max |g_1 - g_2| between one- and two-step recovery

private:
    struct Axis {
        std::vector<double> keys;
        std::vector<double> values;
    };
    double interpolate(const Axis& axis, double x, bool* extrapolated) const;

    double horizon_;
    int steps_;
    int dim_;
    std::vector<std::vector<double>> z_grid_;
    std::vector<std::vector<double>> table_;
    Interpolation rule_;
    Modulus phi_;
    double reach_ = 0.0;
    double lower_ = 0.0;
    std::vector<Axis> axes_;  // per table row, for the linear rules
};

struct RecoverOptions {
    std::size_t reference_node = 0;
    double node_tol = 1e-10;  // one-step values must agree across nodes
    bool richardson = true;
    std::optional<Interpolation> rule;  // chosen from the table when unset
};

/// d = 1 grid given as scalars.
std::vector<std::vector<double>> scalar_grid(const std::vector<double>& zs);
/// Points r e_j and r (+-1, .., +-1)/sqrt(d) for every radius, plus 0.
std::vector<std::vector<double>> isotropic_grid(int dim, const std::vector<double>& radii);

/// g(t_k, z) = E[z.(B_{k+1} - B_k) | F_k] / dt at every step k < N, checked
/// to be the same at every node of the step. 0 is always added to the grid.
RecoveredGenerator recover_generator(const FExpectation& e, std::vector<std::vector<double>> z_grid,
                                     const RecoverOptions& options = {});
/// Single-step row of the same construction; with m = 2 the claim is
/// z.(B_{k+2} - B_k) and the value is divided by 2 dt.
std::vector<double> recover_row(const FExpectation& e, const std::vector<std::vector<double>>& z_grid, int step,
                                int m = 1, const RecoverOptions& options = {});

/// Cross-check route: for each z decompose Y_k = -phi(|z|) t_k along z and
/// read g = phi(|z|) - (A_{k+1} - A_k) / dt at the reference node.
RecoveredGenerator recover_via_doob_meyer(const FExpectation& e, std::vector<std::vector<double>> z_grid,
                                          const Modulus& phi, double target = 1e-9,
                                          const RecoverOptions& options = {});

/// Driver that evaluates the table; y-independent with g(t, y, 0) = g(t, 0).
Generator to_generator(const RecoveredGenerator& g);

nlohmann::json to_json(const RecoveredGenerator& g);
RecoveredGenerator recovered_from_json(const nlohmann::json& doc);

/// g(t, 0) = 0, |g(t, z)| <= phi(|z|) and |g(t, z) - g(t, w)| <= phi(|z - w|)
/// over the grid, row by row.
CheckReport check_recovered_modulus(const RecoveredGenerator& g, const Modulus& phi, double tol = 1e-10);

/// Distinct Z values of E[X|F_k] over the claims (d = 1).
std::vector<double> scan_z_values(const FExpectation& e, const std::vector<NamedClaim>& claims);
/// Union of the base grid, the scanned values and their negatives.
std::vector<std::vector<double>> covering_grid(const std::vector<double>& base, const std::vector<double>& scanned);

struct ExtrapolationFlag {
    std::string claim;
    int step = 0;
    std::size_t node = 0;
    double z = 0.0;  // |Z| at the node
};

struct VerificationReport {
    CheckReport check{"verify_representation"};
    std::vector<std::string> claims;
    std::vector<double> max_error;                 // per claim
    std::vector<std::vector<double>> step_error;   // per claim, per step
    std::vector<ExtrapolationFlag> extrapolated;   // first few only
    std::size_t extrapolated_count = 0;

    double worst() const;
};

nlohmann::json to_json(const VerificationReport& report);

/// Solves E^g for the tabulated driver and compares with E nodewise.
VerificationReport verify_representation(const FExpectation& e, const RecoveredGenerator& g,
                                         const std::vector<NamedClaim>& claims, double tol = 1e-10);

struct UniquenessReport {
    CheckReport check{"uniqueness"};
    double max_difference = 0.0;
};

/// max |g1 - g2| over the z-grid and the given steps.
UniquenessReport uniqueness_probe(const RecoveredGenerator& g1, const RecoveredGenerator& g2,
                                  const std::vector<std::vector<double>>& z_grid, const std::vector<int>& steps,
                                  double tol = 1e-10);

struct NullIntegralResult {
    double residual = 0.0;
    std::size_t extrapolated = 0;
};

/// E^g[- sum_{r <= j < t} g(t_j, eta_j) dt + sum_{r <= j < t} eta_j.(B_{j+1} - B_j) | F_r]
/// by backward induction; eta has width d and must be defined on [r, t).
NullIntegralResult null_integral_check(const RecoveredGenerator& g, const TreePtr& tree, const AdaptedField& eta,
                                       int r, int t);

}  // namespace nlx
