#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nlx/fexp.hpp"
#include "nlx/generators.hpp"
#include "nlx/lattice.hpp"
#include "nlx/report.hpp"

namespace nlx {

/// Driver f(t_k, y) of a BSDE under an F-expectation. The node argument lets
/// the penalization driver n (Y_k - y) read the obstacle at the same node; all
/// other catalogue drivers ignore it.
struct EfsdeDriver {
    using Fn = std::function<double(int step, std::size_t node, double y)>;

    std::string name;
    Fn fn;
    double lipschitz = 0.0;

    double operator()(int step, std::size_t node, double y) const { return fn(step, node, y); }

    static EfsdeDriver zero();
    static EfsdeDriver constant(double c);
    /// f = a * y.
    static EfsdeDriver linear(double a);
    /// Piecewise linear in y through (ys[i], fs[i]), linear beyond the ends.
    static EfsdeDriver table(std::vector<double> ys, std::vector<double> fs);
    /// f = n (Y_k - y) for an adapted obstacle Y.
    static EfsdeDriver penalty(double n, AdaptedField obstacle);
};

/// Samples |f(t, y1) - f(t, y2)| <= lambda |y1 - y2| on every step.
ValidationReport validate_driver(const EfsdeDriver& f, const FiltrationTree& tree, std::uint64_t seed = 0x5eed2014ULL,
                                 int draws = 256);

/// y_k + z.B_k = E[X + z.B_N + sum_{j >= k} (f(t_j, y_j) + eta_j) dt | F_k].
struct EfsdeProblem {
    FExpectation e;
    EfsdeDriver f;
    Slice terminal;
    std::vector<double> z;           // d components; empty means 0
    std::optional<AdaptedField> eta; // scalar source on steps 0..N-1

    EfsdeProblem(FExpectation op, EfsdeDriver driver, Slice x, std::vector<double> direction = {},
                 std::optional<AdaptedField> source = std::nullopt);
};

struct PicardOptions {
    double tol = 1e-12;
    int max_iter = 0;  // per window; 0 means 10 * ceil(log2(1 / tol))
    bool preflight_translation = true;
};

struct PicardResult {
    AdaptedField y;
    int iterations = 0;             // summed over windows
    int max_window_iterations = 0;
    int windows = 0;
    int window_steps = 0;
    bool relaxed = false;           // stiff windows used the damped update
    double residual = 0.0;          // sup-node defect of the defining equation
};

/// Picard iteration on windows of min(T, 1/(2 lambda)) (at least one step),
/// patched backward from T. Within a window the map is evaluated in the
/// translation form
///   I(u)_k = E[y_e + z.B_e + sum_{s <= j < e} (f_j(u_j) + eta_j) dt | F_k]
///            - z.B_k - sum_{s <= j < k} (f_j(u_j) + eta_j) dt.
/// When lambda dt > 1/2 a one-step window is no longer a contraction, and the
/// update is damped to u + w (I(u) - u) with w = 1 / (1 + lambda dt).
PicardResult picard_solve(const EfsdeProblem& problem, const PicardOptions& options = {});

/// Nodewise backward recursion y_k = C_k + (f(t_k, y_k) + eta_k) dt with
/// C_k = E[y_{k+1} + z.B_{k+1} | F_k] - z.B_k, solved by a scalar fixed point
/// to 1e-14. Requires lambda dt < 1.
AdaptedField backward_oracle(const EfsdeProblem& problem);

/// Sup-node defect of the defining equation, one full sweep per step.
double fixed_point_residual(const EfsdeProblem& problem, const AdaptedField& y);

/// z.B_k on the nodes of step k.
Slice direction_brownian(const FiltrationTree& tree, const std::vector<double>& z, int k);

/// y_k + z.B_k + sum_{j<k} (f(t_j, y_j) + eta_j) dt.
AdaptedField martingale_process(const EfsdeProblem& problem, const AdaptedField& y);

/// Solves both problems and asserts ybar >= y - tol nodewise. Requires the
/// same operator and direction, Xbar >= X and etabar >= eta.
CheckReport compare_solutions(const EfsdeProblem& problem, const EfsdeProblem& problem_bar, double tol = 1e-10,
                              const PicardOptions& options = {});

}  // namespace nlx
