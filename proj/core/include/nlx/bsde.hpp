#pragma once

#include <span>

#include <nlohmann/json.hpp>

#include "nlx/generators.hpp"
#include "nlx/lattice.hpp"
#include "nlx/report.hpp"

namespace nlx {

enum class Scheme { Explicit, Implicit };

const char* to_string(Scheme scheme);

/// Discrete BSDE solution. Y is defined on [to, from], Z on [to, from - 1].
struct BsdeSolution {
    AdaptedField y;
    AdaptedField z;
    Scheme scheme = Scheme::Explicit;
    int from_step = 0;
    int to_step = 0;
};

struct BsdeOptions {
    Scheme scheme = Scheme::Explicit;
    double implicit_tol = 1e-13;
    int implicit_max_iter = 10000;
};

/// Backward recursion Z_k = project_increment(Y_{k+1}) and
///   explicit: Y_k = E[Y_{k+1}|F_k] + dt g(t_k, E[Y_{k+1}|F_k], Z_k)
///   implicit: Y_k = E[Y_{k+1}|F_k] + dt g(t_k, Y_k, Z_k)   (scalar fixed point)
/// started from `claim` at step `from` and run down to step `to`.
BsdeSolution solve_bsde(const Generator& g, std::span<const double> claim, int from, int to, const TreePtr& tree,
                        const BsdeOptions& options = {});
/// Full horizon: claim on the leaves, solved down to step 0.
BsdeSolution solve_bsde(const Generator& g, std::span<const double> terminal, const TreePtr& tree,
                        const BsdeOptions& options = {});

/// E^g[xi | F_t] as a slice at step t.
Slice g_expectation(const Generator& g, std::span<const double> terminal, int t, const TreePtr& tree,
                    const BsdeOptions& options = {});

/// Martingale representation of an adapted process y on [0, N]:
///   Z_k = project_increment(y_{k+1}),  g_k = (y_k - E[y_{k+1}|F_k]) / dt,
/// with a nodewise report of |g_k| <= phi(|Z_k|) + tol. Scalar trees only.
struct Representation {
    AdaptedField g;
    AdaptedField z;
    CheckReport bound;
};

Representation extract_representation(const AdaptedField& y, const Modulus& phi, double tol = 1e-12);

/// |g^X - g^Y| <= phi(|Z^X - Z^Y|) nodewise for two extracted representations.
CheckReport representation_pair_check(const Representation& x, const Representation& y, const Modulus& phi,
                                      double tol = 1e-12);

/// Asserts Y^1 >= Y^2 - tol on every node, given xi_1 >= xi_2 on the leaves.
CheckReport comparison_check(const Generator& g, std::span<const double> xi1, std::span<const double> xi2,
                             const TreePtr& tree, double tol = 1e-12, const BsdeOptions& options = {});

/// {"Y": [[..]..], "Z": [[..]..], "meta": {..}}
nlohmann::json to_json(const BsdeSolution& solution, const Generator* g = nullptr);

}  // namespace nlx
