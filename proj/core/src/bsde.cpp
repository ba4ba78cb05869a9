#include "nlx/bsde.hpp"

#include <cmath>
#include <string>

#include "nlx/error.hpp"
#include "nlx/field_io.hpp"
#include "nlx/parallel.hpp"

namespace nlx {

namespace {

void require_finite(std::span<const double> values, int step, const char* what)
{
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(std::string(what) + ": non-finite value at step " + std::to_string(step) + ", node " +
                               std::to_string(i));
        }
    }
}

}  // namespace

const char* to_string(Scheme scheme)
{
    return scheme == Scheme::Explicit ? "explicit" : "implicit";
}

BsdeSolution solve_bsde(const Generator& g, std::span<const double> claim, int from, int to, const TreePtr& tree,
                        const BsdeOptions& options)
{
    if (to < 0 || to > from || from > tree->steps()) {
        throw ContractError("solve_bsde: need 0 <= to <= from <= N");
    }
    tree->check_slice(claim, from);
    require_finite(claim, from, "solve_bsde terminal claim");
    const double dt = tree->dt();
    const bool implicit_solve = options.scheme == Scheme::Implicit && g.flags().depends_on_y;
    if (options.scheme == Scheme::Implicit && g.lipschitz_y() * dt >= 1.0) {
        throw ContractError("solve_bsde: implicit scheme needs K*dt < 1 (K = " + std::to_string(g.lipschitz_y()) +
                            ", dt = " + std::to_string(dt) + ")");
    }

    const auto d = static_cast<std::size_t>(tree->dim());
    BsdeSolution sol{AdaptedField(tree), AdaptedField(tree, tree->dim()), options.scheme, from, to};
    sol.y.set(from, Slice(claim.begin(), claim.end()));

    for (int k = from - 1; k >= to; --k) {
        auto next = sol.y.at(k + 1);
        Slice mean = tree->cond_expect(next, k);
        Slice z = tree->project_increment(next, k);
        const double t = tree->time(k);
        Slice y(mean.size());
        std::vector<char> stalled(implicit_solve ? mean.size() : 0, 0);
        parallel_for(mean.size(), [&](std::size_t node) {
            std::span<const double> zk(z.data() + node * d, d);
            const double m = mean[node];
            double value = m + dt * g(t, m, zk);
            if (implicit_solve) {
                bool converged = false;
                for (int it = 0; it < options.implicit_max_iter; ++it) {
                    const double updated = m + dt * g(t, value, zk);
                    const double change = std::abs(updated - value);
                    value = updated;
                    if (change <= options.implicit_tol * std::max(1.0, std::abs(value))) {
                        converged = true;
                        break;
                    }
                }
                if (!converged) {
                    stalled[node] = 1;
                }
            }
            y[node] = value;
        });
        for (std::size_t node = 0; node < stalled.size(); ++node) {
            if (stalled[node]) {
                throw NumericError("solve_bsde: implicit fixed point did not converge at step " + std::to_string(k) +
                                   ", node " + std::to_string(node));
            }
        }
        require_finite(y, k, "solve_bsde");
        sol.y.set(k, std::move(y));
        sol.z.set(k, std::move(z));
    }
    return sol;
}

BsdeSolution solve_bsde(const Generator& g, std::span<const double> terminal, const TreePtr& tree,
                        const BsdeOptions& options)
{
    return solve_bsde(g, terminal, tree->steps(), 0, tree, options);
}

Slice g_expectation(const Generator& g, std::span<const double> terminal, int t, const TreePtr& tree,
                    const BsdeOptions& options)
{
    if (t < 0 || t > tree->steps()) {
        throw ContractError("g_expectation: step outside the grid");
    }
    const BsdeSolution sol = solve_bsde(g, terminal, tree->steps(), t, tree, options);
    auto slice = sol.y.at(t);
    return Slice(slice.begin(), slice.end());
}

Representation extract_representation(const AdaptedField& y, const Modulus& phi, double tol)
{
    const FiltrationTree& tree = y.tree();
    if (tree.dim() != 1) {
        throw ContractError("extract_representation: only d = 1 has an exact predictable representation on the tree");
    }
    if (y.width() != 1) {
        throw ContractError("extract_representation: process must be scalar");
    }
    Representation rep{AdaptedField(y.tree_ptr()), AdaptedField(y.tree_ptr()), CheckReport("representation_bound")};
    const double dt = tree.dt();
    for (int k = tree.steps() - 1; k >= 0; --k) {
        auto next = y.at(k + 1);
        auto current = y.at(k);
        Slice mean = tree.cond_expect(next, k);
        Slice z = tree.project_increment(next, k);
        Slice g(mean.size());
        for (std::size_t node = 0; node < g.size(); ++node) {
            g[node] = (current[node] - mean[node]) / dt;
            rep.bound.expect_le(std::abs(g[node]), phi(std::abs(z[node])), tol, k, node);
        }
        rep.g.set(k, std::move(g));
        rep.z.set(k, std::move(z));
    }
    return rep;
}

CheckReport representation_pair_check(const Representation& x, const Representation& y, const Modulus& phi,
                                      double tol)
{
    CheckReport report("representation_pair_modulus");
    const FiltrationTree& tree = x.g.tree();
    for (int k = 0; k < tree.steps(); ++k) {
        auto gx = x.g.at(k);
        auto gy = y.g.at(k);
        auto zx = x.z.at(k);
        auto zy = y.z.at(k);
        for (std::size_t node = 0; node < gx.size(); ++node) {
            report.expect_le(std::abs(gx[node] - gy[node]), phi(std::abs(zx[node] - zy[node])), tol, k, node);
        }
    }
    return report;
}

CheckReport comparison_check(const Generator& g, std::span<const double> xi1, std::span<const double> xi2,
                             const TreePtr& tree, double tol, const BsdeOptions& options)
{
    tree->check_slice(xi1, tree->steps());
    tree->check_slice(xi2, tree->steps());
    for (std::size_t leaf = 0; leaf < xi1.size(); ++leaf) {
        if (xi1[leaf] < xi2[leaf]) {
            throw ContractError("comparison_check: xi1 < xi2 at leaf " + std::to_string(leaf));
        }
    }
    const BsdeSolution upper = solve_bsde(g, xi1, tree, options);
    const BsdeSolution lower = solve_bsde(g, xi2, tree, options);
    CheckReport report("comparison");
    for (int k = 0; k <= tree->steps(); ++k) {
        auto a = upper.y.at(k);
        auto b = lower.y.at(k);
        for (std::size_t node = 0; node < a.size(); ++node) {
            report.expect_le(b[node], a[node], tol, k, node);
        }
    }
    return report;
}

nlohmann::json to_json(const BsdeSolution& solution, const Generator* g)
{
    const FiltrationTree& tree = solution.y.tree();
    nlohmann::json meta{
        {"scheme", to_string(solution.scheme)},
        {"T", tree.grid().horizon},
        {"N", tree.steps()},
        {"d", tree.dim()},
        {"from_step", solution.from_step},
        {"to_step", solution.to_step},
    };
    if (g != nullptr) {
        meta["generator"] = g->name();
    }
    return nlohmann::json{
        {"Y", to_json(solution.y).at("steps")},
        {"Z", to_json(solution.z).at("steps")},
        {"meta", std::move(meta)},
    };
}

}  // namespace nlx
