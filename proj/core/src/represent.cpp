#include "nlx/represent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "nlx/doobmeyer.hpp"
#include "nlx/error.hpp"

namespace nlx {

namespace {

constexpr double kZeroTol = 1e-12;

bool is_zero(const std::vector<double>& z)
{
    return std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; });
}

std::vector<double> minus(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

// Groups grid indices by |z|; keys within a relative 1e-12 are merged.
std::vector<std::vector<std::size_t>> norm_groups(const std::vector<std::vector<double>>& grid)
{
    std::vector<std::size_t> order(grid.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::vector<double> norms(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        norms[i] = norm(grid[i]);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t idx : order) {
        if (!groups.empty()) {
            const double prev = norms[groups.back().front()];
            if (std::abs(norms[idx] - prev) <= 1e-12 * std::max(1.0, prev)) {
                groups.back().push_back(idx);
                continue;
            }
        }
        groups.push_back({idx});
    }
    return groups;
}

Interpolation choose_rule(int dim, const std::vector<std::vector<double>>& grid,
                          const std::vector<std::vector<double>>& table)
{
    const auto groups = norm_groups(grid);
    bool isotropic = true;
    for (const auto& row : table) {
        for (const auto& group : groups) {
            for (std::size_t idx : group) {
                if (std::abs(row[idx] - row[group.front()]) > kZeroTol) {
                    isotropic = false;
                }
            }
        }
    }
    if (dim == 1) {
        for (const auto& group : groups) {
            const double r = grid[group.front()][0];
            if (r == 0.0) {
                continue;
            }
            const bool has_pos = std::any_of(group.begin(), group.end(), [&](std::size_t i) { return grid[i][0] > 0; });
            const bool has_neg = std::any_of(group.begin(), group.end(), [&](std::size_t i) { return grid[i][0] < 0; });
            if (!has_pos || !has_neg) {
                isotropic = false;
            }
        }
        return isotropic ? Interpolation::LinearInNorm : Interpolation::Linear1D;
    }
    for (const auto& group : groups) {
        if (group.size() < 2 && !is_zero(grid[group.front()])) {
            isotropic = false;
        }
    }
    return isotropic ? Interpolation::LinearInNorm : Interpolation::NearestGrid;
}

std::size_t reference_at(const FiltrationTree& tree, int step, std::size_t reference)
{
    return std::min(reference, tree.node_count(step) - 1);
}

}  // namespace

const char* to_string(Interpolation rule)
{
    switch (rule) {
    case Interpolation::LinearInNorm:
        return "linear_in_norm";
    case Interpolation::Linear1D:
        return "linear_1d";
    case Interpolation::NearestGrid:
        return "nearest_grid";
    }
    return "unknown";
}

Interpolation interpolation_from_string(const std::string& name)
{
    if (name == "linear_in_norm") {
        return Interpolation::LinearInNorm;
    }
    if (name == "linear_1d") {
        return Interpolation::Linear1D;
    }
    if (name == "nearest_grid") {
        return Interpolation::NearestGrid;
    }
    throw ConfigError("unknown interpolation rule '" + name + "' (expected linear_in_norm, linear_1d, nearest_grid)");
}

RecoveredGenerator::RecoveredGenerator(double horizon, int steps, int dim, std::vector<std::vector<double>> z_grid,
                                       std::vector<std::vector<double>> table, Interpolation rule, Modulus phi)
    : horizon_(horizon)
    , steps_(steps)
    , dim_(dim)
    , z_grid_(std::move(z_grid))
    , table_(std::move(table))
    , rule_(rule)
    , phi_(std::move(phi))
{
    if (!(horizon_ > 0.0) || steps_ < 1 || dim_ < 1) {
        throw ContractError("recovered generator: need T > 0, N >= 1, d >= 1");
    }
    if (z_grid_.empty()) {
        throw ContractError("recovered generator: empty z-grid");
    }
    if (table_.size() != 1 && table_.size() != static_cast<std::size_t>(steps_)) {
        throw ContractError("recovered generator: table needs 1 or N rows");
    }
    for (const auto& z : z_grid_) {
        if (z.size() != static_cast<std::size_t>(dim_)) {
            throw ContractError("recovered generator: grid point with wrong dimension");
        }
        reach_ = std::max(reach_, norm(z));
        lower_ = std::min(lower_, z[0]);
    }
    for (const auto& row : table_) {
        if (row.size() != z_grid_.size()) {
            throw ContractError("recovered generator: table row size differs from the grid");
        }
    }
    if (rule_ == Interpolation::Linear1D && dim_ != 1) {
        throw ContractError("recovered generator: linear_1d needs d = 1");
    }
    if (rule_ == Interpolation::NearestGrid) {
        return;
    }
    for (const auto& row : table_) {
        std::vector<std::pair<double, double>> points;
        points.reserve(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) {
            const double key = rule_ == Interpolation::LinearInNorm ? norm(z_grid_[i]) : z_grid_[i][0];
            points.emplace_back(key, row[i]);
        }
        std::stable_sort(points.begin(), points.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        Axis axis;
        for (const auto& [key, value] : points) {
            if (!axis.keys.empty() && axis.keys.back() == key) {
                continue;
            }
            axis.keys.push_back(key);
            axis.values.push_back(value);
        }
        axes_.push_back(std::move(axis));
    }
}

double RecoveredGenerator::interpolate(const Axis& axis, double x, bool* extrapolated) const
{
    const auto& keys = axis.keys;
    const auto& values = axis.values;
    if (keys.size() == 1) {
        if (extrapolated != nullptr && x != keys[0]) {
            *extrapolated = true;
        }
        return values[0];
    }
    std::size_t i = 0;
    if (x < keys.front()) {
        if (extrapolated != nullptr) {
            *extrapolated = true;
        }
    } else if (x > keys.back()) {
        if (extrapolated != nullptr) {
            *extrapolated = true;
        }
        i = keys.size() - 2;
    } else {
        auto it = std::lower_bound(keys.begin(), keys.end(), x);
        const auto at = static_cast<std::size_t>(it - keys.begin());
        if (*it == x) {
            return values[at];
        }
        i = at - 1;
    }
    const double w = (x - keys[i]) / (keys[i + 1] - keys[i]);
    return values[i] + w * (values[i + 1] - values[i]);
}

double RecoveredGenerator::operator()(int step, std::span<const double> z, bool* extrapolated) const
{
    const std::size_t row =
        table_.size() == 1 ? 0 : static_cast<std::size_t>(std::clamp(step, 0, static_cast<int>(table_.size()) - 1));
    switch (rule_) {
    case Interpolation::LinearInNorm:
        return interpolate(axes_[row], norm(z), extrapolated);
    case Interpolation::Linear1D:
        return interpolate(axes_[row], z[0], extrapolated);
    case Interpolation::NearestGrid: {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        std::vector<double> diff(z.size());
        for (std::size_t i = 0; i < z_grid_.size(); ++i) {
            for (std::size_t j = 0; j < z.size(); ++j) {
                diff[j] = z[j] - z_grid_[i][j];
            }
            const double dist = norm(diff);
            if (dist < best_d) {
                best_d = dist;
                best = i;
            }
        }
        if (extrapolated != nullptr && norm(z) > reach_ * (1.0 + 1e-12)) {
            *extrapolated = true;
        }
        return table_[row][best];
    }
    }
    return 0.0;
}

int RecoveredGenerator::step_of(double t) const
{
    const auto k = static_cast<int>(std::lround(t / dt()));
    return std::clamp(k, 0, steps_);
}

std::vector<std::vector<double>> scalar_grid(const std::vector<double>& zs)
{
    std::vector<std::vector<double>> out;
    out.reserve(zs.size());
    for (double z : zs) {
        out.push_back({z});
    }
    return out;
}

std::vector<std::vector<double>> isotropic_grid(int dim, const std::vector<double>& radii)
{
    if (dim < 1) {
        throw ContractError("isotropic_grid: dimension must be >= 1");
    }
    const auto d = static_cast<std::size_t>(dim);
    std::vector<std::vector<double>> out;
    out.push_back(std::vector<double>(d, 0.0));
    const double diag = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double r : radii) {
        if (r == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) {
            for (double s : {-1.0, 1.0}) {
                std::vector<double> p(d, 0.0);
                p[j] = s * r;
                out.push_back(std::move(p));
            }
        }
        if (dim > 1) {
            for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
                std::vector<double> p(d);
                for (std::size_t j = 0; j < d; ++j) {
                    p[j] = ((mask >> j) & 1U ? 1.0 : -1.0) * r * diag;
                }
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

std::vector<double> recover_row(const FExpectation& e, const std::vector<std::vector<double>>& z_grid, int step, int m,
                                const RecoverOptions& options)
{
    const FiltrationTree& tree = e.tree();
    const auto d = static_cast<std::size_t>(tree.dim());
    if (step < 0 || m < 1 || step + m > tree.steps()) {
        throw ContractError("recover_row: need 0 <= step and step + m <= N");
    }
    const int top = step + m;
    const double horizon = static_cast<double>(m) * tree.dt();
    const std::size_t ref = reference_at(tree, step, options.reference_node);
    auto b_top = tree.brownian(top);
    auto b_low = tree.brownian(step);
    std::vector<double> row(z_grid.size());
    for (std::size_t i = 0; i < z_grid.size(); ++i) {
        const auto& z = z_grid[i];
        if (z.size() != d) {
            throw ContractError("recover_row: grid point with wrong dimension");
        }
        Slice claim(tree.node_count(top));
        for (std::size_t node = 0; node < claim.size(); ++node) {
            const std::size_t anc = tree.ancestor(top, node, step);
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                s += z[j] * (b_top[node * d + j] - b_low[anc * d + j]);
            }
            claim[node] = s;
        }
        const AdaptedField value = e.evaluate(claim, top, step);
        auto v = value.at(step);
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        if (*hi - *lo > options.node_tol) {
            throw ContractError("recover_generator: one-step value of z.dB depends on the node at step " +
                                std::to_string(step) + " (spread " + std::to_string(*hi - *lo) +
                                "); the operator is not translation invariant");
        }
        row[i] = v[ref] / horizon;
    }
    return row;
}

RecoveredGenerator recover_generator(const FExpectation& e, std::vector<std::vector<double>> z_grid,
                                     const RecoverOptions& options)
{
    const FiltrationTree& tree = e.tree();
    const auto d = static_cast<std::size_t>(tree.dim());
    if (std::none_of(z_grid.begin(), z_grid.end(), is_zero)) {
        z_grid.insert(z_grid.begin(), std::vector<double>(d, 0.0));
    }
    const int n = tree.steps();
    std::vector<std::vector<double>> table;
    table.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        table.push_back(recover_row(e, z_grid, k, 1, options));
    }
    double richardson = 0.0;
    if (options.richardson) {
        for (int k = 0; k + 2 <= n; ++k) {
            const std::vector<double> two = recover_row(e, z_grid, k, 2, options);
            for (std::size_t i = 0; i < two.size(); ++i) {
                richardson = std::max(richardson, std::abs(two[i] - table[static_cast<std::size_t>(k)][i]));
            }
        }
    }
    const Interpolation rule = options.rule.value_or(choose_rule(tree.dim(), z_grid, table));
    RecoveredGenerator out(tree.grid().horizon, n, tree.dim(), std::move(z_grid), std::move(table), rule,
                           e.declared_modulus());
    out.richardson = richardson;
    return out;
}

RecoveredGenerator recover_via_doob_meyer(const FExpectation& e, std::vector<std::vector<double>> z_grid,
                                          const Modulus& phi, double target, const RecoverOptions& options)
{
    const FiltrationTree& tree = e.tree();
    const auto d = static_cast<std::size_t>(tree.dim());
    if (std::none_of(z_grid.begin(), z_grid.end(), is_zero)) {
        z_grid.insert(z_grid.begin(), std::vector<double>(d, 0.0));
    }
    const int n = tree.steps();
    const double dt = tree.dt();
    std::vector<std::vector<double>> table(static_cast<std::size_t>(n), std::vector<double>(z_grid.size()));
    for (std::size_t i = 0; i < z_grid.size(); ++i) {
        const auto& z = z_grid[i];
        const double level = phi(norm(z));
        AdaptedField y(e.tree_ptr());
        for (int k = 0; k <= n; ++k) {
            y.set(k, Slice(tree.node_count(k), -level * tree.time(k)));
        }
        const DoobMeyerDecomposition dm = decompose(e, y, z, target);
        for (int k = 0; k < n; ++k) {
            const std::size_t ref = reference_at(tree, k, options.reference_node);
            const double increment = dm.a.value(k + 1, tree.first_child(ref)) - dm.a.value(k, ref);
            table[static_cast<std::size_t>(k)][i] = level - increment / dt;
        }
    }
    const Interpolation rule = options.rule.value_or(choose_rule(tree.dim(), z_grid, table));
    return RecoveredGenerator(tree.grid().horizon, n, tree.dim(), std::move(z_grid), std::move(table), rule, phi);
}

Generator to_generator(const RecoveredGenerator& g)
{
    auto held = std::make_shared<const RecoveredGenerator>(g);
    return Generator(
        "recovered", [held](double t, double, std::span<const double> z) { return (*held)(held->step_of(t), z); },
        g.phi(), 0.0, GeneratorFlags{false, true, true});
}

nlohmann::json to_json(const RecoveredGenerator& g)
{
    nlohmann::json t_grid = nlohmann::json::array();
    for (std::size_t k = 0; k < g.table().size(); ++k) {
        t_grid.push_back(g.horizon() * static_cast<double>(k) / static_cast<double>(g.steps()));
    }
    return nlohmann::json{
        {"T", g.horizon()},
        {"N", g.steps()},
        {"d", g.dim()},
        {"t_grid", std::move(t_grid)},
        {"z_grid", g.z_grid()},
        {"table", g.table()},
        {"phi", g.phi().name},
        {"interpolation", to_string(g.rule())},
        {"richardson", g.richardson},
    };
}

RecoveredGenerator recovered_from_json(const nlohmann::json& doc)
{
    try {
        RecoveredGenerator g(doc.at("T").get<double>(), doc.at("N").get<int>(), doc.at("d").get<int>(),
                             doc.at("z_grid").get<std::vector<std::vector<double>>>(),
                             doc.at("table").get<std::vector<std::vector<double>>>(),
                             interpolation_from_string(doc.at("interpolation").get<std::string>()),
                             Modulus::from_name(doc.at("phi").get<std::string>()));
        g.richardson = doc.value("richardson", 0.0);
        return g;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("recovered generator JSON: ") + ex.what());
    }
}

CheckReport check_recovered_modulus(const RecoveredGenerator& g, const Modulus& phi, double tol)
{
    CheckReport report("recovered_modulus");
    const auto& grid = g.z_grid();
    for (std::size_t row = 0; row < g.table().size(); ++row) {
        const auto& values = g.table()[row];
        const int step = static_cast<int>(row);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (is_zero(grid[i])) {
                report.expect_near(values[i], 0.0, kZeroTol, step, i, "g(t, 0) = 0");
            }
            report.expect_le(std::abs(values[i]), phi(norm(grid[i])), tol, step, i, "|g| <= phi(|z|)");
            for (std::size_t j = i + 1; j < grid.size(); ++j) {
                report.expect_le(std::abs(values[i] - values[j]), phi(norm(minus(grid[i], grid[j]))), tol, step, i,
                                 "pair with grid index " + std::to_string(j));
            }
        }
    }
    return report;
}

std::vector<double> scan_z_values(const FExpectation& e, const std::vector<NamedClaim>& claims)
{
    const FiltrationTree& tree = e.tree();
    if (tree.dim() != 1) {
        throw ContractError("scan_z_values: only d = 1");
    }
    std::vector<double> out;
    for (const auto& claim : claims) {
        const AdaptedField p = e.process(claim.leaves);
        for (int k = 0; k < tree.steps(); ++k) {
            const Slice z = tree.project_increment(p.at(k + 1), k);
            out.insert(out.end(), z.begin(), z.end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::vector<double>> covering_grid(const std::vector<double>& base, const std::vector<double>& scanned)
{
    std::vector<double> all{0.0};
    for (const auto* src : {&base, &scanned}) {
        for (double v : *src) {
            if (!std::isfinite(v)) {
                throw ContractError("covering_grid: non-finite value");
            }
            all.push_back(v);
            all.push_back(-v);
        }
    }
    for (double& v : all) {
        if (v == 0.0) {
            v = 0.0;  // fold -0
        }
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return scalar_grid(all);
}

double VerificationReport::worst() const
{
    double out = 0.0;
    for (double v : max_error) {
        out = std::max(out, v);
    }
    return out;
}

nlohmann::json to_json(const VerificationReport& report)
{
    nlohmann::json claims = nlohmann::json::array();
    for (std::size_t i = 0; i < report.claims.size(); ++i) {
        claims.push_back({{"claim", report.claims[i]},
                          {"max_error", report.max_error[i]},
                          {"step_error", report.step_error[i]}});
    }
    nlohmann::json flags = nlohmann::json::array();
    for (const auto& f : report.extrapolated) {
        flags.push_back({{"claim", f.claim}, {"step", f.step}, {"node", f.node}, {"z", f.z}});
    }
    nlohmann::json out = to_json(report.check);
    out["claims"] = std::move(claims);
    out["extrapolated_count"] = report.extrapolated_count;
    out["extrapolated"] = std::move(flags);
    return out;
}

VerificationReport verify_representation(const FExpectation& e, const RecoveredGenerator& g,
                                         const std::vector<NamedClaim>& claims, double tol)
{
    const TreePtr& tree = e.tree_ptr();
    const int n = tree->steps();
    const auto d = static_cast<std::size_t>(tree->dim());
    if (g.steps() != n || g.dim() != tree->dim() || std::abs(g.dt() - tree->dt()) > 1e-15 * tree->dt()) {
        throw ContractError("verify_representation: recovered table was built on a different grid");
    }
    const Generator driver = to_generator(g);
    VerificationReport report;
    for (const auto& claim : claims) {
        const AdaptedField p = e.process(claim.leaves);
        const BsdeSolution s = solve_bsde(driver, claim.leaves, tree);
        std::vector<double> per_step(static_cast<std::size_t>(n) + 1, 0.0);
        for (int k = 0; k <= n; ++k) {
            auto a = p.at(k);
            auto b = s.y.at(k);
            for (std::size_t node = 0; node < a.size(); ++node) {
                per_step[static_cast<std::size_t>(k)] =
                    std::max(per_step[static_cast<std::size_t>(k)], std::abs(a[node] - b[node]));
                report.check.expect_near(b[node], a[node], tol, k, node, claim.name);
            }
            if (k < n) {
                auto z = s.z.at(k);
                for (std::size_t node = 0; node < a.size(); ++node) {
                    bool flagged = false;
                    std::span<const double> zn(z.data() + node * d, d);
                    (void)g(k, zn, &flagged);
                    if (flagged) {
                        ++report.extrapolated_count;
                        if (report.extrapolated.size() < 32) {
                            report.extrapolated.push_back({claim.name, k, node, norm(zn)});
                        }
                    }
                }
            }
        }
        report.claims.push_back(claim.name);
        report.max_error.push_back(*std::max_element(per_step.begin(), per_step.end()));
        report.step_error.push_back(std::move(per_step));
    }
    return report;
}

UniquenessReport uniqueness_probe(const RecoveredGenerator& g1, const RecoveredGenerator& g2,
                                  const std::vector<std::vector<double>>& z_grid, const std::vector<int>& steps,
                                  double tol)
{
    UniquenessReport report;
    for (int k : steps) {
        for (std::size_t i = 0; i < z_grid.size(); ++i) {
            const double a = g1(k, z_grid[i]);
            const double b = g2(k, z_grid[i]);
            report.max_difference = std::max(report.max_difference, std::abs(a - b));
            report.check.expect_near(a, b, tol, k, i, "grid index " + std::to_string(i));
        }
    }
    return report;
}

NullIntegralResult null_integral_check(const RecoveredGenerator& g, const TreePtr& tree, const AdaptedField& eta,
                                       int r, int t)
{
    if (r < 0 || r > t || t > tree->steps()) {
        throw ContractError("null_integral_check: need 0 <= r <= t <= N");
    }
    const auto d = static_cast<std::size_t>(tree->dim());
    if (eta.width() != tree->dim()) {
        throw ContractError("null_integral_check: eta must have d components");
    }
    const double dt = tree->dt();
    NullIntegralResult result;
    Slice sum(tree->node_count(r), 0.0);
    for (int j = r; j < t; ++j) {
        if (!eta.defined(j)) {
            throw ContractError("null_integral_check: eta undefined at step " + std::to_string(j));
        }
        auto e_j = eta.at(j);
        auto b_j = tree->brownian(j);
        auto b_next = tree->brownian(j + 1);
        Slice drift(sum.size());
        for (std::size_t node = 0; node < sum.size(); ++node) {
            bool flagged = false;
            drift[node] = g(j, std::span<const double>(e_j.data() + node * d, d), &flagged) * dt;
            if (flagged) {
                ++result.extrapolated;
            }
        }
        Slice next(tree->node_count(j + 1));
        for (std::size_t child = 0; child < next.size(); ++child) {
            const std::size_t parent = tree->parent(child);
            double integral = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                integral += e_j[parent * d + c] * (b_next[child * d + c] - b_j[parent * d + c]);
            }
            next[child] = sum[parent] - drift[parent] + integral;
        }
        sum = std::move(next);
    }
    const BsdeSolution s = solve_bsde(to_generator(g), sum, t, r, tree);
    for (double v : s.y.at(r)) {
        result.residual = std::max(result.residual, std::abs(v));
    }
    return result;
}

}  // namespace nlx
