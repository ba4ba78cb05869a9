#include "nlx/doobmeyer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <string>

#include "nlx/error.hpp"

namespace nlx {

namespace {

std::vector<double> normalized_direction(const FiltrationTree& tree, const std::vector<double>& z)
{
    if (z.empty()) {
        return std::vector<double>(static_cast<std::size_t>(tree.dim()), 0.0);
    }
    if (z.size() != static_cast<std::size_t>(tree.dim())) {
        throw ContractError("penalization: direction z must have d components");
    }
    return z;
}

void require_full(const AdaptedField& y)
{
    if (y.width() != 1) {
        throw ContractError("penalization: process must be scalar");
    }
    for (int k = 0; k <= y.tree().steps(); ++k) {
        if (!y.defined(k)) {
            throw ContractError("penalization: process undefined at step " + std::to_string(k));
        }
    }
}

void require_supermartingale(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z)
{
    const FiltrationTree& tree = e.tree();
    AdaptedField shifted(e.tree_ptr());
    for (int k = 0; k <= tree.steps(); ++k) {
        const Slice zb = direction_brownian(tree, z, k);
        auto v = y.at(k);
        Slice s(v.size());
        for (std::size_t node = 0; node < s.size(); ++node) {
            s[node] = v[node] + zb[node];
        }
        shifted.set(k, std::move(s));
    }
    const CheckReport pre = martingale_precheck(e, shifted, MartingaleKind::Super, kChainedTol);
    if (!pre.pass()) {
        const Witness& w = pre.witnesses.front();
        throw ContractError("penalization: Y + z.B is not an E-supermartingale at step " + std::to_string(w.step) +
                            ", node " + std::to_string(w.node) + " (E[next] = " + std::to_string(w.lhs) +
                            " > " + std::to_string(w.rhs) + ")");
    }
}

LevelResult solve_level(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z, double level,
                        const PenalizeOptions& options)
{
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const double dt = tree.dt();
    const auto terminal = y.at(n);
    EfsdeProblem problem(e, EfsdeDriver::penalty(level, y), Slice(terminal.begin(), terminal.end()), z);

    const PicardResult solved = picard_solve(problem, options.picard);
    LevelResult out;
    out.level = level;
    out.y = solved.y;
    out.picard_residual = solved.residual;
    out.iterations = solved.iterations;
    out.stiff = solved.relaxed;

    if (options.oracle && level * dt < 1.0) {
        const AdaptedField oracle = backward_oracle(problem);
        out.oracle_checked = true;
        for (int k = 0; k <= n; ++k) {
            auto a = oracle.at(k);
            auto b = solved.y.at(k);
            for (std::size_t node = 0; node < a.size(); ++node) {
                out.oracle_error = std::max(out.oracle_error, std::abs(a[node] - b[node]));
            }
        }
    }

    out.a = AdaptedField(e.tree_ptr());
    Slice running(1, 0.0);
    for (int k = 0; k <= n; ++k) {
        out.a.set(k, running);
        if (k == n) {
            break;
        }
        auto yk = y.at(k);
        auto pk = solved.y.at(k);
        Slice acc(running.size());
        for (std::size_t node = 0; node < acc.size(); ++node) {
            acc[node] = running[node] + level * (yk[node] - pk[node]) * dt;
            out.gap_sup = std::max(out.gap_sup, yk[node] - pk[node]);
        }
        running = tree.broadcast(acc, k, k + 1);
    }
    {
        auto a_n = out.a.at(n);
        out.a_terminal_min = *std::min_element(a_n.begin(), a_n.end());
        out.a_terminal_max = *std::max_element(a_n.begin(), a_n.end());
        double sum = 0.0;
        double sq = 0.0;
        for (double v : a_n) {
            sum += v;
            sq += v * v;
        }
        out.a_terminal_mean = sum / static_cast<double>(a_n.size());
        out.energy_a = sq / static_cast<double>(a_n.size());
    }
    for (int k = 0; k < n; ++k) {
        const Slice zk = tree.project_increment(solved.y.at(k + 1), k);
        double sq = 0.0;
        for (double v : zk) {
            sq += v * v;
        }
        out.energy_z += sq / static_cast<double>(tree.node_count(k)) * dt;
    }
    out.residual = decomposition_residual(e, y, z, out.a);
    return out;
}

}  // namespace

std::vector<double> power_schedule(double dt, double max_ndt, double max_level)
{
    if (!(dt > 0.0) || !(max_ndt > 0.0)) {
        throw ContractError("power_schedule: dt and the n*dt cap must be positive");
    }
    std::vector<double> out;
    for (double n = 1.0; n * dt <= max_ndt && (max_level <= 0.0 || n <= max_level); n *= 2.0) {
        out.push_back(n);
    }
    if (max_level > 0.0 && (out.empty() || out.back() < max_level) && max_level * dt <= max_ndt) {
        out.push_back(max_level);
    }
    return out;
}

double decomposition_residual(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                              const AdaptedField& a)
{
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const std::vector<double> dir = normalized_direction(tree, z);
    const Slice zb_n = direction_brownian(tree, dir, n);
    auto y_n = y.at(n);
    auto a_n = a.at(n);
    Slice claim(y_n.size());
    for (std::size_t leaf = 0; leaf < claim.size(); ++leaf) {
        claim[leaf] = y_n[leaf] + zb_n[leaf] + a_n[leaf];
    }
    const AdaptedField p = e.process(claim);
    double worst = 0.0;
    for (int k = 0; k <= n; ++k) {
        const Slice zb = direction_brownian(tree, dir, k);
        auto pk = p.at(k);
        auto yk = y.at(k);
        auto ak = a.at(k);
        for (std::size_t node = 0; node < pk.size(); ++node) {
            worst = std::max(worst, std::abs(pk[node] - (yk[node] + zb[node] + ak[node])));
        }
    }
    return worst;
}

PenalizationRun penalize(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                         const std::vector<double>& levels, const PenalizeOptions& options)
{
    if (levels.empty()) {
        throw ContractError("penalize: empty level schedule");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0) || (i > 0 && !(levels[i] > levels[i - 1]))) {
            throw ContractError("penalize: levels must be positive and strictly increasing");
        }
    }
    require_full(y);
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const std::vector<double> dir = normalized_direction(tree, z);
    require_supermartingale(e, y, dir);

    PenalizationRun run;
    for (double level : levels) {
        run.levels.push_back(solve_level(e, y, dir, level, options));
    }

    for (std::size_t i = 0; i < run.levels.size(); ++i) {
        const LevelResult& cur = run.levels[i];
        for (int k = 0; k <= n; ++k) {
            auto upper = y.at(k);
            auto yn = cur.y.at(k);
            for (std::size_t node = 0; node < yn.size(); ++node) {
                run.monotone.expect_le(yn[node], upper[node], options.tol, k, node,
                                       "y^" + std::to_string(cur.level) + " <= Y");
            }
            if (i > 0) {
                auto prev = run.levels[i - 1].y.at(k);
                for (std::size_t node = 0; node < yn.size(); ++node) {
                    run.monotone.expect_le(prev[node], yn[node], options.tol, k, node,
                                           "level " + std::to_string(run.levels[i - 1].level) + " <= " +
                                               std::to_string(cur.level));
                }
            }
        }
        auto a0 = cur.a.at(0);
        run.increasing.expect_near(a0[0], 0.0, 0.0, 0, 0, "A_0 = 0");
        for (int k = 0; k < n; ++k) {
            auto ak = cur.a.at(k);
            auto next = cur.a.at(k + 1);
            for (std::size_t node = 0; node < next.size(); ++node) {
                run.increasing.expect_le(ak[tree.parent(node)], next[node], options.tol, k + 1, node,
                                         "level " + std::to_string(cur.level));
            }
        }
        if (options.energy_cap > 0.0) {
            run.energy.expect_le(cur.energy_z, options.energy_cap, 0.0, 0, i, "Z energy");
            run.energy.expect_le(cur.energy_a, options.energy_cap, 0.0, n, i, "E|A_N|^2");
        }
        if (i > 0) {
            run.residual_decrease.expect_le(cur.residual, run.levels[i - 1].residual, options.tol, 0, i,
                                            "level " + std::to_string(cur.level));
        }
    }
    return run;
}

DoobMeyerDecomposition decompose(const FExpectation& e, const AdaptedField& y, const std::vector<double>& z,
                                 double target, std::vector<double> schedule, const PenalizeOptions& options)
{
    require_full(y);
    const FiltrationTree& tree = e.tree();
    const std::vector<double> dir = normalized_direction(tree, z);
    require_supermartingale(e, y, dir);
    if (schedule.empty()) {
        schedule = power_schedule(tree.dt());
    }
    DoobMeyerDecomposition out;
    for (double level : schedule) {
        LevelResult r = solve_level(e, y, dir, level, options);
        out.levels_tried.push_back(level);
        out.residuals.push_back(r.residual);
        out.a = std::move(r.a);
        out.residual = r.residual;
        out.level = level;
        if (r.residual <= target) {
            out.converged = true;
            break;
        }
    }
    return out;
}

void write_levels_csv(std::ostream& out, const PenalizationRun& run)
{
    out << "level,gap_sup,a_T_min,a_T_max,a_T_mean,residual,picard_residual,iterations,stiff,oracle_checked,"
           "oracle_error,energy_z,energy_a\n";
    const auto flags = out.flags();
    const auto precision = out.precision();
    out << std::setprecision(17);
    for (const auto& r : run.levels) {
        out << r.level << ',' << r.gap_sup << ',' << r.a_terminal_min << ',' << r.a_terminal_max << ','
            << r.a_terminal_mean << ',' << r.residual << ',' << r.picard_residual << ',' << r.iterations << ','
            << (r.stiff ? 1 : 0) << ',' << (r.oracle_checked ? 1 : 0) << ',' << r.oracle_error << ','
            << r.energy_z << ',' << r.energy_a << '\n';
    }
    out.flags(flags);
    out.precision(precision);
}

}  // namespace nlx
