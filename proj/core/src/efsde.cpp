#include "nlx/efsde.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "nlx/corpus.hpp"
#include "nlx/error.hpp"
#include "nlx/parallel.hpp"

namespace nlx {

namespace {

std::string describe(double x)
{
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

double sup_abs_diff(std::span<const double> a, std::span<const double> b)
{
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out = std::max(out, std::abs(a[i] - b[i]));
    }
    return out;
}

// (f(t_k, y_k) + eta_k) dt on the nodes of step k.
Slice source_at(const EfsdeProblem& p, std::span<const double> y, int k)
{
    const double dt = p.e.tree().dt();
    Slice out(y.size());
    const bool has_eta = p.eta.has_value();
    parallel_for(y.size(), [&](std::size_t node) {
        const double eta = has_eta ? p.eta->value(k, node) : 0.0;
        out[node] = (p.f(k, node, y[node]) + eta) * dt;
    });
    return out;
}

}  // namespace

EfsdeDriver EfsdeDriver::zero()
{
    return EfsdeDriver{"zero", [](int, std::size_t, double) { return 0.0; }, 0.0};
}

EfsdeDriver EfsdeDriver::constant(double c)
{
    return EfsdeDriver{"constant(" + describe(c) + ")", [c](int, std::size_t, double) { return c; }, 0.0};
}

EfsdeDriver EfsdeDriver::linear(double a)
{
    return EfsdeDriver{"linear(" + describe(a) + ")", [a](int, std::size_t, double y) { return a * y; },
                       std::abs(a)};
}

EfsdeDriver EfsdeDriver::table(std::vector<double> ys, std::vector<double> fs)
{
    if (ys.empty() || ys.size() != fs.size()) {
        throw ConfigError("table driver: need matching, nonempty y and f columns");
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (!std::isfinite(ys[i]) || !std::isfinite(fs[i])) {
            throw ConfigError("table driver: non-finite entry");
        }
        if (i > 0 && !(ys[i] > ys[i - 1])) {
            throw ConfigError("table driver: y column must be strictly increasing");
        }
    }
    double lip = 0.0;
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
        lip = std::max(lip, std::abs((fs[i + 1] - fs[i]) / (ys[i + 1] - ys[i])));
    }
    auto y_col = std::make_shared<const std::vector<double>>(std::move(ys));
    auto f_col = std::make_shared<const std::vector<double>>(std::move(fs));
    auto fn = [y_col, f_col](int, std::size_t, double y) {
        const auto& yv = *y_col;
        const auto& fv = *f_col;
        if (yv.size() == 1) {
            return fv[0];
        }
        std::size_t i = 0;
        if (y >= yv.back()) {
            i = yv.size() - 2;
        } else if (y > yv.front()) {
            i = static_cast<std::size_t>(std::upper_bound(yv.begin(), yv.end(), y) - yv.begin()) - 1;
        }
        const double w = (y - yv[i]) / (yv[i + 1] - yv[i]);
        return fv[i] + w * (fv[i + 1] - fv[i]);
    };
    return EfsdeDriver{"table", std::move(fn), lip};
}

EfsdeDriver EfsdeDriver::penalty(double n, AdaptedField obstacle)
{
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw ContractError("penalty driver: level must be positive and finite");
    }
    if (obstacle.width() != 1) {
        throw ContractError("penalty driver: obstacle must be scalar");
    }
    for (int k = 0; k < obstacle.tree().steps(); ++k) {
        if (!obstacle.defined(k)) {
            throw ContractError("penalty driver: obstacle undefined at step " + std::to_string(k));
        }
    }
    auto held = std::make_shared<const AdaptedField>(std::move(obstacle));
    return EfsdeDriver{"penalty(" + describe(n) + ")",
                       [held, n](int k, std::size_t node, double y) { return n * (held->value(k, node) - y); }, n};
}

ValidationReport validate_driver(const EfsdeDriver& f, const FiltrationTree& tree, std::uint64_t seed, int draws)
{
    ValidationReport report;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < tree.steps(); ++k) {
        const std::size_t nodes = tree.node_count(k);
        for (int i = 0; i < draws; ++i) {
            const auto node = std::min(nodes - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(nodes)));
            const double y1 = 10.0 * unit(rng) - 5.0;
            const double y2 = 10.0 * unit(rng) - 5.0;
            const double a = f(k, node, y1);
            const double b = f(k, node, y2);
            if (!std::isfinite(a) || !std::isfinite(b)) {
                report.violations.push_back({"non_finite", {static_cast<double>(k), y1, y2}, a, b});
                continue;
            }
            const double bound = f.lipschitz * std::abs(y1 - y2);
            if (std::abs(a - b) > bound + kValidationTol * std::max(1.0, bound)) {
                report.violations.push_back({"lipschitz", {static_cast<double>(k), y1, y2}, std::abs(a - b), bound});
            }
        }
    }
    return report;
}

EfsdeProblem::EfsdeProblem(FExpectation op, EfsdeDriver driver, Slice x, std::vector<double> direction,
                           std::optional<AdaptedField> source)
    : e(std::move(op))
    , f(std::move(driver))
    , terminal(std::move(x))
    , z(std::move(direction))
    , eta(std::move(source))
{
    const FiltrationTree& tree = e.tree();
    tree.check_slice(terminal, tree.steps());
    if (z.empty()) {
        z.assign(static_cast<std::size_t>(tree.dim()), 0.0);
    }
    if (z.size() != static_cast<std::size_t>(tree.dim())) {
        throw ContractError("efsde problem: direction z must have d components");
    }
    if (!f.fn) {
        throw ContractError("efsde problem: empty driver");
    }
    if (!(f.lipschitz >= 0.0) || !std::isfinite(f.lipschitz)) {
        throw ContractError("efsde problem: driver Lipschitz constant must be finite and nonnegative");
    }
    if (eta) {
        if (eta->width() != 1) {
            throw ContractError("efsde problem: source eta must be scalar");
        }
        for (int k = 0; k < tree.steps(); ++k) {
            if (!eta->defined(k)) {
                throw ContractError("efsde problem: source eta undefined at step " + std::to_string(k));
            }
        }
    }
}

Slice direction_brownian(const FiltrationTree& tree, const std::vector<double>& z, int k)
{
    const auto d = static_cast<std::size_t>(tree.dim());
    auto b = tree.brownian(k);
    Slice out(tree.node_count(k), 0.0);
    for (std::size_t node = 0; node < out.size(); ++node) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            s += z[j] * b[node * d + j];
        }
        out[node] = s;
    }
    return out;
}

PicardResult picard_solve(const EfsdeProblem& problem, const PicardOptions& options)
{
    const FExpectation& e = problem.e;
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const double dt = tree.dt();
    const double lambda = problem.f.lipschitz;

    if (options.preflight_translation && e.provenance() == Provenance::UserDefined) {
        const CheckReport translation =
            check_translation(e, make_claims(e.tree_ptr(), {"B_T", "abs_B_T"}), default_shifts(e.tree_ptr()));
        if (!translation.pass()) {
            const Witness& w = translation.witnesses.front();
            throw ContractError("picard_solve: operator '" + e.name() +
                                "' fails the translation pre-flight at step " + std::to_string(w.step) + ", node " +
                                std::to_string(w.node));
        }
    }

    int window = n;
    if (lambda > 0.0) {
        const double span = std::min(tree.grid().horizon, 1.0 / (2.0 * lambda));
        window = std::clamp(static_cast<int>(std::floor(span / dt + 1e-9)), 1, n);
    }
    const bool stiff = lambda * dt > 0.5;
    const double omega = stiff ? 1.0 / (1.0 + lambda * dt) : 1.0;
    const int cap = options.max_iter > 0 ? options.max_iter
                                         : 10 * static_cast<int>(std::ceil(std::log2(1.0 / options.tol)));

    std::vector<Slice> zb(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        zb[static_cast<std::size_t>(k)] = direction_brownian(tree, problem.z, k);
    }

    PicardResult result{AdaptedField(e.tree_ptr()), 0, 0, 0, window, stiff, 0.0};
    result.y.set(n, problem.terminal);

    for (int end = n; end > 0; end -= window) {
        const int start = std::max(0, end - window);
        ++result.windows;
        auto y_end = result.y.at(end);
        Slice anchor(y_end.size());
        for (std::size_t node = 0; node < anchor.size(); ++node) {
            anchor[node] = y_end[node] + zb[static_cast<std::size_t>(end)][node];
        }

        // Start from the f = 0 solution of the window.
        std::vector<Slice> u(static_cast<std::size_t>(end - start));
        {
            const AdaptedField base = e.evaluate(anchor, end, start);
            for (int k = start; k < end; ++k) {
                auto v = base.at(k);
                Slice s(v.begin(), v.end());
                for (std::size_t node = 0; node < s.size(); ++node) {
                    s[node] -= zb[static_cast<std::size_t>(k)][node];
                }
                u[static_cast<std::size_t>(k - start)] = std::move(s);
            }
        }

        int it = 0;
        double change = 0.0;
        while (true) {
            if (it >= cap) {
                throw NumericError("picard_solve: no convergence in window [" + std::to_string(start) + ", " +
                                   std::to_string(end) + "] after " + std::to_string(cap) +
                                   " iterations, last change " + describe(change));
            }
            ++it;
            // prefix[k] = sum_{start <= j < k} source_j lifted to step k.
            std::vector<Slice> prefix(static_cast<std::size_t>(end - start) + 1);
            prefix[0] = Slice(tree.node_count(start), 0.0);
            for (int k = start; k < end; ++k) {
                const std::size_t i = static_cast<std::size_t>(k - start);
                const Slice src = source_at(problem, u[i], k);
                Slice acc(prefix[i].size());
                for (std::size_t node = 0; node < acc.size(); ++node) {
                    acc[node] = prefix[i][node] + src[node];
                }
                prefix[i + 1] = tree.broadcast(acc, k, k + 1);
            }
            Slice claim(anchor.size());
            for (std::size_t node = 0; node < claim.size(); ++node) {
                claim[node] = anchor[node] + prefix.back()[node];
            }
            const AdaptedField full = e.evaluate(claim, end, start);
            change = 0.0;
            for (int k = start; k < end; ++k) {
                const std::size_t i = static_cast<std::size_t>(k - start);
                auto v = full.at(k);
                Slice next(v.size());
                for (std::size_t node = 0; node < next.size(); ++node) {
                    const double image = v[node] - zb[static_cast<std::size_t>(k)][node] - prefix[i][node];
                    next[node] = stiff ? u[i][node] + omega * (image - u[i][node]) : image;
                }
                change = std::max(change, sup_abs_diff(next, u[i]));
                u[i] = std::move(next);
            }
            if (!std::isfinite(change)) {
                throw NumericError("picard_solve: non-finite iterate in window [" + std::to_string(start) + ", " +
                                   std::to_string(end) + "]");
            }
            if (change <= options.tol) {
                break;
            }
        }
        result.iterations += it;
        result.max_window_iterations = std::max(result.max_window_iterations, it);
        for (int k = start; k < end; ++k) {
            result.y.set(k, std::move(u[static_cast<std::size_t>(k - start)]));
        }
    }
    result.residual = fixed_point_residual(problem, result.y);
    return result;
}

double fixed_point_residual(const EfsdeProblem& problem, const AdaptedField& y)
{
    const FExpectation& e = problem.e;
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    double worst = sup_abs_diff(y.at(n), problem.terminal);

    // tail = sum_{j >= k} source_j lifted to the leaves.
    Slice tail(tree.leaf_count(), 0.0);
    const Slice zb_n = direction_brownian(tree, problem.z, n);
    for (int k = n - 1; k >= 0; --k) {
        const Slice src = tree.broadcast(source_at(problem, y.at(k), k), k, n);
        Slice claim(tail.size());
        for (std::size_t leaf = 0; leaf < tail.size(); ++leaf) {
            tail[leaf] += src[leaf];
            claim[leaf] = problem.terminal[leaf] + zb_n[leaf] + tail[leaf];
        }
        const Slice value = e.conditional(claim, k);
        const Slice zb = direction_brownian(tree, problem.z, k);
        auto yk = y.at(k);
        for (std::size_t node = 0; node < value.size(); ++node) {
            worst = std::max(worst, std::abs(yk[node] + zb[node] - value[node]));
        }
    }
    return worst;
}

AdaptedField backward_oracle(const EfsdeProblem& problem)
{
    const FExpectation& e = problem.e;
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const double dt = tree.dt();
    if (problem.f.lipschitz * dt >= 1.0) {
        throw ContractError("backward_oracle: needs lambda*dt < 1 (lambda = " + describe(problem.f.lipschitz) +
                            ", dt = " + describe(dt) + ")");
    }
    constexpr double kTol = 1e-14;
    constexpr int kMaxIter = 1000000;

    AdaptedField y(e.tree_ptr());
    y.set(n, problem.terminal);
    Slice zb_next = direction_brownian(tree, problem.z, n);
    for (int k = n - 1; k >= 0; --k) {
        auto next = y.at(k + 1);
        Slice shifted(next.size());
        for (std::size_t node = 0; node < shifted.size(); ++node) {
            shifted[node] = next[node] + zb_next[node];
        }
        const Slice zb = direction_brownian(tree, problem.z, k);
        Slice c = e.one_step(shifted, k);
        for (std::size_t node = 0; node < c.size(); ++node) {
            c[node] -= zb[node];
        }
        Slice out(c.size());
        std::vector<char> stalled(c.size(), 0);
        parallel_for(c.size(), [&](std::size_t node) {
            const double eta = problem.eta ? problem.eta->value(k, node) : 0.0;
            double v = c[node];
            for (int it = 0;; ++it) {
                const double updated = c[node] + (problem.f(k, node, v) + eta) * dt;
                const double step = std::abs(updated - v);
                v = updated;
                if (step <= kTol * std::max(1.0, std::abs(v))) {
                    break;
                }
                if (it >= kMaxIter || !std::isfinite(v)) {
                    stalled[node] = 1;
                    break;
                }
            }
            out[node] = v;
        });
        for (std::size_t node = 0; node < stalled.size(); ++node) {
            if (stalled[node]) {
                throw NumericError("backward_oracle: scalar fixed point failed at step " + std::to_string(k) +
                                   ", node " + std::to_string(node));
            }
        }
        y.set(k, std::move(out));
        zb_next = zb;
    }
    return y;
}

AdaptedField martingale_process(const EfsdeProblem& problem, const AdaptedField& y)
{
    const FiltrationTree& tree = problem.e.tree();
    const int n = tree.steps();
    AdaptedField m(problem.e.tree_ptr());
    Slice running(1, 0.0);
    for (int k = 0; k <= n; ++k) {
        const Slice zb = direction_brownian(tree, problem.z, k);
        auto yk = y.at(k);
        Slice value(yk.size());
        for (std::size_t node = 0; node < value.size(); ++node) {
            value[node] = yk[node] + zb[node] + running[node];
        }
        m.set(k, std::move(value));
        if (k < n) {
            const Slice src = source_at(problem, yk, k);
            Slice acc(src.size());
            for (std::size_t node = 0; node < acc.size(); ++node) {
                acc[node] = running[node] + src[node];
            }
            running = tree.broadcast(acc, k, k + 1);
        }
    }
    return m;
}

CheckReport compare_solutions(const EfsdeProblem& problem, const EfsdeProblem& problem_bar, double tol,
                              const PicardOptions& options)
{
    if (problem.e.tree_ptr() != problem_bar.e.tree_ptr() || problem.e.name() != problem_bar.e.name()) {
        throw ContractError("compare_solutions: problems must share the operator");
    }
    if (problem.z != problem_bar.z) {
        throw ContractError("compare_solutions: problems must share the direction z");
    }
    for (std::size_t leaf = 0; leaf < problem.terminal.size(); ++leaf) {
        if (problem_bar.terminal[leaf] < problem.terminal[leaf]) {
            throw ContractError("compare_solutions: Xbar < X at leaf " + std::to_string(leaf));
        }
    }
    const FiltrationTree& tree = problem.e.tree();
    for (int k = 0; k < tree.steps(); ++k) {
        for (std::size_t node = 0; node < tree.node_count(k); ++node) {
            const double a = problem.eta ? problem.eta->value(k, node) : 0.0;
            const double b = problem_bar.eta ? problem_bar.eta->value(k, node) : 0.0;
            if (b < a) {
                throw ContractError("compare_solutions: etabar < eta at step " + std::to_string(k) + ", node " +
                                    std::to_string(node));
            }
        }
    }
    const PicardResult lo = picard_solve(problem, options);
    const PicardResult hi = picard_solve(problem_bar, options);
    CheckReport report("comparison");
    for (int k = 0; k <= tree.steps(); ++k) {
        auto a = lo.y.at(k);
        auto b = hi.y.at(k);
        for (std::size_t node = 0; node < a.size(); ++node) {
            report.expect_le(a[node], b[node], tol, k, node, "ybar >= y");
        }
    }
    return report;
}

}  // namespace nlx
