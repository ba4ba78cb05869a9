#include "nlx/fexp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

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

Slice broadcast_to_leaves(const FiltrationTree& tree, std::span<const double> values, int step)
{
    return tree.broadcast(values, step, tree.steps());
}

Slice leafwise_diff(const Slice& a, const Slice& b)
{
    Slice out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    return out;
}

Slice leafwise_sum(std::span<const double> a, std::span<const double> b)
{
    Slice out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    return out;
}

bool dominates_leafwise(const Slice& a, const Slice& b)
{
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i]) {
            return false;
        }
    }
    return true;
}

}  // namespace

const char* to_string(Provenance provenance)
{
    switch (provenance) {
    case Provenance::FromGenerator:
        return "from_generator";
    case Provenance::DriftUncertainty:
        return "drift_uncertainty";
    case Provenance::UserDefined:
        return "user_defined";
    }
    return "unknown";
}

FExpectation::FExpectation(TreePtr tree, std::string name, Evaluator evaluator, Modulus declared,
                           Provenance provenance)
    : tree_(std::move(tree))
    , name_(std::move(name))
    , evaluator_(std::move(evaluator))
    , declared_(std::move(declared))
    , provenance_(provenance)
{
    if (!tree_) {
        throw ContractError("F-expectation '" + name_ + "': null tree");
    }
    if (!evaluator_) {
        throw ContractError("F-expectation '" + name_ + "': empty evaluator");
    }
}

AdaptedField FExpectation::evaluate(std::span<const double> claim, int from, int to) const
{
    if (to < 0 || to > from || from > tree_->steps()) {
        throw ContractError("F-expectation '" + name_ + "': need 0 <= to <= from <= N");
    }
    tree_->check_slice(claim, from);
    AdaptedField out = evaluator_(claim, from, to);
    for (int k = to; k <= from; ++k) {
        if (!out.defined(k)) {
            throw ContractError("F-expectation '" + name_ + "': evaluator left step " + std::to_string(k) +
                                " undefined");
        }
    }
    auto top = out.at(from);
    if (!std::equal(top.begin(), top.end(), claim.begin(), claim.end())) {
        throw ContractError("F-expectation '" + name_ + "': value at the claim's own step differs from the claim");
    }
    return out;
}

AdaptedField FExpectation::process(std::span<const double> terminal) const
{
    return evaluate(terminal, tree_->steps(), 0);
}

Slice FExpectation::conditional(std::span<const double> terminal, int t) const
{
    const AdaptedField f = evaluate(terminal, tree_->steps(), t);
    auto s = f.at(t);
    return Slice(s.begin(), s.end());
}

Slice FExpectation::one_step(std::span<const double> next, int k) const
{
    const AdaptedField f = evaluate(next, k + 1, k);
    auto s = f.at(k);
    return Slice(s.begin(), s.end());
}

FExpectation FExpectation::with_generator(std::shared_ptr<const Generator> g) const
{
    FExpectation copy = *this;
    copy.generator_ = std::move(g);
    return copy;
}

FExpectation from_generator(const TreePtr& tree, const Generator& g)
{
    if (!g.flags().zero_at_zero_z) {
        throw ContractError("from_generator: driver '" + g.name() + "' is not flagged g(t, y, 0) = 0");
    }
    SampleSpec spec;
    spec.dim = tree->dim();
    spec.t_max = tree->grid().horizon;
    const ValidationReport report = validate_generator(g, spec);
    if (!report.ok()) {
        const Violation& v = report.violations.front();
        throw ContractError("from_generator: driver '" + g.name() + "' fails validation (" + v.kind +
                            ": lhs = " + describe(v.lhs) + ", rhs = " + describe(v.rhs) + ")");
    }
    auto held = std::make_shared<const Generator>(g);
    FExpectation::Evaluator eval = [held, tree](std::span<const double> claim, int from, int to) {
        return solve_bsde(*held, claim, from, to, tree).y;
    };
    return FExpectation(tree, "E^{" + g.name() + "}", std::move(eval), g.modulus(), Provenance::FromGenerator)
        .with_generator(held);
}

FExpectation classical(const TreePtr& tree)
{
    FExpectation::Evaluator eval = [tree](std::span<const double> claim, int from, int to) {
        AdaptedField out(tree);
        out.set(from, Slice(claim.begin(), claim.end()));
        for (int k = from - 1; k >= to; --k) {
            out.set(k, tree->cond_expect(out.at(k + 1), k));
        }
        return out;
    };
    return FExpectation(tree, "classical", std::move(eval), Modulus::zero(), Provenance::FromGenerator)
        .with_generator(std::make_shared<const Generator>(drivers::zero()));
}

FExpectation drift_uncertainty(const TreePtr& tree, double mu)
{
    if (!(mu >= 0.0) || !std::isfinite(mu)) {
        throw ContractError("drift_uncertainty: mu must be finite and nonnegative");
    }
    const double reach = mu * std::sqrt(static_cast<double>(tree->dim()) * tree->dt());
    if (reach > 1.0) {
        throw ContractError("drift_uncertainty: mu*sqrt(d*dt) = " + describe(reach) +
                            " > 1 makes tilted weights negative; increase N");
    }
    const int d = tree->dim();
    const std::size_t b = tree->branching();
    const double sqrt_dt = tree->sqrt_dt();

    FExpectation::Evaluator eval = [tree, mu, d, b, sqrt_dt](std::span<const double> claim, int from, int to) {
        AdaptedField out(tree);
        out.set(from, Slice(claim.begin(), claim.end()));
        for (int k = from - 1; k >= to; --k) {
            auto next = out.at(k + 1);
            Slice value(tree->node_count(k));
            if (d == 1) {
                // Linear in theta, so the sup is attained at theta = +-mu.
                const double up = 0.5 * (1.0 + mu * sqrt_dt);
                const double down = 0.5 * (1.0 - mu * sqrt_dt);
                parallel_for(value.size(), [&](std::size_t node) {
                    const double lo = next[2 * node];
                    const double hi = next[2 * node + 1];
                    const double plus = down * lo + up * hi;
                    const double minus = up * lo + down * hi;
                    value[node] = std::max(plus, minus);
                });
            } else {
                // Sup over the ball |theta| <= mu of mean + sqrt(dt) theta . E[f eps].
                const double inv_b = 1.0 / static_cast<double>(b);
                parallel_for(value.size(), [&](std::size_t node) {
                    const std::size_t first = node * b;
                    double mean = 0.0;
                    double tilt_sq = 0.0;
                    for (std::size_t c = 0; c < b; ++c) {
                        mean += next[first + c];
                    }
                    for (int j = 0; j < d; ++j) {
                        double proj = 0.0;
                        for (std::size_t c = 0; c < b; ++c) {
                            proj += FiltrationTree::sign(c, j) * next[first + c];
                        }
                        proj *= inv_b;
                        tilt_sq += proj * proj;
                    }
                    value[node] = mean * inv_b + sqrt_dt * mu * std::sqrt(tilt_sq);
                });
            }
            out.set(k, std::move(value));
        }
        return out;
    };
    return FExpectation(tree, "drift_uncertainty(" + describe(mu) + ")", std::move(eval), Modulus::linear(mu),
                        Provenance::DriftUncertainty);
}

FExpectation user_defined(const TreePtr& tree, std::string name, FExpectation::Evaluator evaluator,
                          Modulus declared)
{
    return FExpectation(tree, std::move(name), std::move(evaluator), std::move(declared), Provenance::UserDefined);
}

bool AxiomReport::pass() const
{
    return monotonicity.pass() && constant_preservation.pass() && consistency.pass() && zero_one.pass();
}

nlohmann::json to_json(const AxiomReport& report)
{
    return nlohmann::json{
        {"check", "axioms"},
        {"pass", report.pass()},
        {"axioms",
         nlohmann::json::array({to_json(report.monotonicity), to_json(report.constant_preservation),
                                to_json(report.consistency), to_json(report.zero_one)})},
    };
}

namespace {

void compare_processes(CheckReport& report, const AdaptedField& lower, const AdaptedField& upper, int first,
                       int last, double tol, const std::string& note)
{
    for (int k = first; k <= last; ++k) {
        auto a = lower.at(k);
        auto b = upper.at(k);
        for (std::size_t node = 0; node < a.size(); ++node) {
            report.expect_le(a[node], b[node], tol, k, node, note);
        }
    }
}

void compare_equal(CheckReport& report, const AdaptedField& lhs, const AdaptedField& rhs, int first, int last,
                   double tol, const std::string& note)
{
    for (int k = first; k <= last; ++k) {
        auto a = lhs.at(k);
        auto b = rhs.at(k);
        for (std::size_t node = 0; node < a.size(); ++node) {
            report.expect_near(a[node], b[node], tol, k, node, note);
        }
    }
}

}  // namespace

AxiomReport check_axioms(const FExpectation& e, const std::vector<NamedClaim>& claims,
                         const std::vector<Event>& events, double tol)
{
    if (claims.empty()) {
        throw ContractError("check_axioms: empty claim corpus");
    }
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    AxiomReport report;

    std::vector<AdaptedField> cache;
    cache.reserve(claims.size());
    for (const auto& c : claims) {
        cache.push_back(e.process(c.leaves));
    }

    for (std::size_t i = 0; i < claims.size(); ++i) {
        for (std::size_t j = 0; j < claims.size(); ++j) {
            const Slice& x = claims[i].leaves;
            const Slice& y = claims[j].leaves;
            const std::string note = claims[i].name + " >= " + claims[j].name;
            if (i != j && dominates_leafwise(x, y)) {
                compare_processes(report.monotonicity, cache[j], cache[i], 0, n, tol, note);
            }
            Slice hi(x.size());
            for (std::size_t l = 0; l < x.size(); ++l) {
                hi[l] = std::max(x[l], y[l]);
            }
            compare_processes(report.monotonicity, cache[j], e.process(hi), 0, n, tol,
                              "max(" + claims[i].name + ", " + claims[j].name + ") >= " + claims[j].name);
        }
    }

    for (std::size_t i = 0; i < claims.size(); ++i) {
        const AdaptedField& p = cache[i];
        for (int t = 0; t <= n; ++t) {
            // E[eta | F_s] = eta for eta = E[X|F_t] and every s >= t.
            const Slice eta = broadcast_to_leaves(tree, p.at(t), t);
            const AdaptedField q = e.evaluate(eta, n, t);
            for (int s = t; s <= n; ++s) {
                const Slice expected = tree.broadcast(p.at(t), t, s);
                auto got = q.at(s);
                for (std::size_t node = 0; node < got.size(); ++node) {
                    report.constant_preservation.expect_near(got[node], expected[node], tol, s, node,
                                                             claims[i].name + " at t=" + std::to_string(t));
                }
            }
            // E[E[X|F_t] | F_s] = E[X|F_s] for s <= t.
            auto inner = p.at(t);
            const AdaptedField tower = e.evaluate(inner, t, 0);
            compare_equal(report.consistency, tower, p, 0, t, tol, claims[i].name + " via t=" + std::to_string(t));
        }
    }

    for (const auto& event : events) {
        const Slice ind = indicator(tree, event);
        for (std::size_t i = 0; i < claims.size(); ++i) {
            Slice masked(ind.size());
            for (std::size_t l = 0; l < ind.size(); ++l) {
                masked[l] = ind[l] * claims[i].leaves[l];
            }
            const AdaptedField q = e.process(masked);
            for (int t = event.step; t <= n; ++t) {
                const Slice ind_t = tree.broadcast(
                    [&] {
                        Slice m(event.members.size());
                        for (std::size_t a = 0; a < m.size(); ++a) {
                            m[a] = event.members[a] ? 1.0 : 0.0;
                        }
                        return m;
                    }(),
                    event.step, t);
                auto lhs = q.at(t);
                auto rhs = cache[i].at(t);
                for (std::size_t node = 0; node < lhs.size(); ++node) {
                    report.zero_one.expect_near(lhs[node], ind_t[node] * rhs[node], tol, t, node,
                                                claims[i].name + " on event at step " + std::to_string(event.step));
                }
            }
        }
    }
    return report;
}

CheckReport check_domination(const FExpectation& e, const Modulus& phi, const std::vector<ClaimPair>& pairs,
                             double tol)
{
    const TreePtr& tree = e.tree_ptr();
    const int n = tree->steps();
    const Generator upper = drivers::phi_norm(phi);
    const Generator lower = drivers::neg_phi_norm(phi);
    CheckReport report("domination");
    for (const auto& pair : pairs) {
        const AdaptedField px = e.process(pair.x);
        const AdaptedField py = e.process(pair.y);
        const Slice diff = leafwise_diff(pair.x, pair.y);
        const BsdeSolution hi = solve_bsde(upper, diff, tree);
        const BsdeSolution lo = solve_bsde(lower, diff, tree);
        for (int k = 0; k <= n; ++k) {
            auto a = px.at(k);
            auto b = py.at(k);
            auto u = hi.y.at(k);
            auto l = lo.y.at(k);
            for (std::size_t node = 0; node < a.size(); ++node) {
                const double gap = a[node] - b[node];
                report.expect_le(gap, u[node], tol, k, node, pair.name + " upper");
                report.expect_le(l[node], gap, tol, k, node, pair.name + " lower");
            }
        }
    }
    return report;
}

bool DominationSuite::pass() const
{
    return symmetry.pass() && two_sided.pass() && sandwich.pass() && abs_bound.pass() && continuity.pass();
}

nlohmann::json to_json(const DominationSuite& suite)
{
    return nlohmann::json{
        {"check", "domination_suite"},
        {"pass", suite.pass()},
        {"parts", nlohmann::json::array({to_json(suite.symmetry), to_json(suite.two_sided), to_json(suite.sandwich),
                                         to_json(suite.abs_bound), to_json(suite.continuity)})},
        {"continuity_errors", suite.continuity_errors},
    };
}

DominationSuite check_domination_suite(const FExpectation& e, const Modulus& phi,
                                       const std::vector<NamedClaim>& claims, double tol)
{
    const TreePtr& tree = e.tree_ptr();
    const int n = tree->steps();
    const Generator upper = drivers::phi_norm(phi);
    const Generator lower = drivers::neg_phi_norm(phi);
    DominationSuite suite;

    std::vector<AdaptedField> cache;
    cache.reserve(claims.size());
    for (const auto& c : claims) {
        cache.push_back(e.process(c.leaves));
    }

    for (std::size_t i = 0; i < claims.size(); ++i) {
        const Slice& x = claims[i].leaves;
        Slice neg(x.size());
        for (std::size_t l = 0; l < x.size(); ++l) {
            neg[l] = -x[l];
        }
        const BsdeSolution lo = solve_bsde(lower, x, tree);
        const BsdeSolution hi = solve_bsde(upper, x, tree);
        const BsdeSolution hi_neg = solve_bsde(upper, neg, tree);
        for (int k = 0; k <= n; ++k) {
            auto l = lo.y.at(k);
            auto u = hi.y.at(k);
            auto un = hi_neg.y.at(k);
            auto v = cache[i].at(k);
            for (std::size_t node = 0; node < l.size(); ++node) {
                suite.symmetry.expect_near(-l[node], un[node], kExactTol, k, node, claims[i].name);
                suite.sandwich.expect_le(l[node], v[node], tol, k, node, claims[i].name + " lower");
                suite.sandwich.expect_le(v[node], u[node], tol, k, node, claims[i].name + " upper");
            }
        }
    }

    suite.two_sided = check_domination(e, phi, all_pairs(claims), tol);
    suite.two_sided.check = "two_sided";

    for (std::size_t i = 0; i < claims.size(); ++i) {
        for (std::size_t j = 0; j < claims.size(); ++j) {
            const Slice& x = claims[i].leaves;
            const Slice& y = claims[j].leaves;
            Slice gap(x.size());
            for (std::size_t l = 0; l < x.size(); ++l) {
                gap[l] = std::abs(x[l] - y[l]);
            }
            const BsdeSolution bound = solve_bsde(upper, gap, tree);
            for (int k = 0; k <= n; ++k) {
                auto a = cache[i].at(k);
                auto b = cache[j].at(k);
                auto u = bound.y.at(k);
                for (std::size_t node = 0; node < a.size(); ++node) {
                    suite.abs_bound.expect_le(std::abs(a[node] - b[node]), u[node], tol, k, node,
                                              claims[i].name + "|" + claims[j].name);
                }
            }
        }
    }

    // X_n = X + noise / n with a fixed seeded noise field on the leaves.
    std::mt19937_64 rng(0xc0ffee);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Slice noise(tree->leaf_count());
    for (double& v : noise) {
        v = unit(rng);
    }
    const std::vector<double> scales{1.0, 1e2, 1e4, 1e6, 1e8};
    std::vector<double> errors(scales.size(), 0.0);
    for (std::size_t i = 0; i < claims.size(); ++i) {
        for (std::size_t s = 0; s < scales.size(); ++s) {
            Slice xn(noise.size());
            for (std::size_t l = 0; l < xn.size(); ++l) {
                xn[l] = claims[i].leaves[l] + noise[l] / scales[s];
            }
            const AdaptedField p = e.process(xn);
            for (int k = 0; k <= n; ++k) {
                auto a = p.at(k);
                auto b = cache[i].at(k);
                for (std::size_t node = 0; node < a.size(); ++node) {
                    errors[s] = std::max(errors[s], std::abs(a[node] - b[node]));
                }
            }
        }
    }
    for (std::size_t s = 0; s + 1 < scales.size(); ++s) {
        suite.continuity.expect_le(errors[s + 1], errors[s], tol, 0, s, "error not shrinking");
    }
    suite.continuity.expect_le(errors.back(), 1e-3, 0.0, 0, scales.size() - 1, "error at smallest noise");
    suite.continuity_errors = std::move(errors);
    return suite;
}

CheckReport check_translation(const FExpectation& e, const std::vector<NamedClaim>& claims,
                              const std::vector<NamedProcess>& shifts, double tol)
{
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    CheckReport report("translation");
    for (const auto& claim : claims) {
        const AdaptedField base = e.process(claim.leaves);
        for (const auto& shift : shifts) {
            for (int t = 0; t <= n; ++t) {
                const Slice lifted = broadcast_to_leaves(tree, shift.values.at(t), t);
                const AdaptedField moved = e.evaluate(leafwise_sum(claim.leaves, lifted), n, t);
                for (int s = t; s <= n; ++s) {
                    const Slice y = tree.broadcast(shift.values.at(t), t, s);
                    auto got = moved.at(s);
                    auto ref = base.at(s);
                    for (std::size_t node = 0; node < got.size(); ++node) {
                        report.expect_near(got[node], ref[node] + y[node], tol, s, node,
                                           claim.name + " + " + shift.name + "_" + std::to_string(t));
                    }
                }
            }
        }
    }
    return report;
}

CheckReport martingale_precheck(const FExpectation& e, const AdaptedField& y, MartingaleKind kind, double tol)
{
    const FiltrationTree& tree = e.tree();
    CheckReport report("martingale_precheck");
    for (int k = 0; k < tree.steps(); ++k) {
        if (!y.defined(k) || !y.defined(k + 1)) {
            throw ContractError("martingale_precheck: process undefined at step " + std::to_string(k));
        }
        const Slice next = e.one_step(y.at(k + 1), k);
        auto cur = y.at(k);
        for (std::size_t node = 0; node < cur.size(); ++node) {
            if (kind != MartingaleKind::Sub) {
                report.expect_le(next[node], cur[node], tol, k, node, "E[Y_{k+1}|F_k] <= Y_k");
            }
            if (kind != MartingaleKind::Super) {
                report.expect_le(cur[node], next[node], tol, k, node, "E[Y_{k+1}|F_k] >= Y_k");
            }
        }
    }
    return report;
}

Slice conditional_at(const FExpectation& e, std::span<const double> terminal, const StoppingTime& sigma)
{
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    const AdaptedField p = e.process(terminal);
    Slice out(tree.leaf_count());
    for (std::size_t leaf = 0; leaf < out.size(); ++leaf) {
        const int k = sigma.at_leaf(leaf);
        out[leaf] = p.value(k, tree.ancestor(n, leaf, k));
    }
    return out;
}

CheckReport optional_stopping_check(const FExpectation& e, const AdaptedField& y, const StoppingTime& sigma,
                                    const StoppingTime& tau, MartingaleKind kind, double tol)
{
    const CheckReport pre = martingale_precheck(e, y, kind, tol);
    if (!pre.pass()) {
        const Witness& w = pre.witnesses.front();
        throw ContractError("optional_stopping_check: process fails the one-step " +
                            std::string(kind == MartingaleKind::Super ? "supermartingale"
                                        : kind == MartingaleKind::Sub ? "submartingale"
                                                                      : "martingale") +
                            " check at step " + std::to_string(w.step) + ", node " + std::to_string(w.node));
    }
    const FiltrationTree& tree = e.tree();
    const Slice at_tau = stopped_value(y, tau);
    const Slice lhs = conditional_at(e, at_tau, sigma);
    const Slice rhs = stopped_value(y, sigma.min(tau));
    CheckReport report("optional_stopping");
    const int n = tree.steps();
    for (std::size_t leaf = 0; leaf < lhs.size(); ++leaf) {
        if (kind != MartingaleKind::Sub) {
            report.expect_le(lhs[leaf], rhs[leaf], tol, n, leaf, "E[Y_tau|F_sigma] <= Y_{sigma^tau}");
        }
        if (kind != MartingaleKind::Super) {
            report.expect_le(rhs[leaf], lhs[leaf], tol, n, leaf, "E[Y_tau|F_sigma] >= Y_{sigma^tau}");
        }
    }
    return report;
}

CheckReport locality_check(const FExpectation& e, const StoppingTime& sigma, std::span<const double> x,
                           std::span<const double> y, const std::vector<char>& event, double tol)
{
    const FiltrationTree& tree = e.tree();
    const int n = tree.steps();
    tree.check_slice(x, n);
    tree.check_slice(y, n);
    if (event.size() != tree.leaf_count()) {
        throw ContractError("locality_check: event must list membership for every leaf");
    }
    if (!is_measurable_at(tree, event, sigma)) {
        throw ContractError("locality_check: event is not F_sigma-measurable");
    }
    CheckReport report("locality");
    Slice masked(x.size());
    for (std::size_t l = 0; l < x.size(); ++l) {
        masked[l] = (event[l] ? x[l] : 0.0) + y[l];
    }
    const Slice full = conditional_at(e, leafwise_sum(x, y), sigma);
    const Slice local = conditional_at(e, masked, sigma);
    for (std::size_t leaf = 0; leaf < full.size(); ++leaf) {
        if (event[leaf]) {
            report.expect_near(full[leaf], local[leaf], tol, n, leaf, "1_A E[X+Y] = 1_A E[1_A X + Y]");
        }
    }
    if (is_measurable_at(tree, y, sigma)) {
        const Slice alone = conditional_at(e, x, sigma);
        for (std::size_t leaf = 0; leaf < full.size(); ++leaf) {
            report.expect_near(full[leaf], alone[leaf] + y[leaf], tol, n, leaf, "E[X+Y] = E[X] + Y");
        }
    }
    return report;
}

CheckReport check_shifted_boundedness(const FExpectation& e, const Modulus& phi, std::span<const double> x,
                                      std::span<const double> z, double tol)
{
    const TreePtr& tree = e.tree_ptr();
    const int n = tree->steps();
    const auto d = static_cast<std::size_t>(tree->dim());
    if (z.size() != d) {
        throw ContractError("check_shifted_boundedness: direction must have d components");
    }
    tree->check_slice(x, n);
    auto shifted_at = [&](int k) {
        auto b = tree->brownian(k);
        Slice out(tree->node_count(k));
        for (std::size_t node = 0; node < out.size(); ++node) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                s += z[j] * b[node * d + j];
            }
            out[node] = s;
        }
        return out;
    };
    const Slice zb_leaves = shifted_at(n);
    const AdaptedField value = e.process(leafwise_sum(x, zb_leaves));

    const double offset = phi(norm(z));
    auto fn = phi.phi;
    const Generator up("barrier_up",
                       [fn, offset](double, double, std::span<const double> zz) { return fn(norm(zz)) + offset; }, phi,
                       0.0, GeneratorFlags{false, true, false});
    const Generator down("barrier_down",
                         [fn, offset](double, double, std::span<const double> zz) { return -fn(norm(zz)) - offset; },
                         phi, 0.0, GeneratorFlags{false, true, false});
    const BsdeSolution hi = solve_bsde(up, x, tree);
    const BsdeSolution lo = solve_bsde(down, x, tree);

    CheckReport report("shifted_boundedness");
    for (int k = 0; k <= n; ++k) {
        const Slice zb = shifted_at(k);
        auto v = value.at(k);
        auto u = hi.y.at(k);
        auto l = lo.y.at(k);
        for (std::size_t node = 0; node < v.size(); ++node) {
            const double shifted = v[node] - zb[node];
            report.expect_le(shifted, u[node], tol, k, node, "upper barrier");
            report.expect_le(l[node], shifted, tol, k, node, "lower barrier");
        }
    }
    return report;
}

}  // namespace nlx
