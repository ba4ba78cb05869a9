#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nlx/corpus.hpp"
#include "nlx/efsde.hpp"
#include "nlx/error.hpp"
#include "oracles.hpp"

using namespace nlx;

namespace {

TreePtr make_tree(double T, int N, int d = 1)
{
    return FiltrationTree::build(TimeGrid::make(T, N), d);
}

double max_diff(const AdaptedField& a, const AdaptedField& b)
{
    double worst = 0.0;
    for (int k = 0; k <= a.tree().steps(); ++k) {
        auto x = a.at(k);
        auto y = b.at(k);
        for (std::size_t i = 0; i < x.size(); ++i) {
            worst = std::max(worst, std::abs(x[i] - y[i]));
        }
    }
    return worst;
}

AdaptedField source(const TreePtr& tree, const std::function<double(int, std::size_t)>& f)
{
    AdaptedField out(tree);
    for (int k = 0; k < tree->steps(); ++k) {
        Slice s(tree->node_count(k));
        for (std::size_t node = 0; node < s.size(); ++node) {
            s[node] = f(k, node);
        }
        out.set(k, std::move(s));
    }
    return out;
}

}  // namespace

TEST(Efsde, ZeroDriverIsOneIteration)
{
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::mu_abs_z(0.1));
    const NamedClaim x = make_claim(tree, "abs_B_T");
    const std::vector<double> z{0.7};
    const PicardResult r = picard_solve(EfsdeProblem(e, EfsdeDriver::zero(), x.leaves, z));
    EXPECT_EQ(r.windows, 1);
    EXPECT_LE(r.max_window_iterations, 2);
    Slice shifted = x.leaves;
    const Slice zb = direction_brownian(*tree, z, 8);
    for (std::size_t l = 0; l < shifted.size(); ++l) {
        shifted[l] += zb[l];
    }
    const AdaptedField ref = e.process(shifted);
    for (int k = 0; k <= 8; ++k) {
        const Slice zbk = direction_brownian(*tree, z, k);
        for (std::size_t node = 0; node < tree->node_count(k); ++node) {
            EXPECT_NEAR(r.y.value(k, node), ref.value(k, node) - zbk[node], 1e-13);
        }
    }
}

TEST(Efsde, ConstantDriverUnderClassicalExpectation)
{
    auto tree = make_tree(1.0, 8);
    const NamedClaim x = make_claim(tree, "B_T_sq");
    const PicardResult r = picard_solve(EfsdeProblem(classical(tree), EfsdeDriver::constant(0.3), x.leaves));
    const oracle::Tree ref{1.0, 8, 1};
    for (int k = 0; k <= 8; ++k) {
        for (std::size_t node = 0; node < tree->node_count(k); ++node) {
            EXPECT_NEAR(r.y.value(k, node), ref.cond_expect(x.leaves, k, node) + 0.3 * (1.0 - tree->time(k)), 1e-13);
        }
    }
}

TEST(Efsde, ExponentialDecayMatchesClosedForm)
{
    // f = -y, X = 1: y_k = y_{k+1} / (1 + dt).
    for (int n : {4, 8, 10}) {
        auto tree = make_tree(1.0, n);
        const EfsdeProblem p(classical(tree), EfsdeDriver::linear(-1.0), Slice(tree->leaf_count(), 1.0));
        const AdaptedField oracle_y = backward_oracle(p);
        const PicardResult r = picard_solve(p);
        for (int k = 0; k <= n; ++k) {
            const double expected = std::pow(1.0 + tree->dt(), -(n - k));
            for (std::size_t node = 0; node < tree->node_count(k); ++node) {
                EXPECT_NEAR(oracle_y.value(k, node), expected, 1e-13);
            }
        }
        EXPECT_LE(max_diff(r.y, oracle_y), 1e-12);
    }
}

TEST(Efsde, DriftUncertaintyLinearDriverAgreesWithOracle)
{
    auto tree = make_tree(1.0, 8);
    const EfsdeProblem p(drift_uncertainty(tree, 0.1), EfsdeDriver::linear(0.5), make_claim(tree, "abs_B_T").leaves);
    const PicardResult r = picard_solve(p);
    EXPECT_LE(max_diff(r.y, backward_oracle(p)), 1e-11);
    EXPECT_LE(r.residual, 1e-11);
}

TEST(Efsde, PatchedWindowsForLargeLipschitzConstant)
{
    auto tree = make_tree(1.0, 8);
    const EfsdeProblem p(from_generator(tree, drivers::mu_abs_z(0.1)), EfsdeDriver::linear(2.0),
                         make_claim(tree, "abs_B_T").leaves, {0.5},
                         AdaptedField::constant(tree, 0.25, 0, 8));
    const PicardResult r = picard_solve(p);
    EXPECT_GE(r.windows, 4);
    EXPECT_EQ(r.window_steps, 2);
    EXPECT_LE(r.residual, 1e-11);
    EXPECT_LE(max_diff(r.y, backward_oracle(p)), 1e-11);
}

TEST(Efsde, StiffDriverUsesDampedUpdate)
{
    auto tree = make_tree(1.0, 4);
    const EfsdeProblem p(classical(tree), EfsdeDriver::linear(-5.0), make_claim(tree, "abs_B_T").leaves);
    const PicardResult r = picard_solve(p);
    EXPECT_TRUE(r.relaxed);
    EXPECT_LE(r.residual, 1e-11);
    EXPECT_THROW(backward_oracle(p), ContractError);
    // y_k = C_k / (1 + 5 dt) with C_k the one-step mean.
    const auto expected = oracle::backward(oracle::Tree{1.0, 4, 1}, make_claim(tree, "abs_B_T").leaves,
                                           [dt = tree->dt()](int, const std::vector<double>& ch) {
                                               return 0.5 * (ch[0] + ch[1]) / (1.0 + 5.0 * dt);
                                           });
    for (int k = 0; k <= 4; ++k) {
        for (std::size_t node = 0; node < tree->node_count(k); ++node) {
            EXPECT_NEAR(r.y.value(k, node), expected[static_cast<std::size_t>(k)][node], 1e-11);
        }
    }
}

TEST(Efsde, TableDriverInterpolates)
{
    const EfsdeDriver f = EfsdeDriver::table({-1.0, 0.0, 2.0}, {1.0, 0.0, 1.0});
    EXPECT_DOUBLE_EQ(f(0, 0, -0.5), 0.5);
    EXPECT_DOUBLE_EQ(f(0, 0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(f(0, 0, 4.0), 2.0);
    EXPECT_DOUBLE_EQ(f(0, 0, -3.0), 3.0);
    EXPECT_DOUBLE_EQ(f.lipschitz, 1.0);
    EXPECT_THROW(EfsdeDriver::table({0.0, 0.0}, {1.0, 2.0}), ConfigError);
    EXPECT_THROW(EfsdeDriver::table({0.0}, {1.0, 2.0}), ConfigError);
}

TEST(Efsde, DriverValidation)
{
    auto tree = make_tree(1.0, 4);
    EXPECT_TRUE(validate_driver(EfsdeDriver::linear(-1.5), *tree).ok());
    EfsdeDriver liar = EfsdeDriver::linear(3.0);
    liar.lipschitz = 1.0;
    EXPECT_TRUE(validate_driver(liar, *tree).has("lipschitz"));
}

TEST(Efsde, OracleAndPicardOnRandomProblems)
{
    std::mt19937_64 rng(99);
    auto tree = make_tree(1.0, 8);
    std::uniform_real_distribution<double> coef(-1.5, 1.5);
    std::uniform_real_distribution<double> dir(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Slice x = oracle::random_leaves(rng, tree->leaf_count(), 2.0);
        const Slice eta_vals = oracle::random_leaves(rng, 1, 1.0);
        const EfsdeProblem p(trial % 2 ? drift_uncertainty(tree, 0.2) : from_generator(tree, drivers::sqrt_norm()),
                             EfsdeDriver::linear(coef(rng)), x, {dir(rng)},
                             source(tree, [&](int k, std::size_t node) {
                                 return eta_vals[0] * std::cos(k + static_cast<double>(node));
                             }));
        const PicardResult r = picard_solve(p);
        EXPECT_LE(r.residual, 1e-11) << trial;
        EXPECT_LE(max_diff(r.y, backward_oracle(p)), 1e-11) << trial;
    }
}

TEST(Efsde, MartingaleProcessIsAnEMartingale)
{
    auto tree = make_tree(1.0, 8);
    const EfsdeProblem p(from_generator(tree, drivers::mu_abs_z(0.1)), EfsdeDriver::linear(0.7),
                         make_claim(tree, "running_max").leaves, {0.3});
    const PicardResult r = picard_solve(p);
    const AdaptedField m = martingale_process(p, r.y);
    EXPECT_TRUE(martingale_precheck(p.e, m, MartingaleKind::Martingale, 1e-11).pass());
}

TEST(Efsde, NonTranslationInvariantOperatorIsRefused)
{
    auto tree = make_tree(1.0, 4);
    const FExpectation base = classical(tree);
    const FExpectation scaled = user_defined(
        tree, "scaled",
        [base](std::span<const double> claim, int from, int to) {
            AdaptedField out = base.evaluate(claim, from, to);
            for (int k = to; k < from; ++k) {
                for (double& v : out.at(k)) {
                    v *= 1.01;
                }
            }
            return out;
        },
        Modulus::zero());
    const EfsdeProblem p(scaled, EfsdeDriver::linear(0.5), make_claim(tree, "abs_B_T").leaves);
    EXPECT_THROW(picard_solve(p), ContractError);
}

TEST(Efsde, ProblemValidatesShapes)
{
    auto tree = make_tree(1.0, 4);
    EXPECT_THROW(EfsdeProblem(classical(tree), EfsdeDriver::zero(), Slice(3, 0.0)), ContractError);
    EXPECT_THROW(EfsdeProblem(classical(tree), EfsdeDriver::zero(), Slice(16, 0.0), {1.0, 2.0}), ContractError);
}

TEST(Comparison, IdenticalProblemsAreEqual)
{
    auto tree = make_tree(1.0, 8);
    const EfsdeProblem p(drift_uncertainty(tree, 0.1), EfsdeDriver::linear(-1.0), make_claim(tree, "abs_B_T").leaves);
    const CheckReport r = compare_solutions(p, p, 0.0);
    EXPECT_TRUE(r.pass());
}

TEST(Comparison, ShiftByOneForYFreeDriver)
{
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const Slice x = make_claim(tree, "abs_B_T").leaves;
    Slice xbar = x;
    for (double& v : xbar) {
        v += 1.0;
    }
    const EfsdeProblem p(e, EfsdeDriver::constant(0.2), x, {0.4});
    const EfsdeProblem pbar(e, EfsdeDriver::constant(0.2), xbar, {0.4});
    EXPECT_TRUE(compare_solutions(p, pbar).pass());
    const PicardResult a = picard_solve(p);
    const PicardResult b = picard_solve(pbar);
    for (int k = 0; k <= 8; ++k) {
        for (std::size_t node = 0; node < tree->node_count(k); ++node) {
            EXPECT_NEAR(b.y.value(k, node), a.y.value(k, node) + 1.0, 1e-12);
        }
    }
}

TEST(Comparison, LargerSourceGivesLargerSolution)
{
    auto tree = make_tree(1.0, 8);
    for (const FExpectation& e : {classical(tree), from_generator(tree, drivers::mu_abs_z(0.1))}) {
        const Slice x = make_claim(tree, "B_T_sq").leaves;
        const EfsdeProblem p(e, EfsdeDriver::linear(-1.0), x);
        const EfsdeProblem pbar(e, EfsdeDriver::linear(-1.0), x, {}, AdaptedField::constant(tree, 1.0, 0, 8));
        EXPECT_TRUE(compare_solutions(p, pbar).pass()) << e.name();
    }
}

TEST(Comparison, PreconditionsAreEnforced)
{
    auto tree = make_tree(1.0, 4);
    const Slice x = make_claim(tree, "abs_B_T").leaves;
    const Slice b = make_claim(tree, "B_T").leaves;
    const FExpectation e = classical(tree);
    EXPECT_THROW(compare_solutions(EfsdeProblem(e, EfsdeDriver::zero(), x), EfsdeProblem(e, EfsdeDriver::zero(), b)),
                 ContractError);
    EXPECT_THROW(compare_solutions(EfsdeProblem(e, EfsdeDriver::zero(), b, {0.1}),
                                   EfsdeProblem(e, EfsdeDriver::zero(), x, {0.2})),
                 ContractError);
}

TEST(Comparison, SeededCorpusHasNoViolations)
{
    std::mt19937_64 rng(7);
    auto tree = make_tree(1.0, 8);
    std::uniform_real_distribution<double> bump(0.0, 0.5);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 12; ++trial) {
        const Slice x = oracle::random_leaves(rng, tree->leaf_count());
        Slice xbar = x;
        for (double& v : xbar) {
            v += bump(rng);
        }
        const double a = coef(rng);
        const double s = bump(rng);
        const FExpectation e = trial % 3 == 0   ? classical(tree)
                               : trial % 3 == 1 ? drift_uncertainty(tree, 0.1)
                                                : from_generator(tree, drivers::mu_abs_z(0.1));
        const EfsdeProblem p(e, EfsdeDriver::linear(a), x, {0.3});
        const EfsdeProblem pbar(e, EfsdeDriver::linear(a), xbar, {0.3}, AdaptedField::constant(tree, s, 0, 8));
        EXPECT_TRUE(compare_solutions(p, pbar).pass()) << trial;
    }
}
