#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "nlx/corpus.hpp"
#include "nlx/error.hpp"
#include "nlx/represent.hpp"
#include "oracles.hpp"

using namespace nlx;

namespace {

TreePtr make_tree(double T, int N, int d = 1)
{
    return FiltrationTree::build(TimeGrid::make(T, N), d);
}

const std::vector<double> kGrid{-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0};

double table_at(const RecoveredGenerator& g, int k, double z)
{
    const double zs[] = {z};
    return g(k, zs);
}

AdaptedField eta_field(const TreePtr& tree, int width, const std::function<double(int, std::size_t, int)>& f)
{
    AdaptedField eta(tree, width);
    for (int k = 0; k < tree->steps(); ++k) {
        Slice s(tree->node_count(k) * static_cast<std::size_t>(width));
        for (std::size_t node = 0; node < tree->node_count(k); ++node) {
            for (int j = 0; j < width; ++j) {
                s[node * static_cast<std::size_t>(width) + static_cast<std::size_t>(j)] = f(k, node, j);
            }
        }
        eta.set(k, std::move(s));
    }
    return eta;
}

}  // namespace

TEST(Recover, ClassicalIsZero)
{
    auto tree = make_tree(1.0, 6);
    const RecoveredGenerator g = recover_generator(classical(tree), scalar_grid(kGrid));
    for (const auto& row : g.table()) {
        for (double v : row) {
            EXPECT_LE(std::abs(v), 1e-14);
        }
    }
}

TEST(Recover, MuAbsZAtTwo)
{
    auto tree = make_tree(1.0, 8);
    const RecoveredGenerator g = recover_generator(from_generator(tree, drivers::mu_abs_z(0.1)), scalar_grid(kGrid));
    for (int k = 0; k < 8; ++k) {
        EXPECT_NEAR(table_at(g, k, 2.0), 0.2, 1e-13);
        EXPECT_NEAR(table_at(g, k, -2.0), 0.2, 1e-13);
        EXPECT_NEAR(table_at(g, k, 0.0), 0.0, 1e-15);
    }
}

TEST(Recover, DriftUncertaintyIsMuAbsZ)
{
    auto tree = make_tree(1.0, 10);
    const FExpectation e = drift_uncertainty(tree, 0.1);
    const RecoveredGenerator g = recover_generator(e, scalar_grid(kGrid));
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        for (double z : kGrid) {
            worst = std::max(worst, std::abs(table_at(g, k, z) - 0.1 * std::abs(z)));
        }
    }
    EXPECT_LE(worst, 1e-12);
    EXPECT_LE(g.richardson, 1e-12);

    const auto claims = make_claims(tree, default_claim_keys());
    const std::vector<double> scanned = scan_z_values(e, claims);
    const RecoveredGenerator covered = recover_generator(e, covering_grid(kGrid, scanned));
    const VerificationReport report = verify_representation(e, covered, claims, 1e-12);
    EXPECT_TRUE(report.check.pass()) << to_json(report).dump();
    EXPECT_EQ(report.extrapolated_count, 0u);
    EXPECT_LE(report.worst(), 1e-12);
}

TEST(Recover, SqrtRoundTrip)
{
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const auto claims = make_claims(tree, default_claim_keys());
    const RecoveredGenerator g = recover_generator(e, covering_grid(kGrid, scan_z_values(e, claims)));
    for (int k = 0; k < 8; ++k) {
        for (double z : kGrid) {
            EXPECT_NEAR(table_at(g, k, z), std::sqrt(std::abs(z)), 1e-12);
        }
    }
    const VerificationReport report = verify_representation(e, g, claims, 1e-10);
    EXPECT_TRUE(report.check.pass()) << to_json(report).dump();
    EXPECT_TRUE(check_recovered_modulus(g, Modulus::sqrt()).pass());
}

TEST(Recover, ModulusCheckCatchesTooSmallPhi)
{
    auto tree = make_tree(1.0, 6);
    const RecoveredGenerator g = recover_generator(from_generator(tree, drivers::sqrt_norm()), scalar_grid(kGrid));
    EXPECT_FALSE(check_recovered_modulus(g, Modulus::linear(0.1)).pass());
}

TEST(Recover, RichardsonAgreesForDeterministicDrivers)
{
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const auto one = recover_row(e, scalar_grid(kGrid), 2, 1);
    const auto two = recover_row(e, scalar_grid(kGrid), 2, 2);
    ASSERT_EQ(one.size(), two.size());
    // Two steps of sqrt(|z|) give the same per-step rate because Z stays z.
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_NEAR(one[i], two[i], 1e-12);
    }
}

TEST(Recover, DifferentMuDifferByMuGap)
{
    auto tree = make_tree(1.0, 6);
    const RecoveredGenerator g1 = recover_generator(drift_uncertainty(tree, 0.1), scalar_grid(kGrid));
    const RecoveredGenerator g2 = recover_generator(drift_uncertainty(tree, 0.3), scalar_grid(kGrid));
    const UniquenessReport u = uniqueness_probe(g1, g2, scalar_grid(kGrid), {0, 3, 5}, 1e-10);
    EXPECT_FALSE(u.check.pass());
    EXPECT_NEAR(u.max_difference, 0.2 * 4.0, 1e-12);
    EXPECT_TRUE(uniqueness_probe(g1, g1, scalar_grid(kGrid), {0, 3, 5}).check.pass());
}

TEST(Recover, ReferenceNodesAgree)
{
    auto tree = make_tree(1.0, 6);
    const FExpectation e = from_generator(tree, drivers::mu_abs_z(0.1));
    RecoverOptions opts;
    opts.reference_node = 0;
    const auto a = recover_row(e, scalar_grid(kGrid), 4, 1, opts);
    opts.reference_node = 7;
    const auto b = recover_row(e, scalar_grid(kGrid), 4, 1, opts);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a[i], b[i], 1e-13);
    }
}

TEST(Recover, ViaDoobMeyerMatchesDirect)
{
    auto tree = make_tree(1.0, 4);
    const FExpectation e = drift_uncertainty(tree, 0.1);
    const std::vector<double> grid{-1.0, 0.0, 1.0};
    const RecoveredGenerator direct = recover_generator(e, scalar_grid(grid));
    const RecoveredGenerator via = recover_via_doob_meyer(e, scalar_grid(grid), Modulus::linear(0.1), 1e-7);
    EXPECT_TRUE(uniqueness_probe(direct, via, scalar_grid(grid), {0, 1, 2, 3}, 1e-6).check.pass());
}

TEST(Recover, IsotropicTwoDimensional)
{
    auto tree = make_tree(1.0, 4, 2);
    const FExpectation e = from_generator(tree, drivers::mu_abs_z(0.1));
    const auto grid = isotropic_grid(2, {0.5, 1.0, 2.0});
    const RecoveredGenerator g = recover_generator(e, grid);
    EXPECT_EQ(g.rule(), Interpolation::LinearInNorm);
    for (std::size_t i = 0; i < g.z_grid().size(); ++i) {
        EXPECT_NEAR(g.table()[0][i], 0.1 * norm(g.z_grid()[i]), 1e-13);
    }
    const double probe[] = {0.6, -0.8};
    EXPECT_NEAR(g(1, probe), 0.1, 1e-13);
}

TEST(Recover, ExtrapolationIsFlagged)
{
    auto tree = make_tree(1.0, 4);
    const RecoveredGenerator g =
        recover_generator(from_generator(tree, drivers::mu_abs_z(0.1)), scalar_grid({-1.0, 0.0, 1.0}));
    bool flag = false;
    const double z[] = {3.0};
    EXPECT_NEAR(g(0, z, &flag), 0.3, 1e-13);
    EXPECT_TRUE(flag);
    bool inside_flag = false;
    const double inside[] = {0.5};
    EXPECT_NEAR(g(0, inside, &inside_flag), 0.05, 1e-13);
    EXPECT_FALSE(inside_flag);
    // The flag is sticky across calls.
    g(0, inside, &flag);
    EXPECT_TRUE(flag);
}

TEST(Recover, JsonRoundTrip)
{
    auto tree = make_tree(1.0, 6);
    const RecoveredGenerator g = recover_generator(from_generator(tree, drivers::sqrt_norm()), scalar_grid(kGrid));
    const RecoveredGenerator back = recovered_from_json(to_json(g));
    EXPECT_EQ(back.steps(), g.steps());
    EXPECT_EQ(back.z_grid(), g.z_grid());
    EXPECT_EQ(back.table(), g.table());
    EXPECT_EQ(back.rule(), g.rule());
    EXPECT_EQ(to_json(back).dump(), to_json(g).dump());
}

TEST(Recover, EmptyGridStillCarriesTheOrigin)
{
    auto tree = make_tree(1.0, 4);
    const RecoveredGenerator g = recover_generator(classical(tree), {});
    ASSERT_EQ(g.z_grid().size(), 1u);
    EXPECT_EQ(g.z_grid()[0], std::vector<double>{0.0});
}

TEST(NullIntegral, ZeroEta)
{
    auto tree = make_tree(1.0, 8);
    const RecoveredGenerator g = recover_generator(from_generator(tree, drivers::sqrt_norm()), scalar_grid(kGrid));
    const AdaptedField eta = eta_field(tree, 1, [](int, std::size_t, int) { return 0.0; });
    EXPECT_LE(null_integral_check(g, tree, eta, 0, 8).residual, 1e-14);
}

TEST(NullIntegral, ConstantAndAdaptedEta)
{
    auto tree = make_tree(1.0, 8);
    const RecoveredGenerator g = recover_generator(from_generator(tree, drivers::sqrt_norm()), scalar_grid(kGrid));
    const AdaptedField constant = eta_field(tree, 1, [](int, std::size_t, int) { return 1.0; });
    EXPECT_LE(null_integral_check(g, tree, constant, 0, 8).residual, 1e-10);
    EXPECT_LE(null_integral_check(g, tree, constant, 3, 6).residual, 1e-10);

    const AdaptedField adapted = eta_field(tree, 1, [&](int k, std::size_t node, int) {
        const double b = tree->brownian(k, node);
        return b >= 0.0 ? 2.0 : -0.5;
    });
    const NullIntegralResult r = null_integral_check(g, tree, adapted, 0, 8);
    EXPECT_LE(r.residual, 1e-10);
    EXPECT_EQ(r.extrapolated, 0u);
}

TEST(NullIntegral, RandomAdaptedEtaProperty)
{
    auto tree = make_tree(1.0, 6);
    const RecoveredGenerator g =
        recover_generator(from_generator(tree, drivers::mu_abs_z(0.1)), scalar_grid(kGrid));
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
        const AdaptedField eta = eta_field(tree, 1, [&](int, std::size_t, int) { return u(rng); });
        EXPECT_LE(null_integral_check(g, tree, eta, 0, 6).residual, 1e-10) << trial;
    }
}

TEST(NullIntegral, TwoDimensionalEta)
{
    auto tree = make_tree(1.0, 4, 2);
    const RecoveredGenerator g =
        recover_generator(from_generator(tree, drivers::mu_abs_z(0.1)), isotropic_grid(2, {0.5, 1.0, 2.0}));
    const AdaptedField eta = eta_field(tree, 2, [](int, std::size_t node, int j) {
        return j == 0 ? 1.0 : (node % 2 == 0 ? 0.5 : -0.5);
    });
    EXPECT_LE(null_integral_check(g, tree, eta, 0, 4).residual, 1e-10);
}

TEST(Verify, OracleSolveAgreesWithVerification)
{
    // Independent leaf-averaging solve of E^{0.1|z|} against the library.
    auto tree = make_tree(1.0, 6);
    const FExpectation e = from_generator(tree, drivers::mu_abs_z(0.1));
    const oracle::Tree ot{1.0, 6, 1};
    const NamedClaim claim = make_claim(tree, "abs_B_T");
    const auto expected = oracle::g_expectation(
        ot, claim.leaves, [](const std::vector<double>& z) { return 0.1 * std::abs(z[0]); });
    const AdaptedField y = e.process(claim.leaves);
    for (int k = 0; k <= 6; ++k) {
        const auto got = y.at(k);
        EXPECT_LE(oracle::max_abs_diff(std::vector<double>(got.begin(), got.end()), expected[static_cast<std::size_t>(k)]),
                  1e-13);
    }
}
