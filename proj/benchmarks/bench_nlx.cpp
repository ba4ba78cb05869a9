#include <benchmark/benchmark.h>

#include "nlx/bsde.hpp"
#include "nlx/corpus.hpp"
#include "nlx/doobmeyer.hpp"
#include "nlx/efsde.hpp"
#include "nlx/represent.hpp"

using namespace nlx;

namespace {

TreePtr make_tree(int N, int d = 1)
{
    return FiltrationTree::build(TimeGrid::make(1.0, N), d);
}

void BM_BuildTree(benchmark::State& state)
{
    const int N = static_cast<int>(state.range(0));
    const int d = static_cast<int>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(make_tree(N, d));
    }
    state.counters["leaves"] = static_cast<double>(make_tree(N, d)->node_count(N));
}
BENCHMARK(BM_BuildTree)->Args({8, 1})->Args({14, 1})->Args({20, 1})->Args({6, 2})->Args({7, 3});

void BM_SolveBsde(benchmark::State& state)
{
    auto tree = make_tree(static_cast<int>(state.range(0)));
    const Generator g = drivers::sqrt_norm();
    const Slice xi = make_claim(tree, "abs_B_T").leaves;
    BsdeOptions opts;
    opts.scheme = state.range(1) == 0 ? Scheme::Explicit : Scheme::Implicit;
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_bsde(g, xi, tree, opts));
    }
}
BENCHMARK(BM_SolveBsde)->Args({10, 0})->Args({16, 0})->Args({16, 1})->Args({20, 0});

void BM_Picard(benchmark::State& state)
{
    auto tree = make_tree(static_cast<int>(state.range(0)));
    const EfsdeProblem problem(drift_uncertainty(tree, 0.1), EfsdeDriver::linear(2.0),
                               make_claim(tree, "abs_B_T").leaves, {0.5});
    PicardOptions opts;
    opts.preflight_translation = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(picard_solve(problem, opts));
    }
}
BENCHMARK(BM_Picard)->Arg(8)->Arg(12)->Arg(16);

void BM_Penalize(benchmark::State& state)
{
    auto tree = make_tree(10);
    const FExpectation e = from_generator(tree, drivers::mu_abs_z(0.1));
    const AdaptedField base = e.process(make_claim(tree, "abs_B_T").leaves);
    AdaptedField y(tree);
    for (int k = 0; k <= 10; ++k) {
        Slice s(base.at(k).begin(), base.at(k).end());
        for (double& v : s) {
            v -= 0.05 * tree->time(k);
        }
        y.set(k, std::move(s));
    }
    const auto levels = power_schedule(tree->dt(), 1e6, static_cast<double>(state.range(0)));
    PenalizeOptions opts;
    opts.oracle = false;
    for (auto _ : state) {
        benchmark::DoNotOptimize(penalize(e, y, {}, levels, opts));
    }
}
BENCHMARK(BM_Penalize)->Arg(64)->Arg(1024);

void BM_Recover(benchmark::State& state)
{
    auto tree = make_tree(static_cast<int>(state.range(0)));
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const auto grid = scalar_grid({-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(recover_generator(e, grid));
    }
}
BENCHMARK(BM_Recover)->Arg(8)->Arg(12);

void BM_Verify(benchmark::State& state)
{
    auto tree = make_tree(static_cast<int>(state.range(0)));
    const FExpectation e = drift_uncertainty(tree, 0.1);
    const auto claims = default_claims(tree);
    const RecoveredGenerator g =
        recover_generator(e, scalar_grid({-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0}));
    for (auto _ : state) {
        benchmark::DoNotOptimize(verify_representation(e, g, claims, 1e-12));
    }
}
BENCHMARK(BM_Verify)->Arg(8)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
