// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlx/corpus.hpp"
#include "nlx/doobmeyer.hpp"
#include "nlx/efsde.hpp"
#include "nlx/fexp.hpp"
#include "nlx/represent.hpp"

#if NLX_WITH_CLI
#include "cli.hpp"
#endif

using namespace nlx;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void require(bool ok, const std::string& note)
    {
        pass = pass && ok;
        notes.push_back((ok ? "ok   " : "FAIL ") + note);
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string summary(const CheckReport& r)
{
    return r.check + " violations=" + std::to_string(r.violations) + "/" + std::to_string(r.comparisons) +
           " max_excess=" + fmt(r.max_excess);
}

TreePtr make_tree(double T, int N, int d = 1)
{
    return FiltrationTree::build(TimeGrid::make(T, N), d);
}

struct NamedOperator {
    std::string name;
    FExpectation e;
    Modulus phi;
};

std::vector<NamedOperator> builtin_operators(const TreePtr& tree)
{
    return {
        {"g=0.1|z|", from_generator(tree, drivers::mu_abs_z(0.1)), Modulus::linear(0.1)},
        {"g=sqrt|z|", from_generator(tree, drivers::sqrt_norm()), Modulus::sqrt()},
        {"drift(0.1)", drift_uncertainty(tree, 0.1), Modulus::linear(0.1)},
        {"classical", classical(tree), Modulus::zero()},
    };
}

double max_field_diff(const AdaptedField& a, const AdaptedField& b)
{
    double worst = 0.0;
    for (int k = a.first_step(); k <= a.last_step(); ++k) {
        const auto x = a.at(k);
        const auto y = b.at(k);
        for (std::size_t i = 0; i < x.size(); ++i) {
            worst = std::max(worst, std::abs(x[i] - y[i]));
        }
    }
    return worst;
}

AdaptedField minus_drift(const AdaptedField& base, double c)
{
    AdaptedField y(base.tree_ptr());
    for (int k = 0; k <= base.tree().steps(); ++k) {
        Slice s(base.at(k).begin(), base.at(k).end());
        for (double& v : s) {
            v -= c * base.tree().time(k);
        }
        y.set(k, std::move(s));
    }
    return y;
}

AdaptedField scalar_field(const TreePtr& tree, const std::function<double(int, std::size_t)>& f)
{
    return process_from_nodes(tree, f);
}

Outcome criterion_axioms()
{
    Outcome out;
    auto tree = make_tree(1.0, 8);
    const auto claims = default_claims(tree);
    const auto events = default_events(*tree);
    for (const auto& op : builtin_operators(tree)) {
        const AxiomReport r = check_axioms(op.e, claims, events, 1e-12);
        for (const CheckReport* c : {&r.monotonicity, &r.constant_preservation, &r.consistency, &r.zero_one}) {
            out.require(c->pass(), op.name + " " + summary(*c));
        }
    }
    return out;
}

Outcome criterion_domination()
{
    Outcome out;
    auto tree = make_tree(1.0, 8);
    const auto claims = default_claims(tree);
    for (const auto& op : builtin_operators(tree)) {
        const DominationSuite s = check_domination_suite(op.e, op.phi, claims, 1e-10);
        for (const CheckReport* c : {&s.symmetry, &s.two_sided, &s.sandwich, &s.abs_bound}) {
            out.require(c->pass(), op.name + " phi=" + op.phi.name + " " + summary(*c));
        }
    }
    return out;
}

Outcome criterion_picard()
{
    Outcome out;
    struct Case {
        std::string name;
        FExpectation e;
        EfsdeDriver f;
        std::string claim;
        std::vector<double> z;
        double eta;
        int min_windows;
    };
    auto tree = make_tree(1.0, 8);
    auto fine = make_tree(1.0, 10);
    std::vector<Case> cases{
        {"classical f=0 |B_T|", classical(tree), EfsdeDriver::zero(), "abs_B_T", {}, 0.0, 1},
        {"classical f=0.3 B_T^2", classical(tree), EfsdeDriver::constant(0.3), "B_T_sq", {}, 0.0, 1},
        {"classical f=-y const:1", classical(tree), EfsdeDriver::linear(-1.0), "const:1", {}, 0.0, 1},
        {"drift(0.1) f=0.5y |B_T|", drift_uncertainty(tree, 0.1), EfsdeDriver::linear(0.5), "abs_B_T", {}, 0.0, 1},
        {"g=0.1|z| f=2y z=0.5 eta=0.25", from_generator(tree, drivers::mu_abs_z(0.1)), EfsdeDriver::linear(2.0),
         "abs_B_T", {0.5}, 0.25, 4},
        {"g=sqrt|z| f=2y running_max", from_generator(tree, drivers::sqrt_norm()), EfsdeDriver::linear(2.0),
         "running_max", {}, 0.0, 4},
        {"drift(0.1) f=table z=-0.5", drift_uncertainty(tree, 0.1),
         EfsdeDriver::table({-1.0, 0.0, 1.0}, {1.0, 0.0, -2.0}), "B_T", {-0.5}, 0.1, 4},
        {"classical f=2y N=10 eta=1", classical(fine), EfsdeDriver::linear(2.0), "ind_B_T_pos", {}, 1.0, 4},
    };
    for (const auto& c : cases) {
        const TreePtr& t = c.e.tree_ptr();
        std::optional<AdaptedField> eta;
        if (c.eta != 0.0) {
            eta = scalar_field(t, [&](int, std::size_t) { return c.eta; });
        }
        const EfsdeProblem problem(c.e, c.f, make_claim(t, c.claim).leaves, c.z, eta);
        const PicardResult r = picard_solve(problem);
        const double err = max_field_diff(r.y, backward_oracle(problem));
        out.require(err <= 1e-11 && r.residual <= 1e-11 && r.windows >= c.min_windows,
                    c.name + " oracle_error=" + fmt(err) + " residual=" + fmt(r.residual) +
                        " windows=" + std::to_string(r.windows));
    }
    return out;
}

Outcome criterion_comparison()
{
    Outcome out;
    auto tree = make_tree(1.0, 8);
    const std::vector<EfsdeDriver> fs{EfsdeDriver::zero(), EfsdeDriver::constant(0.2), EfsdeDriver::linear(-1.0),
                                      EfsdeDriver::linear(0.5)};
    const auto zero_eta = scalar_field(tree, [](int, std::size_t) { return 0.0; });
    const auto abs_b = scalar_field(tree, [&](int k, std::size_t node) { return std::abs(tree->brownian(k, node)); });
    const auto abs_b_plus = scalar_field(tree, [&](int k, std::size_t node) {
        return std::abs(tree->brownian(k, node)) + 0.5;
    });
    const auto claims = make_claims(tree, {"B_T", "abs_B_T", "neg_B_T", "ind_B_T_pos", "running_max"});

    for (const auto& op : builtin_operators(tree)) {
        CheckReport total("comparison");
        for (const auto& f : fs) {
            for (const std::vector<double>& z : {std::vector<double>{}, std::vector<double>{0.5}}) {
                for (const auto& x : claims) {
                    Slice shifted = x.leaves;
                    for (double& v : shifted) {
                        v += 1.0;
                    }
                    total.merge(compare_solutions(EfsdeProblem(op.e, f, x.leaves, z),
                                                  EfsdeProblem(op.e, f, shifted, z)));
                    total.merge(compare_solutions(EfsdeProblem(op.e, f, x.leaves, z, zero_eta),
                                                  EfsdeProblem(op.e, f, x.leaves, z, abs_b)));
                    total.merge(compare_solutions(EfsdeProblem(op.e, f, x.leaves, z, abs_b),
                                                  EfsdeProblem(op.e, f, x.leaves, z, abs_b_plus)));
                    for (const auto& y : claims) {
                        Slice upper(x.leaves.size());
                        for (std::size_t l = 0; l < upper.size(); ++l) {
                            upper[l] = std::max(x.leaves[l], y.leaves[l]);
                        }
                        total.merge(compare_solutions(EfsdeProblem(op.e, f, x.leaves, z),
                                                      EfsdeProblem(op.e, f, upper, z)));
                    }
                }
            }
        }
        out.require(total.pass(), op.name + " " + summary(total));
    }
    return out;
}

Outcome criterion_penalization()
{
    Outcome out;
    auto tree = make_tree(1.0, 8);
    const std::vector<double> levels{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
    struct Case {
        std::string name;
        FExpectation e;
        std::string claim;
        double c;
    };
    const std::vector<Case> cases{
        {"g=0.1|z| |B_T| - 0.05t", from_generator(tree, drivers::mu_abs_z(0.1)), "abs_B_T", 0.05},
        {"drift(0.1) B_T^2 - 0.2t", drift_uncertainty(tree, 0.1), "B_T_sq", 0.2},
        {"classical -0.1t", classical(tree), "const:0", 0.1},
    };
    for (const auto& c : cases) {
        const AdaptedField y = minus_drift(c.e.process(make_claim(tree, c.claim).leaves), c.c);
        const PenalizationRun run = penalize(c.e, y, {}, levels);
        out.require(run.monotone.pass(), c.name + " " + summary(run.monotone));
    }
    return out;
}

Outcome criterion_doob_meyer()
{
    Outcome out;
    const double c = 0.1;
    const int N = 10;
    auto tree = make_tree(1.0, N);
    const double dt = tree->dt();
    AdaptedField y(tree);
    for (int k = 0; k <= N; ++k) {
        y.set(k, Slice(tree->node_count(k), -c * tree->time(k)));
    }
    const std::vector<double> schedule = power_schedule(dt, 1000.0, 1e4);
    const PenalizationRun run = penalize(classical(tree), y, {}, schedule);

    // e_k = Y_k - y_k solves e_k = (c dt + e_{k+1}) / (1 + n dt), e_N = 0.
    double oracle_gap = 0.0;
    for (const auto& level : run.levels) {
        const double h = level.level * dt;
        double a = 0.0;
        for (int k = 0; k < N; ++k) {
            a += h * c * dt * (1.0 - std::pow(1.0 + h, -(N - k))) / h;
            for (double v : level.a.at(k + 1)) {
                oracle_gap = std::max(oracle_gap, std::abs(v - a));
            }
        }
    }
    out.require(oracle_gap <= 1e-12, "closed-form level error max_gap=" + fmt(oracle_gap) + " over " +
                                        std::to_string(run.levels.size()) + " levels");

    const LevelResult& last = run.levels.back();
    double worst = 0.0;
    for (int k = 0; k <= N; ++k) {
        for (double v : last.a.at(k)) {
            worst = std::max(worst, std::abs(v - c * tree->time(k)));
        }
    }
    out.require(last.level == 1e4 && worst <= 1e-3,
                "level=" + fmt(last.level) + " max|A_t - 0.1t|=" + fmt(worst));
    out.require(run.residual_decrease.pass(), summary(run.residual_decrease));
    out.require(run.increasing.pass(), summary(run.increasing));

    const DoobMeyerDecomposition d = decompose(classical(tree), y, {}, 1e-3, schedule);
    out.require(d.converged, "decompose target=1e-3 level=" + fmt(d.level) + " residual=" + fmt(d.residual));
    return out;
}

const std::vector<double> kGrid{-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0};

Outcome criterion_representation()
{
    Outcome out;
    auto tree = make_tree(1.0, 10);
    const FExpectation e = drift_uncertainty(tree, 0.1);
    const RecoveredGenerator g = recover_generator(e, scalar_grid(kGrid));
    double worst = 0.0;
    for (int k = 0; k < g.steps(); ++k) {
        for (double z : kGrid) {
            const double zs[] = {z};
            worst = std::max(worst, std::abs(g(k, zs) - 0.1 * std::abs(z)));
        }
    }
    out.require(worst <= 1e-12, "max|g - 0.1|z||=" + fmt(worst));
    const VerificationReport v = verify_representation(e, g, default_claims(tree), 1e-12);
    out.require(v.check.pass() && v.worst() <= 1e-12,
                "verify worst=" + fmt(v.worst()) + " extrapolated=" + std::to_string(v.extrapolated_count));
    return out;
}

Outcome criterion_round_trip()
{
    Outcome out;
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const auto claims = default_claims(tree);
    const RecoveredGenerator g = recover_generator(e, covering_grid(kGrid, scan_z_values(e, claims)));
    const VerificationReport v = verify_representation(e, g, claims, 1e-10);
    out.require(v.check.pass() && v.extrapolated_count == 0,
                "verify worst=" + fmt(v.worst()) + " extrapolated=" + std::to_string(v.extrapolated_count) +
                    " grid=" + std::to_string(g.z_grid().size()));
    const CheckReport m = check_recovered_modulus(g, Modulus::sqrt(), 1e-10);
    out.require(m.pass(), summary(m));
    return out;
}

Outcome criterion_null_integral()
{
    Outcome out;
    const int N = 8;
    auto tree = make_tree(1.0, N);
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<std::size_t> pick(0, kGrid.size() - 1);
    const std::vector<std::pair<std::string, FExpectation>> ops{
        {"g=sqrt|z|", from_generator(tree, drivers::sqrt_norm())},
        {"drift(0.1)", drift_uncertainty(tree, 0.1)},
    };
    for (const auto& [name, e] : ops) {
        const RecoveredGenerator g = recover_generator(e, scalar_grid(kGrid));
        const std::vector<std::pair<std::string, AdaptedField>> etas{
            {"eta=1", scalar_field(tree, [](int, std::size_t) { return 1.0; })},
            {"eta=sign(B)", scalar_field(tree, [&](int k, std::size_t node) {
                 return tree->brownian(k, node) >= 0.0 ? 1.0 : -1.0;
             })},
            {"eta=2*1{B>0}-0.5", scalar_field(tree, [&](int k, std::size_t node) {
                 return tree->brownian(k, node) > 0.0 ? 2.0 : -0.5;
             })},
            {"eta=random grid", scalar_field(tree, [&](int, std::size_t) { return kGrid[pick(rng)]; })},
        };
        for (const auto& [eta_name, eta] : etas) {
            double worst = 0.0;
            std::size_t extrapolated = 0;
            for (const auto& [r, t] : std::vector<std::pair<int, int>>{{0, N}, {2, 6}, {5, N}}) {
                const NullIntegralResult res = null_integral_check(g, tree, eta, r, t);
                worst = std::max(worst, res.residual);
                extrapolated += res.extrapolated;
            }
            out.require(worst <= 1e-10, name + " " + eta_name + " residual=" + fmt(worst) +
                                            " extrapolated=" + std::to_string(extrapolated));
        }
    }
    return out;
}

std::string slurp(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome criterion_reproducibility()
{
    Outcome out;
#if NLX_WITH_CLI
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "nlx_acceptance_repro";
    fs::remove_all(root);
    for (const char* name : {"axioms_sqrt.ini", "picard_patched.ini", "doobmeyer_linear.ini", "recover_sqrt.ini",
                             "represent_drift.ini", "scheme_gap.ini"}) {
        const cli::Config config = cli::Config::load(fs::path(NLX_CONFIG_DIR) / name);
        std::vector<fs::path> dirs;
        for (const char* run : {"a", "b"}) {
            cli::RunOptions opts;
            opts.out_dir = root / name / run;
            cli::run(config, opts);
            dirs.push_back(*opts.out_dir);
        }
        std::size_t files = 0;
        bool same = true;
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const auto file = entry.path().filename();
            if (file == "timing.json") {
                continue;  // wall-clock only
            }
            ++files;
            same = same && fs::exists(dirs[1] / file) && slurp(entry.path()) == slurp(dirs[1] / file);
        }
        out.require(same && files > 0, std::string(name) + " files=" + std::to_string(files));
    }
#else
    auto tree = make_tree(1.0, 8);
    const FExpectation e = from_generator(tree, drivers::sqrt_norm());
    const auto claims = default_claims(tree);
    const std::string a = to_json(recover_generator(e, scalar_grid(kGrid))).dump();
    const std::string b = to_json(recover_generator(e, scalar_grid(kGrid))).dump();
    out.require(a == b, "recovered table json bytes=" + std::to_string(a.size()));
#endif
    return out;
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"axiom suite (N=8, tol 1e-12)", criterion_axioms},
        {"domination suite (i)-(iv) (tol 1e-10)", criterion_domination},
        {"picard == backward oracle (tol 1e-11)", criterion_picard},
        {"comparison on problem corpus (N=8)", criterion_comparison},
        {"penalization monotone, levels 1..1024 (tol 1e-12)", criterion_penalization},
        {"doob-meyer classical -0.1t (N=10, level 1e4, tol 1e-3)", criterion_doob_meyer},
        {"representation of drift(0.1) (tol 1e-12)", criterion_representation},
        {"sqrt round trip (tol 1e-10)", criterion_round_trip},
        {"null integral (N=8, tol 1e-10)", criterion_null_integral},
        {"reproducibility (byte-identical outputs)", criterion_reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& ex) {
            o.require(false, std::string("exception: ") + ex.what());
        }
        std::printf("%s %2zu %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str());
        for (const auto& note : o.notes) {
            std::printf("        %s\n", note.c_str());
        }
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
