#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include "nlx/bsde.hpp"
#include "nlx/corpus.hpp"
#include "nlx/doobmeyer.hpp"
#include "nlx/efsde.hpp"
#include "nlx/error.hpp"
#include "nlx/fexp.hpp"
#include "nlx/generators.hpp"
#include "nlx/lattice.hpp"
#include "nlx/parallel.hpp"
#include "nlx/represent.hpp"

namespace nlx::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s)
{
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string clean_value(std::string v)
{
    for (const char* marker : {" ;", "\t;", " #", "\t#"}) {
        if (auto pos = v.find(marker); pos != std::string::npos) {
            v = v.substr(0, pos);
        }
    }
    v = trim(v);
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
        v = v.substr(1, v.size() - 2);
    }
    return v;
}

void clean_tree(pt::ptree& tree)
{
    for (auto& [key, child] : tree) {
        (void)key;
        if (child.empty()) {
            child.put_value(clean_value(child.get_value<std::string>()));
        } else {
            clean_tree(child);
        }
    }
}

double parse_double(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
    }
    return v;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : out_(path)
    {
        if (!out_) {
            throw ConfigError("cannot write " + path.string());
        }
        out_ << std::setprecision(17) << header << '\n';
    }
    template <typename... Ts>
    void row(const Ts&... values)
    {
        bool first = true;
        ((out_ << (first ? "" : ","), out_ << values, first = false), ...);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const nlohmann::json& doc)
{
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write " + path.string());
    }
    out << doc.dump(2) << '\n';
}

// --- experiment context -----------------------------------------------------

struct Context {
    const Config& config;
    TreePtr tree;
    std::function<FExpectation()> make_op;
    std::optional<FExpectation> op_;
    std::optional<Generator> generator;
    Modulus phi;
    std::vector<NamedClaim> claims;
    fs::path out_dir;
    bool via_doob_meyer = false;
    std::map<std::string, double> metrics;
    nlohmann::json checks = nlohmann::json::array();
    bool pass = true;
    std::optional<RecoveredGenerator> recovered;

    void record(const std::string& command, const CheckReport& report)
    {
        checks.push_back({{"command", command},
                          {"check", report.check},
                          {"pass", report.pass()},
                          {"violations", report.violations},
                          {"comparisons", report.comparisons}});
        pass = pass && report.pass();
    }
    void record_flag(const std::string& command, const std::string& name, bool ok)
    {
        checks.push_back({{"command", command}, {"check", name}, {"pass", ok}});
        pass = pass && ok;
    }
    void metric(const std::string& name, double value) { metrics[name] = value; }

    const FExpectation& op()
    {
        if (!op_) {
            op_ = make_op();
        }
        return *op_;
    }
};

Generator build_generator(const Config& c)
{
    DriverSpec spec;
    spec.key = c.get_string("generator.key");
    spec.modulus = c.get_string("generator.modulus", "");
    for (const char* p : {"mu", "y_coef"}) {
        const std::string key = std::string("generator.") + p;
        if (c.has(key)) {
            spec.params[p] = c.get_double(key);
        }
    }
    return make_generator(spec);
}

std::optional<Generator> operator_generator(const Config& c)
{
    const std::string kind = c.get_string("operator.kind");
    if (kind == "from_generator") {
        return build_generator(c);
    }
    if (kind == "classical") {
        return drivers::zero();
    }
    if (kind == "drift_uncertainty") {
        return drivers::mu_abs_z(c.get_double("operator.mu"));
    }
    throw ConfigError("config key 'operator.kind': unknown operator '" + kind +
                      "' (expected from_generator, classical, drift_uncertainty)");
}

FExpectation build_operator(const Config& c, const TreePtr& tree, const Generator& generator)
{
    const std::string kind = c.get_string("operator.kind");
    if (kind == "from_generator") {
        return from_generator(tree, generator);
    }
    if (kind == "classical") {
        return classical(tree);
    }
    return drift_uncertainty(tree, c.get_double("operator.mu"));
}

EfsdeDriver build_driver(const Config& c, const std::string& section)
{
    const std::string key = c.get_string(section + ".driver", "zero");
    if (key == "zero") {
        return EfsdeDriver::zero();
    }
    if (key == "constant") {
        return EfsdeDriver::constant(c.get_double(section + ".c"));
    }
    if (key == "linear") {
        return EfsdeDriver::linear(c.get_double(section + ".a"));
    }
    if (key == "table") {
        return EfsdeDriver::table(c.get_doubles(section + ".ys", {}), c.get_doubles(section + ".fs", {}));
    }
    throw ConfigError("config key '" + section + ".driver': unknown driver '" + key +
                      "' (expected zero, constant, linear, table)");
}

std::vector<double> direction(const Config& c, const std::string& key, const FiltrationTree& tree)
{
    std::vector<double> z = c.get_doubles(key, {});
    if (z.empty()) {
        z.assign(static_cast<std::size_t>(tree.dim()), 0.0);
    }
    if (z.size() == 1 && tree.dim() > 1) {
        z.assign(static_cast<std::size_t>(tree.dim()), z[0]);
    }
    if (z.size() != static_cast<std::size_t>(tree.dim())) {
        throw ConfigError("config key '" + key + "': needs d components");
    }
    return z;
}

// --- commands ---------------------------------------------------------------

nlohmann::json cmd_axioms(Context& ctx)
{
    const double tol = ctx.config.get_double("checks.tol", kExactTol);
    const AxiomReport axioms = check_axioms(ctx.op(), ctx.claims, default_events(*ctx.tree), tol);
    const CheckReport translation = check_translation(ctx.op(), ctx.claims, default_shifts(ctx.tree), tol);
    ctx.record("axioms", axioms.monotonicity);
    ctx.record("axioms", axioms.constant_preservation);
    ctx.record("axioms", axioms.consistency);
    ctx.record("axioms", axioms.zero_one);
    ctx.record("axioms", translation);
    ctx.metric("axioms.violations", static_cast<double>(axioms.monotonicity.violations +
                                                        axioms.constant_preservation.violations +
                                                        axioms.consistency.violations + axioms.zero_one.violations));
    ctx.metric("axioms.translation_violations", static_cast<double>(translation.violations));
    return {{"axioms", to_json(axioms)}, {"translation", to_json(translation)}};
}

nlohmann::json cmd_dominate(Context& ctx)
{
    const double tol = ctx.config.get_double("checks.chained_tol", kChainedTol);
    const DominationSuite suite = check_domination_suite(ctx.op(), ctx.phi, ctx.claims, tol);
    for (const CheckReport* r : {&suite.symmetry, &suite.two_sided, &suite.sandwich, &suite.abs_bound, &suite.continuity}) {
        ctx.record("dominate", *r);
    }
    ctx.metric("dominate.violations", static_cast<double>(suite.symmetry.violations + suite.two_sided.violations +
                                                          suite.sandwich.violations + suite.abs_bound.violations +
                                                          suite.continuity.violations));
    nlohmann::json out = to_json(suite);
    out["phi"] = ctx.phi.name;
    return out;
}

nlohmann::json cmd_solve(Context& ctx)
{
    const NamedClaim claim = make_claim(ctx.tree, ctx.config.get_string("solve.claim", "B_T"));
    BsdeOptions expl;
    BsdeOptions impl;
    impl.scheme = Scheme::Implicit;
    const BsdeSolution a = solve_bsde(*ctx.generator, claim.leaves, ctx.tree, expl);
    const BsdeSolution b = solve_bsde(*ctx.generator, claim.leaves, ctx.tree, impl);
    double gap = 0.0;
    for (int k = 0; k <= ctx.tree->steps(); ++k) {
        auto x = a.y.at(k);
        auto y = b.y.at(k);
        for (std::size_t node = 0; node < x.size(); ++node) {
            gap = std::max(gap, std::abs(x[node] - y[node]));
        }
    }
    CsvWriter csv(ctx.out_dir / "solve.csv", "step,node,y_explicit,y_implicit,z0");
    for (int k = 0; k <= ctx.tree->steps(); ++k) {
        auto x = a.y.at(k);
        auto y = b.y.at(k);
        for (std::size_t node = 0; node < x.size(); ++node) {
            const double z0 = k < ctx.tree->steps() ? a.z.value(k, node, 0) : 0.0;
            csv.row(k, node, x[node], y[node], z0);
        }
    }
    ctx.metric("solve.y0_explicit", a.y.value(0, 0));
    ctx.metric("solve.y0_implicit", b.y.value(0, 0));
    ctx.metric("solve.scheme_gap", gap);
    return {{"claim", claim.name},
            {"generator", ctx.generator->name()},
            {"y0_explicit", a.y.value(0, 0)},
            {"y0_implicit", b.y.value(0, 0)},
            {"scheme_gap", gap}};
}

nlohmann::json cmd_picard(Context& ctx)
{
    const Config& c = ctx.config;
    const NamedClaim claim = make_claim(ctx.tree, c.get_string("picard.claim", "const:1"));
    const std::vector<double> z = direction(c, "picard.z", *ctx.tree);
    std::optional<AdaptedField> eta;
    if (c.has("picard.eta")) {
        const double value = c.get_double("picard.eta");
        eta = AdaptedField::constant(ctx.tree, value, 0, ctx.tree->steps());
    }
    const EfsdeProblem problem(ctx.op(), build_driver(c, "picard"), claim.leaves, z, eta);
    const double tol = c.get_double("picard.tol", 1e-11);
    const PicardResult result = picard_solve(problem);
    ctx.record_flag("picard", "fixed_point_residual", result.residual <= tol);
    nlohmann::json out{{"claim", claim.name},
                       {"driver", problem.f.name},
                       {"lambda", problem.f.lipschitz},
                       {"windows", result.windows},
                       {"window_steps", result.window_steps},
                       {"iterations", result.iterations},
                       {"relaxed", result.relaxed},
                       {"residual", result.residual},
                       {"y0", result.y.value(0, 0)}};
    ctx.metric("picard.residual", result.residual);
    ctx.metric("picard.iterations", result.iterations);
    ctx.metric("picard.y0", result.y.value(0, 0));

    std::optional<AdaptedField> oracle;
    if (problem.f.lipschitz * ctx.tree->dt() < 1.0) {
        oracle = backward_oracle(problem);
        double err = 0.0;
        for (int k = 0; k <= ctx.tree->steps(); ++k) {
            auto a = oracle->at(k);
            auto b = result.y.at(k);
            for (std::size_t node = 0; node < a.size(); ++node) {
                err = std::max(err, std::abs(a[node] - b[node]));
            }
        }
        ctx.record_flag("picard", "oracle_agreement", err <= tol);
        out["oracle_error"] = err;
        ctx.metric("picard.oracle_error", err);
    } else {
        out["oracle_error"] = nullptr;
    }
    CsvWriter csv(ctx.out_dir / "picard.csv", "step,node,y,oracle");
    for (int k = 0; k <= ctx.tree->steps(); ++k) {
        auto y = result.y.at(k);
        for (std::size_t node = 0; node < y.size(); ++node) {
            if (oracle) {
                csv.row(k, node, y[node], oracle->value(k, node));
            } else {
                csv.row(k, node, y[node], "");
            }
        }
    }
    return out;
}

nlohmann::json cmd_doobmeyer(Context& ctx)
{
    const Config& c = ctx.config;
    const NamedClaim claim = make_claim(ctx.tree, c.get_string("doobmeyer.claim", "const:0"));
    const double drift = c.get_double("doobmeyer.c", 0.0);
    const std::vector<double> z = direction(c, "doobmeyer.z", *ctx.tree);
    const int n = ctx.tree->steps();

    // Y_k = E[claim + z.B_N | F_k] - z.B_k - c t_k.
    Slice shifted = claim.leaves;
    const Slice zb_n = direction_brownian(*ctx.tree, z, n);
    for (std::size_t leaf = 0; leaf < shifted.size(); ++leaf) {
        shifted[leaf] += zb_n[leaf];
    }
    const AdaptedField base = ctx.op().process(shifted);
    AdaptedField y(ctx.tree);
    for (int k = 0; k <= n; ++k) {
        const Slice zb = direction_brownian(*ctx.tree, z, k);
        auto v = base.at(k);
        Slice s(v.size());
        for (std::size_t node = 0; node < s.size(); ++node) {
            s[node] = v[node] - zb[node] - drift * ctx.tree->time(k);
        }
        y.set(k, std::move(s));
    }

    std::vector<double> levels;
    const std::string spec = c.get_string("doobmeyer.levels", "powers");
    if (spec == "powers") {
        levels = power_schedule(ctx.tree->dt(), c.get_double("doobmeyer.max_ndt", 1e6),
                                c.get_double("doobmeyer.max_level", 0.0));
    } else {
        levels = c.get_doubles("doobmeyer.levels", {});
    }
    PenalizeOptions options;
    options.energy_cap = c.get_double("doobmeyer.energy_cap", 0.0);
    const PenalizationRun run = penalize(ctx.op(), y, z, levels, options);
    ctx.record("doob-meyer", run.monotone);
    ctx.record("doob-meyer", run.increasing);
    ctx.record("doob-meyer", run.residual_decrease);
    if (options.energy_cap > 0.0) {
        ctx.record("doob-meyer", run.energy);
    }
    {
        std::ofstream out(ctx.out_dir / "doobmeyer_levels.csv");
        write_levels_csv(out, run);
    }
    const LevelResult& last = run.levels.back();
    CsvWriter csv(ctx.out_dir / "doobmeyer_a.csv", "step,node,Y,y,A");
    for (int k = 0; k <= n; ++k) {
        auto a = last.a.at(k);
        for (std::size_t node = 0; node < a.size(); ++node) {
            csv.row(k, node, y.value(k, node), last.y.value(k, node), a[node]);
        }
    }
    const double target = c.get_double("doobmeyer.target", 0.0);
    nlohmann::json out{
        {"claim", claim.name},
        {"c", drift},
        {"levels", levels},
        {"final_level", last.level},
        {"final_residual", last.residual},
        {"a_terminal_mean", last.a_terminal_mean},
        {"a_terminal_min", last.a_terminal_min},
        {"a_terminal_max", last.a_terminal_max},
        {"unchecked_levels", static_cast<int>(std::count_if(run.levels.begin(), run.levels.end(),
                                                            [](const LevelResult& r) { return !r.oracle_checked; }))},
        {"checks", {to_json(run.monotone), to_json(run.increasing), to_json(run.residual_decrease)}},
    };
    double oracle_err = 0.0;
    for (const auto& r : run.levels) {
        oracle_err = std::max(oracle_err, r.oracle_error);
    }
    out["max_oracle_error"] = oracle_err;
    if (target > 0.0) {
        const bool reached = last.residual <= target;
        ctx.record_flag("doob-meyer", "decomposition_target", reached);
        out["target"] = target;
        out["converged"] = reached;
    }
    ctx.metric("doob-meyer.residual", last.residual);
    ctx.metric("doob-meyer.a_terminal_mean", last.a_terminal_mean);
    ctx.metric("doob-meyer.level", last.level);
    return out;
}

std::vector<std::vector<double>> recovery_grid(Context& ctx)
{
    const Config& c = ctx.config;
    std::vector<double> base = c.get_doubles("recover.z_grid", {0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0});
    if (c.has("recover.grid_step")) {
        const double h = c.get_double("recover.grid_step");
        const double reach = c.get_double("recover.grid_max", 4.0);
        if (!(h > 0.0)) {
            throw ConfigError("config key 'recover.grid_step': must be positive");
        }
        base.clear();
        const int m = static_cast<int>(std::floor(reach / h + 1e-9));
        for (int i = -m; i <= m; ++i) {
            base.push_back(h * i);
        }
    }
    if (ctx.tree->dim() == 1) {
        if (c.get_bool("recover.cover_claims", false)) {
            return covering_grid(base, scan_z_values(ctx.op(), ctx.claims));
        }
        return scalar_grid(base);
    }
    std::vector<double> radii;
    for (double v : base) {
        if (v > 0.0) {
            radii.push_back(v);
        }
    }
    return isotropic_grid(ctx.tree->dim(), radii);
}

const RecoveredGenerator& ensure_recovered(Context& ctx, nlohmann::json* out)
{
    if (ctx.recovered) {
        return *ctx.recovered;
    }
    RecoverOptions options;
    options.reference_node = static_cast<std::size_t>(ctx.config.get_int("recover.reference_node", 0));
    options.richardson = ctx.config.get_bool("recover.richardson", true);
    if (ctx.config.has("recover.interpolation")) {
        options.rule = interpolation_from_string(ctx.config.get_string("recover.interpolation"));
    }
    ctx.recovered = recover_generator(ctx.op(), recovery_grid(ctx), options);
    if (out != nullptr) {
        (*out)["grid_points"] = ctx.recovered->z_grid().size();
        (*out)["interpolation"] = to_string(ctx.recovered->rule());
        (*out)["richardson"] = ctx.recovered->richardson;
    }
    return *ctx.recovered;
}

nlohmann::json cmd_recover(Context& ctx)
{
    nlohmann::json out;
    const RecoveredGenerator& g = ensure_recovered(ctx, &out);
    const CheckReport modulus = check_recovered_modulus(g, ctx.phi, ctx.config.get_double("recover.modulus_tol", 1e-10));
    ctx.record("recover", modulus);
    out["modulus_check"] = to_json(modulus);
    write_json(ctx.out_dir / "recovered.json", to_json(g));

    CsvWriter csv(ctx.out_dir / "recovery.csv", "step,t,z,g");
    for (std::size_t k = 0; k < g.table().size(); ++k) {
        for (std::size_t i = 0; i < g.z_grid().size(); ++i) {
            std::string z;
            for (std::size_t j = 0; j < g.z_grid()[i].size(); ++j) {
                z += (j ? ";" : "") + format_double(g.z_grid()[i][j]);
            }
            csv.row(k, ctx.tree->time(static_cast<int>(k)), z, g.table()[k][i]);
        }
    }
    ctx.metric("recover.richardson", g.richardson);

    if (ctx.via_doob_meyer) {
        const RecoveredGenerator alt = recover_via_doob_meyer(ctx.op(), g.z_grid(), ctx.phi,
                                                              ctx.config.get_double("recover.dm_target", 1e-9));
        std::vector<int> steps(static_cast<std::size_t>(ctx.tree->steps()));
        for (int k = 0; k < ctx.tree->steps(); ++k) {
            steps[static_cast<std::size_t>(k)] = k;
        }
        const UniquenessReport probe =
            uniqueness_probe(g, alt, g.z_grid(), steps, ctx.config.get_double("recover.cross_tol", 1e-6));
        CheckReport named = probe.check;
        named.check = "via_doob_meyer";
        ctx.record("recover", named);
        out["via_doob_meyer"] = {{"max_difference", probe.max_difference}, {"check", to_json(named)}};
        ctx.metric("recover.via_doob_meyer_difference", probe.max_difference);
        write_json(ctx.out_dir / "recovered_doob_meyer.json", to_json(alt));
    }
    return out;
}

nlohmann::json cmd_represent(Context& ctx)
{
    nlohmann::json out;
    const RecoveredGenerator& g = ensure_recovered(ctx, &out);
    const double tol = ctx.config.get_double("recover.verify_tol", 1e-10);
    const VerificationReport verify = verify_representation(ctx.op(), g, ctx.claims, tol);
    ctx.record("represent", verify.check);
    out["verify"] = to_json(verify);
    CsvWriter csv(ctx.out_dir / "verify.csv", "claim,max_error");
    for (std::size_t i = 0; i < verify.claims.size(); ++i) {
        csv.row(verify.claims[i], verify.max_error[i]);
    }
    ctx.metric("represent.max_error", verify.worst());
    ctx.metric("represent.extrapolated", static_cast<double>(verify.extrapolated_count));

    // eta_j = sign(B_j) z0 along the first coordinate.
    const double z0 = ctx.config.get_double("recover.null_z", 1.0);
    const int d = ctx.tree->dim();
    AdaptedField eta(ctx.tree, d);
    for (int k = 0; k <= ctx.tree->steps(); ++k) {
        Slice s(ctx.tree->node_count(k) * static_cast<std::size_t>(d), 0.0);
        for (std::size_t node = 0; node < ctx.tree->node_count(k); ++node) {
            const double b = ctx.tree->brownian(k, node, 0);
            s[node * static_cast<std::size_t>(d)] = b > 0.0 ? z0 : (b < 0.0 ? -z0 : 0.0);
        }
        eta.set(k, std::move(s));
    }
    const NullIntegralResult null = null_integral_check(g, ctx.tree, eta, 0, ctx.tree->steps());
    const double null_tol = ctx.config.get_double("recover.null_tol", 1e-10);
    ctx.record_flag("represent", "null_integral", null.residual <= null_tol);
    out["null_integral"] = {{"residual", null.residual}, {"extrapolated", null.extrapolated}};
    ctx.metric("represent.null_residual", null.residual);
    return out;
}

using Command = std::function<nlohmann::json(Context&)>;

const std::map<std::string, Command>& commands()
{
    static const std::map<std::string, Command> table{
        {"axioms", cmd_axioms},       {"dominate", cmd_dominate},   {"solve", cmd_solve},
        {"picard", cmd_picard},       {"doob-meyer", cmd_doobmeyer}, {"recover", cmd_recover},
        {"represent", cmd_represent},
    };
    return table;
}

}  // namespace

// --- Config -----------------------------------------------------------------

Config Config::load(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    Config c = parse(buffer.str(), path.string());
    c.base_dir_ = path.parent_path();
    return c;
}

Config Config::parse(const std::string& text, const std::string& origin)
{
    Config c;
    c.origin_ = origin;
    std::istringstream in(text);
    try {
        pt::ini_parser::read_ini(in, c.tree_);
    } catch (const pt::ini_parser_error& ex) {
        throw ConfigError(origin + ":" + std::to_string(ex.line()) + ": " + ex.message());
    }
    clean_tree(c.tree_);
    return c;
}

bool Config::has(const std::string& key) const
{
    return tree_.get_child_optional(key).has_value();
}

std::string Config::get_string(const std::string& key) const
{
    auto v = tree_.get_optional<std::string>(key);
    if (!v) {
        throw ConfigError(origin_ + ": missing required key '" + key + "'");
    }
    return *v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const
{
    return tree_.get<std::string>(key, fallback);
}

double Config::get_double(const std::string& key) const
{
    return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const
{
    return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const
{
    const double v = get_double(key);
    if (v != std::floor(v) || std::abs(v) > 1e9) {
        throw ConfigError("config key '" + key + "': expected an integer");
    }
    return static_cast<int>(v);
}

int Config::get_int(const std::string& key, int fallback) const
{
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<std::string> Config::get_list(const std::string& key, const std::vector<std::string>& fallback) const
{
    return has(key) ? split_list(get_string(key)) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const
{
    if (!has(key)) {
        return fallback;
    }
    std::vector<double> out;
    for (const auto& item : split_list(get_string(key))) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

void Config::set(const std::string& key, const std::string& value)
{
    tree_.put(key, value);
}

std::string Config::canonical() const
{
    std::ostringstream os;
    for (const auto& [section, child] : tree_) {
        if (child.empty()) {
            os << section << '=' << child.get_value<std::string>() << '\n';
            continue;
        }
        os << '[' << section << "]\n";
        for (const auto& [key, value] : child) {
            os << key << '=' << value.get_value<std::string>() << '\n';
        }
    }
    return os.str();
}

std::string fnv1a_hex(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// --- run / sweep ------------------------------------------------------------

RunOutcome run(const Config& config, const RunOptions& options)
{
    const double horizon = config.get_double("tree.T");
    const int steps = config.get_int("tree.N");
    const int dim = config.get_int("tree.d", 1);
    const TreePtr tree = FiltrationTree::build(TimeGrid::make(horizon, steps), dim);

    const std::optional<Generator> generator = operator_generator(config);
    const Modulus phi =
        config.has("checks.phi") ? Modulus::from_name(config.get_string("checks.phi")) : generator->modulus();

    fs::path out_dir;
    if (options.out_dir) {
        out_dir = *options.out_dir;
    } else {
        out_dir = config.base_dir() / config.get_string("run.output", "nlx-out");
    }
    fs::create_directories(out_dir);

    const std::vector<std::string> list = options.commands ? *options.commands
                                                           : config.get_list("run.commands", {"axioms"});
    for (const auto& name : list) {
        if (!commands().count(name)) {
            throw ConfigError("config key 'run.commands': unknown command '" + name +
                              "' (expected axioms, dominate, solve, picard, doob-meyer, recover, represent)");
        }
    }

    Context ctx{config, tree, [&config, &tree, &generator] { return build_operator(config, tree, *generator); },
                std::nullopt, generator, phi,
                make_claims(tree, config.get_list("claims.keys", default_claim_keys())), out_dir,
                options.via_doob_meyer, {}, nlohmann::json::array(), true, std::nullopt};

    nlohmann::json results = nlohmann::json::object();
    nlohmann::json timing = nlohmann::json::object();
    for (const auto& name : list) {
        const auto start = std::chrono::steady_clock::now();
        results[name] = commands().at(name)(ctx);
        const auto stop = std::chrono::steady_clock::now();
        timing[name] = std::chrono::duration<double, std::milli>(stop - start).count();
    }

    const std::string canonical = config.canonical();
    nlohmann::json report{
        {"tool", "nlx"},
        {"version", kToolVersion},
        {"config_hash", fnv1a_hex(canonical)},
        {"tree", {{"T", horizon}, {"N", steps}, {"d", dim}}},
        {"operator", config.get_string("operator.kind")},
        {"generator", generator->name()},
        {"phi", phi.name},
        {"commands", list},
        {"checks", ctx.checks},
        {"results", results},
        {"pass", ctx.pass},
    };
    write_json(out_dir / "report.json", report);
    write_json(out_dir / "timing.json", {{"config_hash", fnv1a_hex(canonical)},
                                         {"threads", thread_count()},
                                         {"milliseconds", timing}});

    RunOutcome outcome;
    outcome.report = std::move(report);
    outcome.pass = ctx.pass;
    outcome.out_dir = out_dir;
    outcome.metrics = std::move(ctx.metrics);
    return outcome;
}

std::vector<RunOutcome> sweep(const Config& config, const std::string& axis, const std::vector<std::string>& values,
                              const RunOptions& options)
{
    std::string key;
    if (axis == "N") {
        key = "tree.N";
    } else if (axis == "level") {
        key = "doobmeyer.levels";
    } else if (axis == "grid") {
        key = "recover.grid_step";
    } else {
        throw ConfigError("sweep: unknown axis '" + axis + "' (expected N, level, grid)");
    }
    const fs::path root = options.out_dir ? *options.out_dir
                                          : config.base_dir() / config.get_string("run.output", "nlx-out");
    fs::create_directories(root);

    std::vector<std::string> axis_values = values;
    if (axis_values.empty()) {
        axis_values.push_back(config.get_string(key, ""));
    }
    std::vector<RunOutcome> outcomes;
    std::set<std::string> columns;
    for (const auto& value : axis_values) {
        Config variant = config;
        if (!value.empty()) {
            variant.set(key, value);
        }
        RunOptions sub = options;
        sub.out_dir = root / (axis + "_" + (value.empty() ? std::string("base") : value));
        outcomes.push_back(run(variant, sub));
        for (const auto& [name, v] : outcomes.back().metrics) {
            (void)v;
            columns.insert(name);
        }
    }
    std::ofstream csv(root / "sweep.csv");
    csv << std::setprecision(17) << "axis,value,pass";
    for (const auto& col : columns) {
        csv << ',' << col;
    }
    csv << '\n';
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        csv << axis << ',' << (axis_values[i].empty() ? "base" : axis_values[i]) << ','
            << (outcomes[i].pass ? 1 : 0);
        for (const auto& col : columns) {
            csv << ',';
            if (auto it = outcomes[i].metrics.find(col); it != outcomes[i].metrics.end()) {
                csv << it->second;
            }
        }
        csv << '\n';
    }
    return outcomes;
}

// --- entry point ------------------------------------------------------------

int main(int argc, char** argv)
{
    CLI::App app{"nlx: nonlinear expectations on binomial filtration trees"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_path;
    bool strict = false;
    std::string out_dir;
    std::string axis;
    std::vector<std::string> values;
    bool via_doob_meyer = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "INI experiment config")->required();
        sub->add_flag("--strict", strict, "exit 1 when any check fails");
        sub->add_option("--out", out_dir, "output directory (default: run.output next to the config)");
    };
    CLI::App* run_cmd = app.add_subcommand("run", "run the commands listed in the config");
    common(run_cmd);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "repeat a run along one axis");
    common(sweep_cmd);
    sweep_cmd->add_option("--axis", axis, "N, level or grid")->required();
    sweep_cmd->add_option("--values", values, "comma-separated axis values")->delimiter(',');
    CLI::App* recover_cmd = app.add_subcommand("recover", "recover the generator of the configured operator");
    common(recover_cmd);
    recover_cmd->add_flag("--via-doob-meyer", via_doob_meyer, "cross-check through the Doob-Meyer route");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitPass : kExitUsage;
    }

    try {
        configure_threads_from_env();
        const Config config = Config::load(config_path);
        RunOptions options;
        options.strict = strict;
        options.via_doob_meyer = via_doob_meyer;
        if (!out_dir.empty()) {
            options.out_dir = fs::path(out_dir);
        }
        bool pass = true;
        if (run_cmd->parsed()) {
            const RunOutcome outcome = run(config, options);
            pass = outcome.pass;
            std::cout << (pass ? "PASS" : "FAIL") << " " << outcome.out_dir.string() << "/report.json\n";
        } else if (sweep_cmd->parsed()) {
            const auto outcomes = sweep(config, axis, values, options);
            for (const auto& o : outcomes) {
                pass = pass && o.pass;
            }
            std::cout << (pass ? "PASS" : "FAIL") << " sweep over " << axis << " (" << outcomes.size() << " runs)\n";
        } else {
            options.commands = std::vector<std::string>{"recover"};
            const RunOutcome outcome = run(config, options);
            pass = outcome.pass;
            std::cout << (pass ? "PASS" : "FAIL") << " " << outcome.out_dir.string() << "/recovered.json\n";
        }
        return (!pass && strict) ? kExitCheckFailed : kExitPass;
    } catch (const ResourceError& e) {
        std::cerr << "nlx: budget: " << e.what() << '\n';
        return kExitBudget;
    } catch (const ConfigError& e) {
        std::cerr << "nlx: config: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "nlx: precondition: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        std::cerr << "nlx: numeric: " << e.what() << '\n';
        return kExitCheckFailed;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "nlx: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace nlx::cli
