#include "nlx/generators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>

#include "nlx/error.hpp"

namespace nlx {

namespace {

std::string format_number(double x)
{
    // Shortest form that parses back to x.
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace

Modulus Modulus::zero()
{
    return Modulus{[](double) { return 0.0; }, 0.0, "zero"};
}

Modulus Modulus::linear(double slope)
{
    if (!(slope >= 0.0)) {
        throw ContractError("linear modulus: slope must be nonnegative");
    }
    return Modulus{[slope](double x) { return slope * x; }, slope, "linear(" + format_number(slope) + ")"};
}

Modulus Modulus::sqrt(double scale)
{
    if (!(scale >= 0.0)) {
        throw ContractError("sqrt modulus: scale must be nonnegative");
    }
    // c sqrt(x) <= c (x + 1)
    const std::string name = scale == 1.0 ? "sqrt" : "sqrt(" + format_number(scale) + ")";
    return Modulus{[scale](double x) { return scale * std::sqrt(x); }, scale, name};
}

Modulus Modulus::from_name(const std::string& name)
{
    auto argument = [&](const std::string& prefix) -> std::optional<double> {
        if (name.rfind(prefix + "(", 0) != 0 || name.back() != ')') {
            return std::nullopt;
        }
        const std::string inner = name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(inner, &used);
        } catch (const std::exception&) {
            throw ConfigError("modulus '" + name + "': bad numeric argument");
        }
        if (used != inner.size()) {
            throw ConfigError("modulus '" + name + "': bad numeric argument");
        }
        return value;
    };
    if (name == "zero") {
        return zero();
    }
    if (name == "sqrt") {
        return sqrt();
    }
    if (auto c = argument("linear")) {
        return linear(*c);
    }
    if (auto c = argument("sqrt")) {
        return sqrt(*c);
    }
    throw ConfigError("unknown modulus '" + name + "' (expected zero, linear(c), sqrt or sqrt(c))");
}

bool ValidationReport::has(const std::string& kind) const
{
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

std::vector<double> default_modulus_grid()
{
    return {0.0, 1e-8, 1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0, 100.0};
}

ValidationReport validate_modulus(const Modulus& modulus, std::span<const double> grid)
{
    if (grid.empty()) {
        throw ContractError("validate_modulus: empty test grid");
    }
    if (std::any_of(grid.begin(), grid.end(), [](double x) { return !(x >= 0.0) || !std::isfinite(x); })) {
        throw ContractError("validate_modulus: test points must be finite and nonnegative");
    }
    ValidationReport report;
    std::vector<double> points(grid.begin(), grid.end());
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    const double at_zero = modulus(0.0);
    if (!std::isfinite(at_zero) || std::abs(at_zero) > kValidationTol) {
        report.violations.push_back({"zero_at_zero", {0.0}, at_zero, 0.0});
    }
    std::vector<double> values(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        values[i] = modulus(points[i]);
        if (!std::isfinite(values[i])) {
            report.violations.push_back({"non_finite", {points[i]}, values[i], 0.0});
        }
    }
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(values[i] <= values[i + 1] + kValidationTol)) {
            report.violations.push_back({"monotone", {points[i], points[i + 1]}, values[i], values[i + 1]});
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i; j < points.size(); ++j) {
            const double lhs = modulus(points[i] + points[j]);
            const double rhs = values[i] + values[j];
            if (!(lhs <= rhs + kValidationTol)) {
                report.violations.push_back({"subadditive", {points[i], points[j]}, lhs, rhs});
            }
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double rhs = modulus.nu * (points[i] + 1.0);
        if (!(values[i] <= rhs + kValidationTol)) {
            report.violations.push_back({"linear_growth", {points[i]}, values[i], rhs});
        }
    }
    return report;
}

double norm(std::span<const double> z)
{
    if (z.size() == 1) {
        return std::abs(z[0]);
    }
    double sum = 0.0;
    for (double v : z) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

Generator::Generator(std::string name, Fn fn, Modulus modulus, double lipschitz_y, GeneratorFlags flags)
    : name_(std::move(name))
    , fn_(std::move(fn))
    , modulus_(std::move(modulus))
    , lipschitz_y_(lipschitz_y)
    , flags_(flags)
{
    if (!fn_) {
        throw ContractError("generator '" + name_ + "': empty evaluator");
    }
    if (!(lipschitz_y_ >= 0.0)) {
        throw ContractError("generator '" + name_ + "': Lipschitz constant must be nonnegative");
    }
}

ValidationReport validate_generator(const Generator& g, const SampleSpec& spec)
{
    if (spec.dim < 1 || spec.draws < 1) {
        throw ContractError("validate_generator: sample spec needs dim >= 1 and draws >= 1");
    }
    ValidationReport report;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto d = static_cast<std::size_t>(spec.dim);
    std::vector<double> z1(d), z2(d), diff(d), zero(d, 0.0);

    auto record = [&](std::string kind, double t, double lhs, double rhs) {
        if (report.violations.size() < 64) {
            report.violations.push_back({std::move(kind), {t, z1[0], z2[0]}, lhs, rhs});
        }
    };

    for (int draw = 0; draw < spec.draws; ++draw) {
        const double t = spec.t_max * unit(rng);
        const double y1 = spec.y_range * (2.0 * unit(rng) - 1.0);
        const double y2 = spec.y_range * (2.0 * unit(rng) - 1.0);
        // Every other pair is a small perturbation so that moduli steep at
        // zero (e.g. sqrt) are probed where they bind.
        const double spread = (draw % 2 == 0) ? 1.0 : std::pow(10.0, -6.0 * unit(rng));
        for (std::size_t j = 0; j < d; ++j) {
            z1[j] = spec.z_range * (2.0 * unit(rng) - 1.0);
            z2[j] = z1[j] + spread * spec.z_range * (2.0 * unit(rng) - 1.0);
            diff[j] = z1[j] - z2[j];
        }
        const double a = g(t, y1, z1);
        const double b = g(t, y1, z2);
        if (!std::isfinite(a) || !std::isfinite(b)) {
            record("non_finite", t, a, b);
            continue;
        }
        const double bound = g.modulus()(norm(diff));
        if (!(std::abs(a - b) <= bound + kValidationTol)) {
            record("z_modulus", t, std::abs(a - b), bound);
        }
        const double c = g(t, y2, z1);
        const double lip = g.lipschitz_y() * std::abs(y1 - y2);
        if (!(std::abs(a - c) <= lip + kValidationTol)) {
            record("y_lipschitz", t, std::abs(a - c), lip);
        }
        if (g.flags().zero_at_zero_z) {
            const double at_zero = g(t, y1, zero);
            if (!(std::abs(at_zero) <= kValidationTol)) {
                record("zero_at_zero_z", t, at_zero, 0.0);
            }
        }
    }
    return report;
}

namespace drivers {

Generator zero()
{
    return Generator("zero", [](double, double, std::span<const double>) { return 0.0; }, Modulus::zero(), 0.0,
                     GeneratorFlags{});
}

Generator mu_abs_z(double mu)
{
    if (!(mu >= 0.0)) {
        throw ContractError("mu_abs_z: mu must be nonnegative");
    }
    return Generator("mu_abs_z(" + format_number(mu) + ")",
                     [mu](double, double, std::span<const double> z) { return mu * norm(z); }, Modulus::linear(mu),
                     0.0, GeneratorFlags{});
}

Generator phi_norm(const Modulus& modulus)
{
    auto phi = modulus.phi;
    return Generator("phi_norm(" + modulus.name + ")",
                     [phi](double, double, std::span<const double> z) { return phi(norm(z)); }, modulus, 0.0,
                     GeneratorFlags{});
}

Generator neg_phi_norm(const Modulus& modulus)
{
    auto phi = modulus.phi;
    return Generator("neg_phi_norm(" + modulus.name + ")",
                     [phi](double, double, std::span<const double> z) { return -phi(norm(z)); }, modulus, 0.0,
                     GeneratorFlags{});
}

Generator sqrt_norm()
{
    return Generator("sqrt_norm", [](double, double, std::span<const double> z) { return std::sqrt(norm(z)); },
                     Modulus::sqrt(), 0.0, GeneratorFlags{});
}

Generator custom(std::string name, Generator::Fn fn, Modulus modulus, double lipschitz_y, GeneratorFlags flags)
{
    return Generator(std::move(name), std::move(fn), std::move(modulus), lipschitz_y, flags);
}

Generator with_y_term(const Generator& base, double a)
{
    GeneratorFlags flags = base.flags();
    flags.depends_on_y = flags.depends_on_y || a != 0.0;
    flags.zero_at_zero_z = flags.zero_at_zero_z && a == 0.0;
    return Generator(base.name() + "+" + format_number(a) + "*y",
                     [base, a](double t, double y, std::span<const double> z) { return base(t, y, z) + a * y; },
                     base.modulus(), base.lipschitz_y() + std::abs(a), flags);
}

}  // namespace drivers

Generator make_generator(const DriverSpec& spec)
{
    auto param = [&](const std::string& key) {
        auto it = spec.params.find(key);
        if (it == spec.params.end()) {
            throw ConfigError("generator '" + spec.key + "' requires parameter '" + key + "'");
        }
        return it->second;
    };
    auto modulus = [&]() {
        if (spec.modulus.empty()) {
            throw ConfigError("generator '" + spec.key + "' requires a modulus (e.g. modulus = linear(0.1))");
        }
        return Modulus::from_name(spec.modulus);
    };

    Generator g = [&]() {
        if (spec.key == "zero") {
            return drivers::zero();
        }
        if (spec.key == "mu_abs_z") {
            return drivers::mu_abs_z(param("mu"));
        }
        if (spec.key == "phi_norm") {
            return drivers::phi_norm(modulus());
        }
        if (spec.key == "neg_phi_norm") {
            return drivers::neg_phi_norm(modulus());
        }
        if (spec.key == "sqrt_norm") {
            return drivers::sqrt_norm();
        }
        throw ConfigError("unknown generator key '" + spec.key +
                          "' (expected zero, mu_abs_z, phi_norm, neg_phi_norm, sqrt_norm)");
    }();
    if (auto it = spec.params.find("y_coef"); it != spec.params.end() && it->second != 0.0) {
        g = drivers::with_y_term(g, it->second);
    }
    return g;
}

}  // namespace nlx
