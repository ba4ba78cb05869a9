#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace nlx {

/// Continuity modulus phi: R+ -> R+, expected to be increasing and
/// subadditive with phi(0) = 0 and linear growth phi(x) <= nu (x + 1).
struct Modulus {
    std::function<double(double)> phi;
    double nu = 0.0;
    std::string name;

    double operator()(double x) const { return phi(x); }

    static Modulus zero();
    static Modulus linear(double slope);
    /// c * sqrt(x); c = 1 gives nu = 1.
    static Modulus sqrt(double scale = 1.0);
    /// Parses the names produced above: "zero", "linear(0.1)", "sqrt", "sqrt(2)".
    static Modulus from_name(const std::string& name);
};

struct Violation {
    std::string kind;
    std::vector<double> points;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    bool has(const std::string& kind) const;
};

inline constexpr double kValidationTol = 1e-12;

/// Sample grid used when none is configured.
std::vector<double> default_modulus_grid();

/// Checks phi(0) = 0, monotonicity on consecutive grid points, subadditivity
/// on every grid pair and linear growth. Non-finite values are reported.
ValidationReport validate_modulus(const Modulus& modulus, std::span<const double> grid);

/// Euclidean norm; |z| for d = 1.
double norm(std::span<const double> z);

struct GeneratorFlags {
    bool depends_on_y = false;
    bool deterministic = true;
    bool zero_at_zero_z = true;  // g(t, y, 0) = 0
};

/// Driver g(t, y, z) with its z-modulus and y-Lipschitz constant.
class Generator {
public:
    using Fn = std::function<double(double t, double y, std::span<const double> z)>;

    Generator(std::string name, Fn fn, Modulus modulus, double lipschitz_y, GeneratorFlags flags);

    double operator()(double t, double y, std::span<const double> z) const { return fn_(t, y, z); }
    double operator()(double t, double y, double z) const { return fn_(t, y, std::span<const double>(&z, 1)); }

    const std::string& name() const { return name_; }
    const Modulus& modulus() const { return modulus_; }
    double lipschitz_y() const { return lipschitz_y_; }
    const GeneratorFlags& flags() const { return flags_; }

private:
    std::string name_;
    Fn fn_;
    Modulus modulus_;
    double lipschitz_y_;
    GeneratorFlags flags_;
};

/// Deterministic pseudo-random draws of (t, y, z) pairs.
struct SampleSpec {
    std::uint64_t seed = 0x5eed2014ULL;
    int draws = 4000;
    int dim = 1;
    double t_max = 1.0;
    double y_range = 5.0;
    double z_range = 5.0;
};

/// Checks the modulus bound in z, the Lipschitz bound in y and, when flagged,
/// g(t, y, 0) = 0. Square integrability of g(., y, z) holds trivially on a
/// finite tree and is not checked.
ValidationReport validate_generator(const Generator& g, const SampleSpec& spec);

namespace drivers {
Generator zero();
Generator mu_abs_z(double mu);
Generator phi_norm(const Modulus& modulus);
Generator neg_phi_norm(const Modulus& modulus);
Generator sqrt_norm();
Generator custom(std::string name, Generator::Fn fn, Modulus modulus, double lipschitz_y, GeneratorFlags flags);
/// base(t, y, z) + a * y.
Generator with_y_term(const Generator& base, double a);
}  // namespace drivers

/// Catalogue entry named by string key, as written in run configs:
///   zero | mu_abs_z (mu) | phi_norm (modulus) | neg_phi_norm (modulus) | sqrt_norm
/// plus an optional `y_coef` parameter that adds a * y.
struct DriverSpec {
    std::string key;
    std::map<std::string, double> params;
    std::string modulus;
};

Generator make_generator(const DriverSpec& spec);

}  // namespace nlx
