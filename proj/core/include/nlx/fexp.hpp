#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nlx/bsde.hpp"
#include "nlx/corpus.hpp"
#include "nlx/generators.hpp"
#include "nlx/lattice.hpp"
#include "nlx/report.hpp"

namespace nlx {

enum class Provenance { FromGenerator, DriftUncertainty, UserDefined };

const char* to_string(Provenance provenance);

/// A filtration-consistent conditional expectation on the tree, queried as a
/// black box. The evaluator receives a claim on the nodes of step `from` and
/// returns E[claim | F_k] for every k in [to, from].
class FExpectation {
public:
    using Evaluator = std::function<AdaptedField(std::span<const double> claim, int from, int to)>;

    FExpectation(TreePtr tree, std::string name, Evaluator evaluator, Modulus declared, Provenance provenance);

    const TreePtr& tree_ptr() const { return tree_; }
    const FiltrationTree& tree() const { return *tree_; }
    const std::string& name() const { return name_; }
    const Modulus& declared_modulus() const { return declared_; }
    Provenance provenance() const { return provenance_; }
    /// Driver behind a from_generator operator, null otherwise.
    const Generator* generator() const { return generator_.get(); }

    AdaptedField evaluate(std::span<const double> claim, int from, int to = 0) const;
    /// E[xi | F_k] for all k, xi on the leaves.
    AdaptedField process(std::span<const double> terminal) const;
    Slice conditional(std::span<const double> terminal, int t) const;
    /// E[f | F_k] for f on the nodes of step k + 1.
    Slice one_step(std::span<const double> next, int k) const;

    FExpectation with_generator(std::shared_ptr<const Generator> g) const;

private:
    TreePtr tree_;
    std::string name_;
    Evaluator evaluator_;
    Modulus declared_;
    Provenance provenance_;
    std::shared_ptr<const Generator> generator_;
};

/// E^g through the explicit discrete BSDE. The driver must validate and
/// satisfy g(t, y, 0) = 0; the declared modulus is the driver's.
FExpectation from_generator(const TreePtr& tree, const Generator& g);
/// Linear conditional expectation (g = 0).
FExpectation classical(const TreePtr& tree);
/// One-step value sup over |theta| <= mu of the theta-tilted child average
/// with weights 2^-d (1 + sqrt(dt) theta . eps), composed backward. Requires
/// mu sqrt(d dt) <= 1 so that the weights stay in [0, 1].
FExpectation drift_uncertainty(const TreePtr& tree, double mu);
FExpectation user_defined(const TreePtr& tree, std::string name, FExpectation::Evaluator evaluator,
                          Modulus declared);

inline constexpr double kExactTol = 1e-12;
inline constexpr double kChainedTol = 1e-10;

struct AxiomReport {
    CheckReport monotonicity{"monotonicity"};
    CheckReport constant_preservation{"constant_preservation"};
    CheckReport consistency{"consistency"};
    CheckReport zero_one{"zero_one_law"};

    bool pass() const;
};

nlohmann::json to_json(const AxiomReport& report);

/// Monotonicity on ordered corpus pairs (and on (max(X, Y), Y) for every
/// pair), constant preservation of E[X|F_t] from every t, consistency
/// E[E[X|F_t]|F_s] = E[X|F_s], and the 0-1 law for every event.
AxiomReport check_axioms(const FExpectation& e, const std::vector<NamedClaim>& claims,
                         const std::vector<Event>& events, double tol = kExactTol);

/// E[X|F_t] - E[Y|F_t] <= E^phi[X - Y|F_t] and the lower bound with E^{-phi}.
CheckReport check_domination(const FExpectation& e, const Modulus& phi, const std::vector<ClaimPair>& pairs,
                             double tol = kChainedTol);

/// Consequences of phi-domination, each checked nodewise.
struct DominationSuite {
    CheckReport symmetry{"symmetry"};          // -E^{-phi}[X] = E^{phi}[-X]
    CheckReport two_sided{"two_sided"};        // E^{-phi}[X-Y] <= E[X]-E[Y] <= E^{phi}[X-Y]
    CheckReport sandwich{"sandwich"};          // E^{-phi}[X] <= E[X] <= E^{phi}[X]
    CheckReport abs_bound{"abs_bound"};        // |E[X]-E[Y]| <= E^{phi}[|X-Y|]
    CheckReport continuity{"continuity"};      // X_n -> X  =>  E[X_n] -> E[X]
    std::vector<double> continuity_errors;     // max-node error per perturbation level

    bool pass() const;
};

nlohmann::json to_json(const DominationSuite& suite);

DominationSuite check_domination_suite(const FExpectation& e, const Modulus& phi,
                                       const std::vector<NamedClaim>& claims, double tol = kChainedTol);

/// E[X + Y|F_s] = E[X|F_s] + Y for Y = shift_t, every s >= t.
CheckReport check_translation(const FExpectation& e, const std::vector<NamedClaim>& claims,
                              const std::vector<NamedProcess>& shifts, double tol = kExactTol);

enum class MartingaleKind { Super, Sub, Martingale };

/// One-step check E[Y_{k+1}|F_k] <= Y_k (>= for Sub, both for Martingale).
CheckReport martingale_precheck(const FExpectation& e, const AdaptedField& y, MartingaleKind kind,
                                double tol = kChainedTol);

/// E[Y_tau|F_sigma] <= Y_{sigma ^ tau} (>= for Sub, = for Martingale), per
/// leaf. Throws ContractError when the one-step precheck fails.
CheckReport optional_stopping_check(const FExpectation& e, const AdaptedField& y, const StoppingTime& sigma,
                                    const StoppingTime& tau, MartingaleKind kind = MartingaleKind::Super,
                                    double tol = kChainedTol);

/// E[X | F_sigma] as a leaf slice.
Slice conditional_at(const FExpectation& e, std::span<const double> terminal, const StoppingTime& sigma);

/// 1_A E[X+Y|F_sigma] = 1_A E[1_A X + Y|F_sigma] and, when Y is
/// F_sigma-measurable, E[X+Y|F_sigma] = E[X|F_sigma] + Y. `event` lists leaf
/// membership and must be F_sigma-measurable.
CheckReport locality_check(const FExpectation& e, const StoppingTime& sigma, std::span<const double> x,
                           std::span<const double> y, const std::vector<char>& event, double tol = kExactTol);

/// Shifted value E[X + z.B_T|F_t] - z.B_t lies between the barrier BSDEs with
/// drivers -/+ (phi(|Z|) + phi(|z|)) started from X.
CheckReport check_shifted_boundedness(const FExpectation& e, const Modulus& phi, std::span<const double> x,
                                      std::span<const double> z, double tol = kChainedTol);

}  // namespace nlx
