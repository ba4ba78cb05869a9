#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlx/lattice.hpp"

namespace nlx {

struct NamedClaim {
    std::string name;
    Slice leaves;
};

struct NamedProcess {
    std::string name;
    AdaptedField values;
};

struct ClaimPair {
    std::string name;
    Slice x;
    Slice y;
};

/// Claims addressable by key. For d > 1, B_T means the first coordinate and
/// abs_B_T / B_T_sq use the Euclidean norm.
///   const:<c>  B_T  abs_B_T  B_T_sq  neg_B_T  running_max  ind_B_T_pos
///   ind_B_T_nonneg  ind_first_up  lin:<z>  (z * B_T)
NamedClaim make_claim(const TreePtr& tree, const std::string& key);

std::vector<std::string> default_claim_keys();
/// constants, B_T, |B_T|, B_T^2, running max and indicator claims.
std::vector<NamedClaim> default_claims(const TreePtr& tree);
std::vector<NamedClaim> make_claims(const TreePtr& tree, const std::vector<std::string>& keys);

/// F_t-measurable shifts for translation checks: 1, B_t, |B_t|.
std::vector<NamedProcess> default_shifts(const TreePtr& tree);

/// Cylinder events on the first two steps: every subset of the step's nodes
/// when there are at most four of them, otherwise singletons and the first
/// half.
std::vector<Event> default_events(const FiltrationTree& tree);

/// Every ordered pair (X, Y) of the corpus, including X = Y.
std::vector<ClaimPair> all_pairs(const std::vector<NamedClaim>& claims);

/// Adapted process from a path functional evaluated on every node: the
/// Brownian value at each step is first-coordinate B_k.
AdaptedField process_from_nodes(const TreePtr& tree, const std::function<double(int step, std::size_t node)>& value);

}  // namespace nlx
