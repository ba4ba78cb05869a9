#include "nlx/corpus.hpp"

#include <cmath>

#include "nlx/error.hpp"

namespace nlx {

namespace {

double leaf_norm(const FiltrationTree& tree, int k, std::size_t node)
{
    double sum = 0.0;
    for (int j = 0; j < tree.dim(); ++j) {
        const double b = tree.brownian(k, node, j);
        sum += b * b;
    }
    return std::sqrt(sum);
}

double parse_number(const std::string& key, const std::string& text)
{
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw ConfigError("claim '" + key + "': bad numeric argument");
    }
    return value;
}

}  // namespace

NamedClaim make_claim(const TreePtr& tree, const std::string& key)
{
    const int n = tree->steps();
    const std::size_t leaves = tree->leaf_count();
    Slice out(leaves);
    auto fill = [&](auto fn) {
        for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
            out[leaf] = fn(leaf);
        }
    };

    if (key.rfind("const:", 0) == 0) {
        const double c = parse_number(key, key.substr(6));
        fill([&](std::size_t) { return c; });
    } else if (key.rfind("lin:", 0) == 0) {
        const double z = parse_number(key, key.substr(4));
        fill([&](std::size_t leaf) { return z * tree->brownian(n, leaf, 0); });
    } else if (key == "B_T") {
        fill([&](std::size_t leaf) { return tree->brownian(n, leaf, 0); });
    } else if (key == "neg_B_T") {
        fill([&](std::size_t leaf) { return -tree->brownian(n, leaf, 0); });
    } else if (key == "abs_B_T") {
        fill([&](std::size_t leaf) { return leaf_norm(*tree, n, leaf); });
    } else if (key == "B_T_sq") {
        fill([&](std::size_t leaf) {
            const double r = leaf_norm(*tree, n, leaf);
            return r * r;
        });
    } else if (key == "running_max") {
        fill([&](std::size_t leaf) {
            double best = 0.0;
            for (int k = 1; k <= n; ++k) {
                best = std::max(best, tree->brownian(k, tree->ancestor(n, leaf, k), 0));
            }
            return best;
        });
    } else if (key == "ind_B_T_pos") {
        fill([&](std::size_t leaf) { return tree->brownian(n, leaf, 0) > 1e-12 ? 1.0 : 0.0; });
    } else if (key == "ind_B_T_nonneg") {
        fill([&](std::size_t leaf) { return tree->brownian(n, leaf, 0) > -1e-12 ? 1.0 : 0.0; });
    } else if (key == "ind_first_up") {
        fill([&](std::size_t leaf) { return tree->brownian(1, tree->ancestor(n, leaf, 1), 0) > 0.0 ? 1.0 : 0.0; });
    } else {
        throw ConfigError("unknown claim key '" + key + "'");
    }
    return NamedClaim{key, std::move(out)};
}

std::vector<std::string> default_claim_keys()
{
    return {"const:0",  "const:1",     "const:-0.5",  "B_T",           "abs_B_T",
            "B_T_sq",   "running_max", "ind_B_T_pos", "ind_B_T_nonneg"};
}

std::vector<NamedClaim> make_claims(const TreePtr& tree, const std::vector<std::string>& keys)
{
    std::vector<NamedClaim> claims;
    claims.reserve(keys.size());
    for (const auto& key : keys) {
        claims.push_back(make_claim(tree, key));
    }
    return claims;
}

std::vector<NamedClaim> default_claims(const TreePtr& tree)
{
    return make_claims(tree, default_claim_keys());
}

AdaptedField process_from_nodes(const TreePtr& tree, const std::function<double(int, std::size_t)>& value)
{
    AdaptedField f(tree);
    for (int k = 0; k <= tree->steps(); ++k) {
        Slice s(tree->node_count(k));
        for (std::size_t node = 0; node < s.size(); ++node) {
            s[node] = value(k, node);
        }
        f.set(k, std::move(s));
    }
    return f;
}

std::vector<NamedProcess> default_shifts(const TreePtr& tree)
{
    std::vector<NamedProcess> shifts;
    shifts.push_back({"one", process_from_nodes(tree, [](int, std::size_t) { return 1.0; })});
    shifts.push_back({"B_t", process_from_nodes(tree, [&](int k, std::size_t node) { return tree->brownian(k, node, 0); })});
    shifts.push_back({"abs_B_t", process_from_nodes(tree, [&](int k, std::size_t node) { return leaf_norm(*tree, k, node); })});
    return shifts;
}

std::vector<Event> default_events(const FiltrationTree& tree)
{
    std::vector<Event> events;
    for (int step = 1; step <= std::min(2, tree.steps()); ++step) {
        const std::size_t count = tree.node_count(step);
        if (count <= 4) {
            for (std::size_t mask = 0; mask < (std::size_t{1} << count); ++mask) {
                Event e{step, std::vector<char>(count, 0)};
                for (std::size_t i = 0; i < count; ++i) {
                    e.members[i] = static_cast<char>((mask >> i) & 1U);
                }
                events.push_back(std::move(e));
            }
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                Event e{step, std::vector<char>(count, 0)};
                e.members[i] = 1;
                events.push_back(std::move(e));
            }
            Event half{step, std::vector<char>(count, 0)};
            for (std::size_t i = 0; i < count / 2; ++i) {
                half.members[i] = 1;
            }
            events.push_back(std::move(half));
        }
    }
    return events;
}

std::vector<ClaimPair> all_pairs(const std::vector<NamedClaim>& claims)
{
    std::vector<ClaimPair> pairs;
    pairs.reserve(claims.size() * claims.size());
    for (const auto& x : claims) {
        for (const auto& y : claims) {
            pairs.push_back({x.name + "|" + y.name, x.leaves, y.leaves});
        }
    }
    return pairs;
}

}  // namespace nlx
