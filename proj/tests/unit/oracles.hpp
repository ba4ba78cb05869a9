#pragma once

// Reference computations written against the tree's index convention only
// (child c of node i is i * 2^d + c, bit j of c is the sign of coordinate j).
// They share no code with the library beyond that convention.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

struct Tree {
    double T;
    int N;
    int d;

    std::size_t b() const { return std::size_t{1} << d; }
    double dt() const { return T / N; }
    std::size_t nodes(int k) const { return std::size_t{1} << (d * k); }
    int sign(std::size_t offset, int j) const { return ((offset >> j) & 1U) ? 1 : -1; }

    /// Child offset taken at step j < k on the path to (k, node).
    std::size_t offset(int k, std::size_t node, int j) const
    {
        return (node >> (d * (k - 1 - j))) & (b() - 1);
    }

    double brownian(int k, std::size_t node, int coord = 0) const
    {
        int sum = 0;
        for (int j = 0; j < k; ++j) {
            sum += sign(offset(k, node, j), coord);
        }
        return std::sqrt(dt()) * sum;
    }

    /// Plain average of the leaves below (k, node).
    double cond_expect(const std::vector<double>& leaves, int k, std::size_t node) const
    {
        const std::size_t width = nodes(N - k);
        double sum = 0.0;
        for (std::size_t l = node * width; l < (node + 1) * width; ++l) {
            sum += leaves[l];
        }
        return sum / static_cast<double>(width);
    }

    std::vector<double> leaves(const std::function<double(std::size_t leaf)>& f) const
    {
        std::vector<double> out(nodes(N));
        for (std::size_t l = 0; l < out.size(); ++l) {
            out[l] = f(l);
        }
        return out;
    }
};

/// One backward step of an arbitrary rule applied recursively from the leaves.
/// step(k, children) returns the node value from its 2^d child values.
inline std::vector<std::vector<double>> backward(
    const Tree& tree, const std::vector<double>& leaves,
    const std::function<double(int k, const std::vector<double>& children)>& step)
{
    std::vector<std::vector<double>> y(static_cast<std::size_t>(tree.N) + 1);
    y[static_cast<std::size_t>(tree.N)] = leaves;
    for (int k = tree.N - 1; k >= 0; --k) {
        auto& cur = y[static_cast<std::size_t>(k)];
        const auto& next = y[static_cast<std::size_t>(k) + 1];
        cur.resize(tree.nodes(k));
        std::vector<double> children(tree.b());
        for (std::size_t node = 0; node < cur.size(); ++node) {
            for (std::size_t c = 0; c < tree.b(); ++c) {
                children[c] = next[node * tree.b() + c];
            }
            cur[node] = step(k, children);
        }
    }
    return y;
}

/// Explicit discrete g-expectation for a z-only driver g(|z|-vector).
inline std::vector<std::vector<double>> g_expectation(const Tree& tree, const std::vector<double>& leaves,
                                                      const std::function<double(const std::vector<double>&)>& g)
{
    return backward(tree, leaves, [&](int, const std::vector<double>& ch) {
        double mean = 0.0;
        for (double v : ch) {
            mean += v;
        }
        mean /= static_cast<double>(ch.size());
        std::vector<double> z(static_cast<std::size_t>(tree.d), 0.0);
        for (int j = 0; j < tree.d; ++j) {
            for (std::size_t c = 0; c < ch.size(); ++c) {
                z[static_cast<std::size_t>(j)] += tree.sign(c, j) * ch[c];
            }
            z[static_cast<std::size_t>(j)] /= static_cast<double>(ch.size()) * std::sqrt(tree.dt());
        }
        return mean + tree.dt() * g(z);
    });
}

/// d = 1 worst case over the two extreme drifts theta = +-mu.
inline std::vector<std::vector<double>> drift_sup(const Tree& tree, const std::vector<double>& leaves, double mu)
{
    return backward(tree, leaves, [&](int, const std::vector<double>& ch) {
        const double s = std::sqrt(tree.dt());
        double best = -INFINITY;
        for (double theta : {-mu, mu}) {
            // child 0 is the down move.
            const double v = 0.5 * (1.0 - theta * s) * ch[0] + 0.5 * (1.0 + theta * s) * ch[1];
            best = std::max(best, v);
        }
        return best;
    });
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

/// Seeded leaf vectors with entries in [-scale, scale].
inline std::vector<double> random_leaves(std::mt19937_64& rng, std::size_t n, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> out(n);
    for (double& v : out) {
        v = u(rng);
    }
    return out;
}

}  // namespace oracle
