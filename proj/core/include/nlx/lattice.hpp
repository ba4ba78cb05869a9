#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace nlx {

/// Uniform time grid t_k = k T / N on [0, T].
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;
    double dt = 1.0;

    static TimeGrid make(double horizon, int steps);
    double time(int k) const { return horizon * static_cast<double>(k) / static_cast<double>(steps); }
};

struct TreeBudget {
    int max_steps_times_dim = 22;
};

using Slice = std::vector<double>;

/// Non-recombining Rademacher tree: each node has 2^d children, one per sign
/// vector in {-1,+1}^d, each with probability 2^-d. Children of node i at step
/// k are the consecutive indices i*2^d .. i*2^d + 2^d - 1 at step k+1; bit j of
/// the child offset selects the sign of coordinate j (0 -> -1, 1 -> +1).
///
/// Brownian values are B_k = sqrt(dt) * (sum of the first k sign vectors).
class FiltrationTree {
public:
    static std::shared_ptr<const FiltrationTree> build(TimeGrid grid, int dim, TreeBudget budget = {});

    const TimeGrid& grid() const { return grid_; }
    int steps() const { return grid_.steps; }
    int dim() const { return dim_; }
    double dt() const { return grid_.dt; }
    double sqrt_dt() const { return sqrt_dt_; }
    double time(int k) const { return grid_.time(k); }
    std::size_t branching() const { return branching_; }
    std::size_t node_count(int k) const;
    std::size_t leaf_count() const { return node_count(grid_.steps); }

    static int sign(std::size_t child_offset, int coord) { return ((child_offset >> coord) & 1U) ? 1 : -1; }
    std::size_t parent(std::size_t node) const { return node / branching_; }
    std::size_t first_child(std::size_t node) const { return node * branching_; }
    /// Ancestor at `to_step` of `node` living at `from_step` (to_step <= from_step).
    std::size_t ancestor(int from_step, std::size_t node, int to_step) const;

    /// Brownian values at step k, `dim` consecutive doubles per node.
    std::span<const double> brownian(int k) const;
    double brownian(int k, std::size_t node, int coord = 0) const
    {
        return brownian_[static_cast<std::size_t>(k)][node * static_cast<std::size_t>(dim_) + static_cast<std::size_t>(coord)];
    }

    /// E[f | F_k] for f given on the nodes of step k+1: mean of the children,
    /// summed left to right.
    Slice cond_expect(std::span<const double> next, int k) const;
    /// Repeated one-step averaging from `from` down to `to`.
    Slice cond_expect(std::span<const double> values, int from, int to) const;
    /// Z_k^i = E[f eps^i | F_k] / sqrt(dt); `dim` values per node of step k.
    Slice project_increment(std::span<const double> next, int k) const;
    /// Lifts an F_from-measurable slice to the nodes of step `to` >= from.
    Slice broadcast(std::span<const double> values, int from, int to) const;

    void check_slice(std::span<const double> values, int k, std::size_t width = 1) const;

private:
    FiltrationTree(TimeGrid grid, int dim);

    TimeGrid grid_;
    int dim_;
    std::size_t branching_;
    double sqrt_dt_;
    std::vector<Slice> brownian_;
};

using TreePtr = std::shared_ptr<const FiltrationTree>;

/// Per-step node values of a real or R^width valued adapted process. Steps
/// that were never assigned are undefined; adaptedness is structural because
/// every value is attached to a node.
class AdaptedField {
public:
    AdaptedField() = default;
    explicit AdaptedField(TreePtr tree, int width = 1);

    static AdaptedField terminal(TreePtr tree, Slice leaves);
    static AdaptedField constant(TreePtr tree, double value, int first, int last);
    /// Brownian motion itself (width = d), defined on every step.
    static AdaptedField brownian(TreePtr tree);

    const FiltrationTree& tree() const { return *tree_; }
    const TreePtr& tree_ptr() const { return tree_; }
    int width() const { return width_; }

    bool defined(int k) const;
    bool terminal_only() const;
    int first_step() const;
    int last_step() const;

    std::span<const double> at(int k) const;
    std::span<double> at(int k);
    void set(int k, Slice values);
    double value(int k, std::size_t node, int comp = 0) const
    {
        return slices_[static_cast<std::size_t>(k)][node * static_cast<std::size_t>(width_) + static_cast<std::size_t>(comp)];
    }

    bool operator==(const AdaptedField& other) const;

private:
    TreePtr tree_;
    int width_ = 1;
    std::vector<Slice> slices_;
};

/// E[f_{k+1} | F_k]; f must be scalar and defined at k+1.
AdaptedField cond_expect(const AdaptedField& f, int k);
/// Z-projection of f_{k+1} onto the step-(k+1) increment.
AdaptedField project_increment(const AdaptedField& f, int k);

/// Stopping time on the tree, stored as the stopping step of every leaf.
/// Construction verifies that {sigma = k} is F_k-measurable.
class StoppingTime {
public:
    static StoppingTime deterministic(TreePtr tree, int step);
    /// First step k with hit(process value at (k, node)); N if never.
    static StoppingTime first_hitting(const AdaptedField& process, const std::function<bool(double)>& hit);
    static StoppingTime from_leaves(TreePtr tree, std::vector<int> leaf_steps);

    const FiltrationTree& tree() const { return *tree_; }
    const TreePtr& tree_ptr() const { return tree_; }
    int at_leaf(std::size_t leaf) const { return steps_[leaf]; }
    const std::vector<int>& leaf_steps() const { return steps_; }
    /// sigma at a node of step k when {sigma <= k} holds there.
    std::optional<int> stopped_by(int k, std::size_t node) const;

    StoppingTime min(const StoppingTime& other) const;

private:
    StoppingTime(TreePtr tree, std::vector<int> steps);

    TreePtr tree_;
    std::vector<int> steps_;
};

/// Leafwise f_tau, an F_tau-measurable random variable.
Slice stopped_value(const AdaptedField& f, const StoppingTime& tau);

/// An F_k-measurable event given by membership of the nodes of step k.
struct Event {
    int step = 0;
    std::vector<char> members;
};

Slice indicator(const FiltrationTree& tree, const Event& event);
/// An event given directly on the leaves is F_sigma-measurable when, on every
/// leaf stopped at k, membership depends only on the ancestor at step k.
bool is_measurable_at(const FiltrationTree& tree, const std::vector<char>& leaf_members, const StoppingTime& sigma);
/// Whether a leaf slice is F_sigma-measurable in the same sense.
bool is_measurable_at(const FiltrationTree& tree, std::span<const double> leaf_values, const StoppingTime& sigma);

}  // namespace nlx
