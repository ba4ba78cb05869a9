#include "nlx/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nlx/error.hpp"
#include "nlx/parallel.hpp"

namespace nlx {

namespace {
constexpr double kSpreadFloor = 4.0 * std::numeric_limits<double>::epsilon();
}  // namespace

TimeGrid TimeGrid::make(double horizon, int steps)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ContractError("time grid: horizon T must be positive and finite, got " + std::to_string(horizon));
    }
    if (steps < 1) {
        throw ContractError("time grid: steps N must be >= 1, got " + std::to_string(steps));
    }
    return TimeGrid{horizon, steps, horizon / static_cast<double>(steps)};
}

FiltrationTree::FiltrationTree(TimeGrid grid, int dim)
    : grid_(grid)
    , dim_(dim)
    , branching_(std::size_t{1} << dim)
    , sqrt_dt_(std::sqrt(grid.dt))
{
    const auto d = static_cast<std::size_t>(dim_);
    brownian_.resize(static_cast<std::size_t>(grid_.steps) + 1);
    brownian_[0].assign(d, 0.0);
    // Integer walk, scaled once, so equal walks give bitwise-equal B.
    std::vector<int> walk(d, 0);
    for (int k = 0; k < grid_.steps; ++k) {
        std::vector<int> next_walk(node_count(k + 1) * d);
        Slice& next = brownian_[static_cast<std::size_t>(k) + 1];
        next.resize(node_count(k + 1) * d);
        parallel_for(node_count(k), [&](std::size_t node) {
            for (std::size_t c = 0; c < branching_; ++c) {
                const std::size_t child = node * branching_ + c;
                for (std::size_t j = 0; j < d; ++j) {
                    const int w = walk[node * d + j] + sign(c, static_cast<int>(j));
                    next_walk[child * d + j] = w;
                    next[child * d + j] = sqrt_dt_ * static_cast<double>(w);
                }
            }
        });
        walk = std::move(next_walk);
    }
}

std::shared_ptr<const FiltrationTree> FiltrationTree::build(TimeGrid grid, int dim, TreeBudget budget)
{
    if (dim < 1) {
        throw ContractError("filtration tree: dimension d must be >= 1, got " + std::to_string(dim));
    }
    if (grid.steps < 1 || !(grid.horizon > 0.0)) {
        grid = TimeGrid::make(grid.horizon, grid.steps);
    }
    const long long cost = static_cast<long long>(grid.steps) * dim;
    if (cost > budget.max_steps_times_dim) {
        throw ResourceError("filtration tree: N*d = " + std::to_string(cost) + " exceeds the budget limit N*d <= " +
                            std::to_string(budget.max_steps_times_dim));
    }
    return std::shared_ptr<const FiltrationTree>(new FiltrationTree(grid, dim));
}

std::size_t FiltrationTree::node_count(int k) const
{
    return std::size_t{1} << (static_cast<std::size_t>(dim_) * static_cast<std::size_t>(k));
}

std::size_t FiltrationTree::ancestor(int from_step, std::size_t node, int to_step) const
{
    return node >> (static_cast<std::size_t>(dim_) * static_cast<std::size_t>(from_step - to_step));
}

std::span<const double> FiltrationTree::brownian(int k) const
{
    return brownian_.at(static_cast<std::size_t>(k));
}

void FiltrationTree::check_slice(std::span<const double> values, int k, std::size_t width) const
{
    if (k < 0 || k > grid_.steps) {
        throw ContractError("step " + std::to_string(k) + " outside [0, " + std::to_string(grid_.steps) + "]");
    }
    if (values.size() != node_count(k) * width) {
        throw ContractError("slice at step " + std::to_string(k) + " has " + std::to_string(values.size()) +
                            " values, expected " + std::to_string(node_count(k) * width));
    }
}

Slice FiltrationTree::cond_expect(std::span<const double> next, int k) const
{
    if (k < 0 || k >= grid_.steps) {
        throw ContractError("cond_expect: step " + std::to_string(k) + " has no successor");
    }
    check_slice(next, k + 1);
    Slice out(node_count(k));
    const double inv = 1.0 / static_cast<double>(branching_);
    parallel_for(out.size(), [&](std::size_t node) {
        const std::size_t base = node * branching_;
        double sum = 0.0;
        for (std::size_t c = 0; c < branching_; ++c) {
            sum += next[base + c];
        }
        out[node] = sum * inv;
    });
    return out;
}

Slice FiltrationTree::cond_expect(std::span<const double> values, int from, int to) const
{
    if (to > from) {
        throw ContractError("cond_expect: target step after source step");
    }
    check_slice(values, from);
    Slice current(values.begin(), values.end());
    for (int k = from - 1; k >= to; --k) {
        current = cond_expect(current, k);
    }
    return current;
}

Slice FiltrationTree::project_increment(std::span<const double> next, int k) const
{
    if (k < 0 || k >= grid_.steps) {
        throw ContractError("project_increment: step " + std::to_string(k) + " has no successor");
    }
    check_slice(next, k + 1);
    const auto d = static_cast<std::size_t>(dim_);
    Slice out(node_count(k) * d);
    const double scale = 1.0 / (static_cast<double>(branching_) * sqrt_dt_);
    parallel_for(node_count(k), [&](std::size_t node) {
        const std::size_t base = node * branching_;
        double magnitude = 0.0;
        for (std::size_t c = 0; c < branching_; ++c) {
            magnitude = std::max(magnitude, std::abs(next[base + c]));
        }
        const double floor = kSpreadFloor * static_cast<double>(branching_) * magnitude;
        for (std::size_t j = 0; j < d; ++j) {
            double sum = 0.0;
            for (std::size_t c = 0; c < branching_; ++c) {
                sum += sign(c, static_cast<int>(j)) * next[base + c];
            }
            // A spread at the rounding level of the children carries no signal;
            // non-Lipschitz drivers would blow it up to sqrt(eps).
            out[node * d + j] = std::abs(sum) <= floor ? 0.0 : sum * scale;
        }
    });
    return out;
}

Slice FiltrationTree::broadcast(std::span<const double> values, int from, int to) const
{
    if (to < from) {
        throw ContractError("broadcast: target step before source step");
    }
    check_slice(values, from);
    Slice out(node_count(to));
    const std::size_t shift = static_cast<std::size_t>(dim_) * static_cast<std::size_t>(to - from);
    for (std::size_t node = 0; node < out.size(); ++node) {
        out[node] = values[node >> shift];
    }
    return out;
}

// --- AdaptedField ---------------------------------------------------------

AdaptedField::AdaptedField(TreePtr tree, int width)
    : tree_(std::move(tree))
    , width_(width)
{
    if (!tree_) {
        throw ContractError("adapted field: null tree");
    }
    if (width_ < 1) {
        throw ContractError("adapted field: width must be >= 1");
    }
    slices_.resize(static_cast<std::size_t>(tree_->steps()) + 1);
}

AdaptedField AdaptedField::terminal(TreePtr tree, Slice leaves)
{
    AdaptedField f(std::move(tree));
    f.set(f.tree().steps(), std::move(leaves));
    return f;
}

AdaptedField AdaptedField::constant(TreePtr tree, double value, int first, int last)
{
    AdaptedField f(std::move(tree));
    for (int k = first; k <= last; ++k) {
        f.set(k, Slice(f.tree().node_count(k), value));
    }
    return f;
}

AdaptedField AdaptedField::brownian(TreePtr tree)
{
    AdaptedField f(tree, tree->dim());
    for (int k = 0; k <= tree->steps(); ++k) {
        auto b = tree->brownian(k);
        f.set(k, Slice(b.begin(), b.end()));
    }
    return f;
}

bool AdaptedField::defined(int k) const
{
    return k >= 0 && k < static_cast<int>(slices_.size()) && !slices_[static_cast<std::size_t>(k)].empty();
}

bool AdaptedField::terminal_only() const
{
    return first_step() == tree_->steps() && last_step() == tree_->steps();
}

int AdaptedField::first_step() const
{
    for (int k = 0; k < static_cast<int>(slices_.size()); ++k) {
        if (defined(k)) {
            return k;
        }
    }
    return -1;
}

int AdaptedField::last_step() const
{
    for (int k = static_cast<int>(slices_.size()) - 1; k >= 0; --k) {
        if (defined(k)) {
            return k;
        }
    }
    return -1;
}

std::span<const double> AdaptedField::at(int k) const
{
    if (!defined(k)) {
        throw ContractError("adapted field: step " + std::to_string(k) + " is not defined");
    }
    return slices_[static_cast<std::size_t>(k)];
}

std::span<double> AdaptedField::at(int k)
{
    if (!defined(k)) {
        throw ContractError("adapted field: step " + std::to_string(k) + " is not defined");
    }
    return slices_[static_cast<std::size_t>(k)];
}

void AdaptedField::set(int k, Slice values)
{
    tree_->check_slice(values, k, static_cast<std::size_t>(width_));
    slices_[static_cast<std::size_t>(k)] = std::move(values);
}

bool AdaptedField::operator==(const AdaptedField& other) const
{
    const bool same_tree = tree_ == other.tree_ ||
                           (tree_ && other.tree_ && tree_->dim() == other.tree_->dim() &&
                            tree_->steps() == other.tree_->steps() &&
                            tree_->grid().horizon == other.tree_->grid().horizon);
    return same_tree && width_ == other.width_ && slices_ == other.slices_;
}

AdaptedField cond_expect(const AdaptedField& f, int k)
{
    if (f.width() != 1) {
        throw ContractError("cond_expect: field must be scalar");
    }
    if (!f.defined(k + 1)) {
        throw ContractError("cond_expect: field not defined at step " + std::to_string(k + 1));
    }
    AdaptedField out(f.tree_ptr());
    out.set(k, f.tree().cond_expect(f.at(k + 1), k));
    return out;
}

AdaptedField project_increment(const AdaptedField& f, int k)
{
    if (f.width() != 1) {
        throw ContractError("project_increment: field must be scalar");
    }
    if (!f.defined(k + 1)) {
        throw ContractError("project_increment: field not defined at step " + std::to_string(k + 1));
    }
    AdaptedField out(f.tree_ptr(), f.tree().dim());
    out.set(k, f.tree().project_increment(f.at(k + 1), k));
    return out;
}

// --- StoppingTime ---------------------------------------------------------

StoppingTime::StoppingTime(TreePtr tree, std::vector<int> steps)
    : tree_(std::move(tree))
    , steps_(std::move(steps))
{}

StoppingTime StoppingTime::deterministic(TreePtr tree, int step)
{
    if (step < 0 || step > tree->steps()) {
        throw ContractError("stopping time: step " + std::to_string(step) + " outside the grid");
    }
    const std::size_t leaves = tree->leaf_count();
    return StoppingTime(std::move(tree), std::vector<int>(leaves, step));
}

StoppingTime StoppingTime::first_hitting(const AdaptedField& process, const std::function<bool(double)>& hit)
{
    const FiltrationTree& tree = process.tree();
    const int n = tree.steps();
    for (int k = 0; k <= n; ++k) {
        if (!process.defined(k)) {
            throw ContractError("first_hitting: process undefined at step " + std::to_string(k));
        }
    }
    std::vector<int> steps(tree.leaf_count(), n);
    for (std::size_t leaf = 0; leaf < steps.size(); ++leaf) {
        for (int k = 0; k <= n; ++k) {
            if (hit(process.value(k, tree.ancestor(n, leaf, k)))) {
                steps[leaf] = k;
                break;
            }
        }
    }
    return StoppingTime(process.tree_ptr(), std::move(steps));
}

StoppingTime StoppingTime::from_leaves(TreePtr tree, std::vector<int> leaf_steps)
{
    const int n = tree->steps();
    if (leaf_steps.size() != tree->leaf_count()) {
        throw ContractError("stopping time: expected one step per leaf");
    }
    for (int s : leaf_steps) {
        if (s < 0 || s > n) {
            throw ContractError("stopping time: step " + std::to_string(s) + " outside the grid");
        }
    }
    // {sigma = k} must be a union of step-k nodes: all descendants agree.
    for (std::size_t leaf = 0; leaf < leaf_steps.size(); ++leaf) {
        const int k = leaf_steps[leaf];
        const std::size_t span = tree->node_count(n - k);
        const std::size_t begin = (leaf / span) * span;
        for (std::size_t other = begin; other < begin + span; ++other) {
            if (leaf_steps[other] != k) {
                throw ContractError("stopping time: {sigma = " + std::to_string(k) +
                                    "} is not F_k-measurable at leaf " + std::to_string(leaf));
            }
        }
    }
    return StoppingTime(std::move(tree), std::move(leaf_steps));
}

std::optional<int> StoppingTime::stopped_by(int k, std::size_t node) const
{
    const int n = tree_->steps();
    const std::size_t leaf = node * tree_->node_count(n - k);
    const int s = steps_[leaf];
    if (s <= k) {
        return s;
    }
    return std::nullopt;
}

StoppingTime StoppingTime::min(const StoppingTime& other) const
{
    if (tree_ != other.tree_) {
        throw ContractError("stopping time: min over different trees");
    }
    std::vector<int> steps(steps_.size());
    for (std::size_t i = 0; i < steps.size(); ++i) {
        steps[i] = std::min(steps_[i], other.steps_[i]);
    }
    return StoppingTime(tree_, std::move(steps));
}

Slice stopped_value(const AdaptedField& f, const StoppingTime& tau)
{
    if (f.tree_ptr() != tau.tree_ptr()) {
        throw ContractError("stopped_value: field and stopping time live on different trees");
    }
    if (f.width() != 1) {
        throw ContractError("stopped_value: field must be scalar");
    }
    const FiltrationTree& tree = f.tree();
    const int n = tree.steps();
    Slice out(tree.leaf_count());
    for (std::size_t leaf = 0; leaf < out.size(); ++leaf) {
        const int k = tau.at_leaf(leaf);
        if (!f.defined(k)) {
            throw ContractError("stopped_value: field undefined at step " + std::to_string(k));
        }
        out[leaf] = f.value(k, tree.ancestor(n, leaf, k));
    }
    return out;
}

Slice indicator(const FiltrationTree& tree, const Event& event)
{
    tree.check_slice(Slice(event.members.size()), event.step);
    const int n = tree.steps();
    Slice out(tree.leaf_count());
    for (std::size_t leaf = 0; leaf < out.size(); ++leaf) {
        out[leaf] = event.members[tree.ancestor(n, leaf, event.step)] ? 1.0 : 0.0;
    }
    return out;
}

namespace {
template <typename T>
bool measurable_at(const FiltrationTree& tree, const T& leaf_values, const StoppingTime& sigma)
{
    const int n = tree.steps();
    if (leaf_values.size() != tree.leaf_count()) {
        throw ContractError("measurability check: expected one value per leaf");
    }
    for (std::size_t leaf = 0; leaf < leaf_values.size(); ++leaf) {
        const std::size_t span = tree.node_count(n - sigma.at_leaf(leaf));
        const std::size_t first = (leaf / span) * span;
        if (leaf_values[leaf] != leaf_values[first]) {
            return false;
        }
    }
    return true;
}
}  // namespace

bool is_measurable_at(const FiltrationTree& tree, const std::vector<char>& leaf_members, const StoppingTime& sigma)
{
    return measurable_at(tree, leaf_members, sigma);
}

bool is_measurable_at(const FiltrationTree& tree, std::span<const double> leaf_values, const StoppingTime& sigma)
{
    return measurable_at(tree, leaf_values, sigma);
}

}  // namespace nlx
