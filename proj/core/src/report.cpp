#include "nlx/report.hpp"

#include <algorithm>
#include <cmath>

namespace nlx {

bool CheckReport::expect_le(double lhs, double rhs, double tol, int step, std::size_t node,
                            const std::string& note)
{
    ++comparisons;
    if (lhs <= rhs + tol && std::isfinite(lhs) && std::isfinite(rhs)) {
        return true;
    }
    fail(Witness{step, node, lhs, rhs, note}, lhs - rhs);
    return false;
}

bool CheckReport::expect_near(double lhs, double rhs, double tol, int step, std::size_t node,
                              const std::string& note)
{
    ++comparisons;
    const double gap = std::abs(lhs - rhs);
    if (gap <= tol) {
        return true;
    }
    fail(Witness{step, node, lhs, rhs, note}, gap);
    return false;
}

void CheckReport::fail(Witness w, double excess)
{
    ++violations;
    if (!std::isfinite(excess) || excess > max_excess) {
        max_excess = std::isfinite(excess) ? excess : max_excess;
    }
    if (witnesses.size() < max_witnesses) {
        witnesses.push_back(std::move(w));
    }
}

void CheckReport::merge(const CheckReport& other)
{
    violations += other.violations;
    comparisons += other.comparisons;
    max_excess = std::max(max_excess, other.max_excess);
    for (const auto& w : other.witnesses) {
        if (witnesses.size() >= max_witnesses) {
            break;
        }
        witnesses.push_back(w);
    }
}

nlohmann::json to_json(const CheckReport& report)
{
    nlohmann::json witnesses = nlohmann::json::array();
    for (const auto& w : report.witnesses) {
        nlohmann::json item{{"node", w.node}, {"step", w.step}, {"lhs", w.lhs}, {"rhs", w.rhs}};
        if (!w.note.empty()) {
            item["note"] = w.note;
        }
        witnesses.push_back(std::move(item));
    }
    return nlohmann::json{
        {"check", report.check},
        {"pass", report.pass()},
        {"violations", report.violations},
        {"comparisons", report.comparisons},
        {"witnesses", std::move(witnesses)},
    };
}

}  // namespace nlx
