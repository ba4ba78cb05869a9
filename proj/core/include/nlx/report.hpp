#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace nlx {

/// One nodewise inequality or identity that did not hold.
struct Witness {
    int step = 0;
    std::size_t node = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string note;
};

/// Outcome of a nodewise check. Only the first `max_witnesses` failures are
/// kept; `violations` counts all of them.
struct CheckReport {
    std::string check;
    std::size_t violations = 0;
    std::size_t comparisons = 0;
    double max_excess = 0.0;  // largest amount by which an assertion failed
    std::vector<Witness> witnesses;
    std::size_t max_witnesses = 16;

    explicit CheckReport(std::string name = {}) : check(std::move(name)) {}

    bool pass() const { return violations == 0; }

    /// Records `lhs <= rhs + tol`. Returns whether it held.
    bool expect_le(double lhs, double rhs, double tol, int step, std::size_t node,
                   const std::string& note = {});
    /// Records `|lhs - rhs| <= tol`. Returns whether it held.
    bool expect_near(double lhs, double rhs, double tol, int step, std::size_t node,
                     const std::string& note = {});
    void fail(Witness w, double excess);
    void merge(const CheckReport& other);
};

nlohmann::json to_json(const CheckReport& report);

}  // namespace nlx
