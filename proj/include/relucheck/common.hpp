#pragma once

// Shared numeric helpers, error types and tolerance configuration.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace relucheck {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Malformed inputs: bad dimensions, unknown ids, unreadable files.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The LP engine exceeded its pivot budget. Distinct from Infeasible.
class SolverLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All tolerances are absolute and sized for coefficient magnitudes around 1.
struct Tolerances {
    double eq = 1e-7;         // max equality residual for a feasible witness
    double bound = 1e-8;      // max bound violation for a feasible witness
    double pivot = 1e-9;      // simplex degeneracy / reduced-cost threshold
    double relu = 1e-7;       // witness accepted as phase-consistent
    double validation = 1e-6; // concrete counterexample re-check slack
    double margin = 1e-6;     // strict-inequality margin for encoded properties
};

struct Interval {
    double lo = -kInf;
    double hi = kInf;

    double width() const { return hi - lo; }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }
};

inline bool is_finite(double v) { return std::isfinite(v); }

} // namespace relucheck
