#pragma once

// Systems of linear equalities over bounded real variables, plus sound
// interval-based bound tightening. Feasibility itself lives in simplex.hpp.

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "relucheck/common.hpp"

namespace relucheck {

using VarId = std::size_t;

struct LinearTerm {
    VarId var;
    double coeff;
};

struct Equality {
    std::vector<LinearTerm> terms; // zero coefficients stripped, vars unique
    double rhs;
};

// Single-owner while being solved; clone freely for case-splitting. Equality
// rows are shared copy-on-write between clones since branching only ever
// touches bounds.
class LinearSystem {
public:
    LinearSystem() : equalities_(std::make_shared<std::vector<Equality>>()) {}

    VarId add_var(double lo, double hi) {
        if (std::isnan(lo) || std::isnan(hi)) throw InputError("variable bound is NaN");
        if (lo > hi) throw InputError("variable lower bound exceeds upper bound");
        if (lo == kInf || hi == -kInf) throw InputError("variable bound infinite on the wrong side");
        lower_.push_back(lo);
        upper_.push_back(hi);
        return lower_.size() - 1;
    }

    std::size_t var_count() const { return lower_.size(); }

    double lower(VarId v) const { return lower_.at(v); }
    double upper(VarId v) const { return upper_.at(v); }

    // Tightening mutators: only ever shrink the range. May legitimately cross
    // the opposite bound (empty range); feasibility checks detect that.
    void tighten_lower(VarId v, double lo) { lower_.at(v) = std::max(lower_.at(v), lo); }
    void tighten_upper(VarId v, double hi) { upper_.at(v) = std::min(upper_.at(v), hi); }

    void add_equality(const std::vector<LinearTerm>& terms, double rhs) {
        if (!is_finite(rhs)) throw InputError("equality rhs must be finite");
        std::map<VarId, double> merged;
        for (const LinearTerm& t : terms) {
            if (t.var >= var_count())
                throw InputError("equality references unknown variable " + std::to_string(t.var));
            if (!is_finite(t.coeff)) throw InputError("equality coefficient must be finite");
            merged[t.var] += t.coeff;
        }
        Equality eq;
        eq.rhs = rhs;
        for (auto [v, c] : merged)
            if (c != 0.0) eq.terms.push_back({v, c});
        own_equalities().push_back(std::move(eq));
    }

    const std::vector<Equality>& equalities() const { return *equalities_; }

    double residual(const Equality& eq, const std::vector<double>& x) const {
        double acc = -eq.rhs;
        for (const LinearTerm& t : eq.terms) acc += t.coeff * x[t.var];
        return acc;
    }

    bool bounds_consistent(double tol = 0.0) const {
        for (std::size_t i = 0; i < lower_.size(); ++i)
            if (lower_[i] > upper_[i] + tol) return false;
        return true;
    }

    // Plain-text dump, one constraint per line; used for test fixtures.
    std::string dump() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < lower_.size(); ++i)
            os << "var x" << i << " in [" << lower_[i] << ", " << upper_[i] << "]\n";
        for (const Equality& eq : *equalities_) {
            os << "eq:";
            for (const LinearTerm& t : eq.terms)
                os << (t.coeff < 0 ? " " : " +") << t.coeff << "*x" << t.var;
            os << " = " << eq.rhs << "\n";
        }
        return os.str();
    }

private:
    std::vector<Equality>& own_equalities() {
        if (equalities_.use_count() > 1)
            equalities_ = std::make_shared<std::vector<Equality>>(*equalities_);
        return *equalities_;
    }

    std::vector<double> lower_;
    std::vector<double> upper_;
    std::shared_ptr<std::vector<Equality>> equalities_;
};

struct TightenResult {
    bool infeasible = false; // some variable's bounds crossed
    bool changed = false;
    int rounds = 0;
};

// Derives implied bounds for each variable of each equality via interval
// arithmetic on the remaining terms, iterating to fixpoint or max_rounds.
// Sound: never excludes a point satisfying the system. Terms unbounded on
// the relevant side simply contribute no bound.
inline TightenResult tighten(LinearSystem& sys, int max_rounds = 3,
                             double cross_tol = 1e-9) {
    TightenResult res;
    constexpr double kMinImprove = 1e-12;
    for (int round = 0; round < max_rounds; ++round) {
        bool round_changed = false;
        for (const Equality& eq : sys.equalities()) {
            const std::size_t n = eq.terms.size();
            for (std::size_t skip = 0; skip < n; ++skip) {
                // rest = rhs - sum of the other terms, as an interval
                double rest_lo = eq.rhs, rest_hi = eq.rhs;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == skip) continue;
                    const LinearTerm& t = eq.terms[j];
                    const double lo = sys.lower(t.var), hi = sys.upper(t.var);
                    double tlo, thi;
                    if (t.coeff > 0) {
                        tlo = t.coeff * lo;
                        thi = t.coeff * hi;
                    } else {
                        tlo = t.coeff * hi;
                        thi = t.coeff * lo;
                    }
                    rest_lo -= thi;
                    rest_hi -= tlo;
                }
                const LinearTerm& t = eq.terms[skip];
                double imp_lo, imp_hi;
                if (t.coeff > 0) {
                    imp_lo = rest_lo / t.coeff;
                    imp_hi = rest_hi / t.coeff;
                } else {
                    imp_lo = rest_hi / t.coeff;
                    imp_hi = rest_lo / t.coeff;
                }
                if (is_finite(imp_lo) && imp_lo > sys.lower(t.var) + kMinImprove) {
                    sys.tighten_lower(t.var, imp_lo);
                    round_changed = true;
                }
                if (is_finite(imp_hi) && imp_hi < sys.upper(t.var) - kMinImprove) {
                    sys.tighten_upper(t.var, imp_hi);
                    round_changed = true;
                }
                if (sys.lower(t.var) > sys.upper(t.var) + cross_tol) {
                    res.infeasible = true;
                    res.changed = true;
                    res.rounds = round + 1;
                    return res;
                }
            }
        }
        res.rounds = round + 1;
        if (!round_changed) break;
        res.changed = true;
    }
    return res;
}

} // namespace relucheck
