#pragma once

// Complete feasibility decisions for bounded-variable equality systems via a
// phase-1 simplex that minimizes total infeasibility over artificial
// variables. Deterministic: Dantzig pricing for a configurable number of
// pivots, then Bland's rule (which also guarantees termination).

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "relucheck/linear_system.hpp"

namespace relucheck {

struct SimplexOptions {
    int dantzig_pivots = 200;  // pivots priced by largest reduced cost
    int max_pivots = 200000;   // beyond this a SolverLimitError is thrown
    double feas_tol = 1e-9;    // phase-1 objective threshold for feasibility
    double pivot_tol = 1e-9;   // degeneracy / reduced-cost threshold
    double bound_clamp = 1e-8; // witness snapped onto bounds within this
};

// Engaged optional holds a witness assignment; nullopt means infeasible.
using FeasResult = std::optional<std::vector<double>>;

namespace detail {

class PhaseOneSimplex {
public:
    PhaseOneSimplex(const LinearSystem& sys, const SimplexOptions& opt)
        : sys_(sys), opt_(opt), n_(sys.var_count()) {}

    FeasResult run() {
        if (!preflight()) return std::nullopt;
        if (m_ > 0 && !iterate()) return std::nullopt;
        return extract();
    }

private:
    enum class State { Basic, AtLower, AtUpper, Free };

    // Copies bounds (collapsing sub-tolerance crossings onto a point),
    // filters vacuous rows, and sets up the artificial basis.
    bool preflight() {
        lo_.assign(sys_.var_count(), 0.0);
        hi_.assign(sys_.var_count(), 0.0);
        for (VarId v = 0; v < sys_.var_count(); ++v) {
            double lo = sys_.lower(v), hi = sys_.upper(v);
            if (lo > hi) {
                if (lo - hi > opt_.pivot_tol) return false; // empty range
                lo = hi = 0.5 * (lo + hi);
            }
            lo_[v] = lo;
            hi_[v] = hi;
        }
        std::vector<const Equality*> rows;
        for (const Equality& eq : sys_.equalities()) {
            if (eq.terms.empty()) {
                if (std::fabs(eq.rhs) > opt_.feas_tol) return false;
                continue; // vacuous
            }
            rows.push_back(&eq);
        }
        m_ = rows.size();
        total_ = n_ + m_;
        state_.assign(total_, State::AtLower);
        for (VarId v = 0; v < n_; ++v) {
            if (is_finite(lo_[v]))
                state_[v] = State::AtLower;
            else if (is_finite(hi_[v]))
                state_[v] = State::AtUpper;
            else
                state_[v] = State::Free;
        }
        lo_.resize(total_, 0.0);
        hi_.resize(total_, kInf);

        tableau_.assign(m_, std::vector<double>(total_, 0.0));
        beta_.assign(m_, 0.0);
        basis_.assign(m_, 0);
        for (std::size_t i = 0; i < m_; ++i) {
            const Equality& eq = *rows[i];
            double residual = eq.rhs;
            for (const LinearTerm& t : eq.terms) residual -= t.coeff * nonbasic_value(t.var);
            const double sigma = residual >= 0 ? 1.0 : -1.0;
            for (const LinearTerm& t : eq.terms) tableau_[i][t.var] = sigma * t.coeff;
            tableau_[i][n_ + i] = 1.0;
            beta_[i] = sigma * residual;
            basis_[i] = n_ + i;
            state_[n_ + i] = State::Basic;
        }
        return true;
    }

    double nonbasic_value(VarId v) const {
        switch (state_[v]) {
        case State::AtLower: return lo_[v];
        case State::AtUpper: return hi_[v];
        default: return 0.0;
        }
    }

    // Reduced cost of column j under the phase-1 objective (cost 1 on
    // artificials), recomputed from the tableau each iteration.
    double reduced_cost(std::size_t j) const {
        double d = j >= n_ ? 1.0 : 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) d -= tableau_[i][j];
        return d;
    }

    double objective() const {
        double z = 0.0;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= n_) z += beta_[i];
        return z;
    }

    bool iterate() {
        for (int pivots = 0;; ++pivots) {
            if (pivots > opt_.max_pivots)
                throw SolverLimitError("simplex exceeded pivot limit");
            const bool bland = pivots >= opt_.dantzig_pivots;

            std::size_t enter = total_;
            int dir = 0;
            double best = opt_.pivot_tol;
            for (std::size_t j = 0; j < total_; ++j) {
                if (state_[j] == State::Basic) continue;
                if (lo_[j] == hi_[j]) continue; // fixed, cannot move
                const double d = reduced_cost(j);
                int cand_dir = 0;
                if (state_[j] == State::AtLower && d < -opt_.pivot_tol) cand_dir = 1;
                else if (state_[j] == State::AtUpper && d > opt_.pivot_tol) cand_dir = -1;
                else if (state_[j] == State::Free && std::fabs(d) > opt_.pivot_tol)
                    cand_dir = d < 0 ? 1 : -1;
                if (cand_dir == 0) continue;
                if (bland) {
                    enter = j;
                    dir = cand_dir;
                    break;
                }
                if (std::fabs(d) > best) {
                    best = std::fabs(d);
                    enter = j;
                    dir = cand_dir;
                }
            }
            if (enter == total_) return objective() <= opt_.feas_tol;

            // Ratio test: smallest step at which a basic variable (or the
            // entering variable's own opposite bound) blocks.
            double t_rows = kInf;
            std::size_t leave_row = m_;
            bool leave_at_upper = false;
            for (std::size_t i = 0; i < m_; ++i) {
                const double coef = tableau_[i][enter];
                if (std::fabs(coef) <= opt_.pivot_tol) continue;
                const double delta = -dir * coef; // basic change per unit step
                const VarId vb = basis_[i];
                double t_i;
                bool at_upper;
                if (delta < 0 && is_finite(lo_[vb])) {
                    t_i = (beta_[i] - lo_[vb]) / (-delta);
                    at_upper = false;
                } else if (delta > 0 && is_finite(hi_[vb])) {
                    t_i = (hi_[vb] - beta_[i]) / delta;
                    at_upper = true;
                } else {
                    continue;
                }
                if (t_i < 0) t_i = 0; // degenerate overshoot
                if (t_i < t_rows - 1e-15 ||
                    (t_i <= t_rows + 1e-15 && leave_row < m_ && vb < basis_[leave_row])) {
                    t_rows = t_i;
                    leave_row = i;
                    leave_at_upper = at_upper;
                }
            }
            const double span = hi_[enter] - lo_[enter];
            const bool can_flip = is_finite(span);

            if (leave_row == m_ && !can_flip)
                throw SolverLimitError("unbounded phase-1 descent");

            if (can_flip && span < t_rows) {
                for (std::size_t i = 0; i < m_; ++i)
                    beta_[i] -= span * dir * tableau_[i][enter];
                state_[enter] =
                    state_[enter] == State::AtLower ? State::AtUpper : State::AtLower;
                continue;
            }

            const double t = t_rows;
            const double entering_value = nonbasic_value(enter) + dir * t;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == leave_row) continue;
                beta_[i] -= t * dir * tableau_[i][enter];
            }
            state_[basis_[leave_row]] = leave_at_upper ? State::AtUpper : State::AtLower;
            basis_[leave_row] = enter;
            state_[enter] = State::Basic;
            beta_[leave_row] = entering_value;

            std::vector<double>& prow = tableau_[leave_row];
            const double piv = prow[enter];
            for (double& v : prow) v /= piv;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == leave_row) continue;
                const double f = tableau_[i][enter];
                if (f == 0.0) continue;
                std::vector<double>& row = tableau_[i];
                for (std::size_t j = 0; j < total_; ++j) row[j] -= f * prow[j];
            }
        }
    }

    FeasResult extract() const {
        std::vector<double> x(n_);
        for (VarId v = 0; v < n_; ++v) x[v] = nonbasic_value(v);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] < n_) x[basis_[i]] = beta_[i];
        for (VarId v = 0; v < n_; ++v) {
            if (x[v] < lo_[v] && x[v] > lo_[v] - opt_.bound_clamp) x[v] = lo_[v];
            if (x[v] > hi_[v] && x[v] < hi_[v] + opt_.bound_clamp) x[v] = hi_[v];
        }
        return x;
    }

    const LinearSystem& sys_;
    const SimplexOptions& opt_;
    std::size_t n_;
    std::size_t m_ = 0;
    std::size_t total_ = 0;
    std::vector<double> lo_, hi_;
    std::vector<State> state_;
    std::vector<std::vector<double>> tableau_;
    std::vector<double> beta_;
    std::vector<VarId> basis_;
};

} // namespace detail

// Complete decision: a witness assignment, or nullopt when the system has no
// solution. Deterministic for identical inputs.
inline FeasResult check_feasible(const LinearSystem& sys, const SimplexOptions& opt = {}) {
    detail::PhaseOneSimplex solver(sys, opt);
    return solver.run();
}

} // namespace relucheck
