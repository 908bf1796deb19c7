#pragma once

// Encodes a network over an input box into a bounded linear system plus ReLU
// pre/post pairs, and decides satisfiability of a (possibly disjunctive)
// query by lazy phase-fixing and depth-first case-splitting.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "relucheck/linear_system.hpp"
#include "relucheck/network.hpp"
#include "relucheck/simplex.hpp"

namespace relucheck {

// A hidden node's pre/post pair. The system always carries the equality
// post - pre - slack = 0 with slack >= 0 and post >= 0, so an Undetermined
// pair contributes exactly the relaxation post >= max(0, pre). Fixing a
// phase only shrinks bounds: Active pins slack to 0 and pre >= 0, Inactive
// pins post to 0 and pre <= 0.
struct ReluPair {
    VarId pre;
    VarId post;
    VarId slack;
    PhaseStatus phase = PhaseStatus::Undetermined;
    std::size_t copy = 0;
    std::size_t layer = 0;
    std::size_t node = 0;
};

struct NodeRef {
    enum class Kind { Aux, Input, Pre, Post, Output };
    Kind kind = Kind::Aux;
    std::size_t copy = 0;
    std::size_t layer = 0;
    std::size_t node = 0;
};

// Linear functional over concrete network outputs whose non-negativity
// certifies the violation a Sat witness claims. Used to re-validate
// counterexamples against true network semantics.
struct ViolationCheck {
    struct Term {
        std::size_t copy;
        std::size_t label;
        double coeff;
    };
    std::vector<Term> terms;
    double constant = 0.0;
};

struct EncodedQuery {
    LinearSystem system;
    std::vector<ReluPair> relus;
    std::vector<std::vector<VarId>> input_vars;  // per network copy
    std::vector<std::vector<VarId>> output_vars; // per network copy
    std::vector<NodeRef> node_map;               // indexed by VarId
    std::vector<std::shared_ptr<const Network>> networks; // per copy
    ViolationCheck check;
    std::string name; // disjunct description, e.g. "label 2 overtakes label 0"
    std::size_t property_label = 0;
    double claim_threshold = 0.0; // margin/epsilon the violated constraint claims

    std::size_t undetermined_count() const {
        std::size_t n = 0;
        for (const ReluPair& p : relus)
            if (p.phase == PhaseStatus::Undetermined) ++n;
        return n;
    }
};

struct EncodeOptions {
    bool seed_bounds = true;          // node bounds from interval_evaluate
    bool seed_phases = true;          // commit phases implied by those bounds
    bool triangle_relaxation = false; // add the upper-envelope cut per pair
};

// Installs a phase as bound updates only; the pair's linking equality is
// already in the system.
inline void set_phase(EncodedQuery& q, std::size_t relu_index, PhaseStatus phase) {
    ReluPair& p = q.relus.at(relu_index);
    if (phase == PhaseStatus::Active) {
        q.system.tighten_upper(p.slack, 0.0);
        q.system.tighten_lower(p.pre, 0.0);
    } else if (phase == PhaseStatus::Inactive) {
        q.system.tighten_upper(p.post, 0.0);
        q.system.tighten_upper(p.pre, 0.0);
    } else {
        throw InputError("cannot set a pair back to Undetermined");
    }
    p.phase = phase;
}

// Appends one network copy over `box`: input vars bounded by the box, per
// hidden node a pre var tied to its layer's affine row plus a post/slack
// pair, and output vars tied to the last layer's rows. Bounds are seeded
// from interval_evaluate; phases implied by those bounds are committed when
// options.seed_phases is set.
inline void encode_network(std::shared_ptr<const Network> net, const Box& box,
                           std::size_t copy_id, EncodedQuery& q,
                           const EncodeOptions& options = {}) {
    if (box.dim() != net->input_dim())
        throw InputError("box dimension does not match network input");
    const IntervalResult bounds = interval_evaluate(*net, box);

    if (q.input_vars.size() <= copy_id) {
        q.input_vars.resize(copy_id + 1);
        q.output_vars.resize(copy_id + 1);
        q.networks.resize(copy_id + 1);
    }
    q.networks[copy_id] = net;

    auto new_var = [&](double lo, double hi, NodeRef ref) {
        VarId v = q.system.add_var(lo, hi);
        q.node_map.resize(q.system.var_count());
        q.node_map[v] = ref;
        return v;
    };

    std::vector<VarId> prev(net->input_dim());
    for (std::size_t i = 0; i < net->input_dim(); ++i)
        prev[i] = new_var(box.lower[i], box.upper[i],
                          {NodeRef::Kind::Input, copy_id, 0, i});
    q.input_vars[copy_id] = prev;

    for (std::size_t k = 0; k < net->layers().size(); ++k) {
        const Layer& layer = net->layers()[k];
        const LayerBounds& lb = bounds.layers[k];
        const bool is_output = layer.activation == Activation::Identity;
        const bool seeded = options.seed_bounds;
        std::vector<VarId> next(layer.out_size());
        for (std::size_t i = 0; i < layer.out_size(); ++i) {
            const auto kind = is_output ? NodeRef::Kind::Output : NodeRef::Kind::Pre;
            VarId pre = new_var(seeded ? lb.pre[i].lo : -kInf, seeded ? lb.pre[i].hi : kInf,
                                {kind, copy_id, k, i});
            std::vector<LinearTerm> row;
            row.reserve(prev.size() + 1);
            row.push_back({pre, 1.0});
            for (std::size_t j = 0; j < prev.size(); ++j)
                if (layer.weights[i][j] != 0.0) row.push_back({prev[j], -layer.weights[i][j]});
            q.system.add_equality(row, layer.biases[i]);
            if (is_output) {
                next[i] = pre;
                continue;
            }
            VarId post = new_var(seeded ? std::max(0.0, lb.post[i].lo) : 0.0,
                                 seeded ? lb.post[i].hi : kInf,
                                 {NodeRef::Kind::Post, copy_id, k, i});
            VarId slack = new_var(0.0, kInf, {});
            q.system.add_equality({{post, 1.0}, {pre, -1.0}, {slack, -1.0}}, 0.0);
            q.relus.push_back({pre, post, slack, PhaseStatus::Undetermined, copy_id, k, i});
            if (options.triangle_relaxation && seeded) {
                const double lo = lb.pre[i].lo, hi = lb.pre[i].hi;
                if (is_finite(lo) && is_finite(hi) && lo < 0 && hi > 0) {
                    // post <= hi*(pre-lo)/(hi-lo), valid for the root box and
                    // hence for every sub-branch
                    VarId s = q.system.add_var(0.0, kInf);
                    q.node_map.resize(q.system.var_count());
                    q.system.add_equality(
                        {{post, hi - lo}, {pre, -hi}, {s, 1.0}}, -hi * lo);
                }
            }
            if (options.seed_phases && seeded) {
                const PhaseStatus ph = phase_of(lb.pre[i]);
                if (ph != PhaseStatus::Undetermined)
                    set_phase(q, q.relus.size() - 1, ph);
            }
            next[i] = post;
        }
        if (is_output) q.output_vars[copy_id] = next;
        prev = std::move(next);
    }
}

struct FixResult {
    std::size_t fixed = 0;
    bool infeasible = false;
};

// Alternates bound tightening with phase deduction until neither makes
// progress. Never commits a phase the true ReLU semantics would exclude:
// phases come from phase_of on sound bounds only.
inline FixResult fix_phases(EncodedQuery& q, int tighten_rounds = 3,
                            double cross_tol = 1e-9) {
    FixResult res;
    for (;;) {
        const TightenResult tr = tighten(q.system, tighten_rounds, cross_tol);
        if (tr.infeasible) {
            res.infeasible = true;
            return res;
        }
        bool any = false;
        for (std::size_t i = 0; i < q.relus.size(); ++i) {
            ReluPair& p = q.relus[i];
            if (p.phase != PhaseStatus::Undetermined) continue;
            const PhaseStatus ph = phase_of(q.system.lower(p.pre), q.system.upper(p.pre));
            if (ph == PhaseStatus::Undetermined) continue;
            set_phase(q, i, ph);
            ++res.fixed;
            any = true;
        }
        if (!any) return res;
    }
}

enum class QueryOutcome { Unsat, Sat, Timeout };

struct SearchStats {
    std::uint64_t splits = 0;
    std::uint64_t lp_calls = 0;
    std::uint64_t phases_fixed = 0;
    double wall_seconds = 0.0;

    SearchStats& operator+=(const SearchStats& o) {
        splits += o.splits;
        lp_calls += o.lp_calls;
        phases_fixed += o.phases_fixed;
        wall_seconds += o.wall_seconds;
        return *this;
    }
};

struct Verdict {
    QueryOutcome outcome = QueryOutcome::Timeout;
    std::vector<double> witness;     // input values, copies concatenated
    std::vector<std::vector<double>> lp_outputs; // per copy, from the LP point
    SearchStats stats;
};

struct Budget {
    double timeout_seconds = std::numeric_limits<double>::infinity();
    std::uint64_t max_splits = std::numeric_limits<std::uint64_t>::max();
    std::atomic<bool>* cancel = nullptr; // cooperative cancellation
};

struct SolveOptions {
    bool phase_fixing = true; // lazy deduction; disabling never changes verdicts
    int tighten_rounds = 3;
    Tolerances tol;
    SimplexOptions simplex;
};

namespace detail {

class DfsSolver {
public:
    DfsSolver(const Budget& budget, const SolveOptions& opt)
        : budget_(budget), opt_(opt), start_(std::chrono::steady_clock::now()) {}

    Verdict run(EncodedQuery& q) {
        Verdict v;
        const QueryOutcome out = recurse(q);
        v.outcome = out;
        v.stats = stats_;
        v.stats.wall_seconds = elapsed();
        if (out == QueryOutcome::Sat) {
            for (const auto& vars : q.input_vars)
                for (VarId id : vars) v.witness.push_back(sat_assignment_[id]);
            for (const auto& vars : q.output_vars) {
                std::vector<double> outs;
                for (VarId id : vars) outs.push_back(sat_assignment_[id]);
                v.lp_outputs.push_back(std::move(outs));
            }
        }
        return v;
    }

private:
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
    }

    bool out_of_budget() const {
        if (budget_.cancel && budget_.cancel->load(std::memory_order_relaxed)) return true;
        if (stats_.splits > budget_.max_splits) return true;
        return elapsed() > budget_.timeout_seconds;
    }

    bool relu_consistent(const EncodedQuery& q, const std::vector<double>& w) const {
        for (const ReluPair& p : q.relus) {
            if (p.phase != PhaseStatus::Undetermined) continue;
            if (std::fabs(w[p.post] - std::max(0.0, w[p.pre])) > opt_.tol.relu) return false;
        }
        return true;
    }

    // Largest ReLU violation; ties by widest pre interval, then lowest pre id.
    std::size_t pick_branch_pair(const EncodedQuery& q, const std::vector<double>& w) const {
        std::size_t best = q.relus.size();
        double best_violation = -1.0;
        double best_width = -1.0;
        for (std::size_t i = 0; i < q.relus.size(); ++i) {
            const ReluPair& p = q.relus[i];
            if (p.phase != PhaseStatus::Undetermined) continue;
            const double violation = std::fabs(w[p.post] - std::max(0.0, w[p.pre]));
            const double width = q.system.upper(p.pre) - q.system.lower(p.pre);
            if (violation > best_violation ||
                (violation == best_violation &&
                 (width > best_width ||
                  (width == best_width && best < q.relus.size() &&
                   p.pre < q.relus[best].pre)))) {
                best = i;
                best_violation = violation;
                best_width = width;
            }
        }
        return best;
    }

    QueryOutcome recurse(EncodedQuery& q) {
        if (out_of_budget()) return QueryOutcome::Timeout;

        if (opt_.phase_fixing) {
            const FixResult fr = fix_phases(q, opt_.tighten_rounds, opt_.simplex.pivot_tol);
            stats_.phases_fixed += fr.fixed;
            if (fr.infeasible) return QueryOutcome::Unsat;
        }

        ++stats_.lp_calls;
        const FeasResult feas = check_feasible(q.system, opt_.simplex);
        if (!feas) return QueryOutcome::Unsat;
        const std::vector<double>& w = *feas;

        if (relu_consistent(q, w)) {
            sat_assignment_ = w;
            return QueryOutcome::Sat;
        }

        const std::size_t pair = pick_branch_pair(q, w);
        ++stats_.splits;

        // Explore the phase consistent with the current witness first.
        const PhaseStatus first =
            w[q.relus[pair].pre] >= 0 ? PhaseStatus::Active : PhaseStatus::Inactive;
        const PhaseStatus second =
            first == PhaseStatus::Active ? PhaseStatus::Inactive : PhaseStatus::Active;
        for (PhaseStatus phase : {first, second}) {
            if (out_of_budget()) return QueryOutcome::Timeout;
            EncodedQuery child = q;
            set_phase(child, pair, phase);
            const QueryOutcome out = recurse(child);
            if (out != QueryOutcome::Unsat) return out;
        }
        return QueryOutcome::Unsat;
    }

    const Budget& budget_;
    const SolveOptions& opt_;
    std::chrono::steady_clock::time_point start_;
    SearchStats stats_;
    std::vector<double> sat_assignment_;
};

} // namespace detail

// Depth-first search over ReLU phases. Complete: Unsat is returned only when
// every branch is Unsat. The linear relaxation keeps Undetermined pairs as
// post >= max(0, pre); a relaxation witness that already satisfies the exact
// ReLU semantics ends the search. Timeouts are observed between LP calls; a
// single LP call is never interrupted.
inline Verdict solve(const EncodedQuery& q, const Budget& budget = {},
                     const SolveOptions& options = {}) {
    detail::DfsSolver solver(budget, options);
    EncodedQuery root = q;
    return solver.run(root);
}

struct DisjunctionVerdict {
    QueryOutcome outcome = QueryOutcome::Unsat;
    std::size_t sat_index = 0; // valid when outcome == Sat
    Verdict sat_verdict;
    SearchStats stats;
    bool any_timeout = false;
};

// Sat if any disjunct is Sat; Unsat iff all are Unsat; Timeout when a
// disjunct times out and none is Sat. Each disjunct gets the full budget.
inline DisjunctionVerdict solve_disjunction(const std::vector<EncodedQuery>& queries,
                                            const Budget& budget = {},
                                            const SolveOptions& options = {}) {
    if (queries.empty()) throw InputError("disjunction needs at least one disjunct");
    DisjunctionVerdict agg;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        Verdict v = solve(queries[i], budget, options);
        agg.stats += v.stats;
        if (v.outcome == QueryOutcome::Sat) {
            agg.outcome = QueryOutcome::Sat;
            agg.sat_index = i;
            agg.sat_verdict = std::move(v);
            return agg;
        }
        if (v.outcome == QueryOutcome::Timeout) agg.any_timeout = true;
    }
    agg.outcome = agg.any_timeout ? QueryOutcome::Timeout : QueryOutcome::Unsat;
    return agg;
}

struct Counterexample {
    std::vector<std::vector<double>> inputs;       // per copy
    std::vector<std::vector<double>> outputs;      // concrete evaluation
    std::vector<std::vector<double>> lp_outputs;   // what the LP claimed
    double violation = 0.0; // value of the check functional; >= -tol means real
    bool validated = false;
};

// Decodes the witness inputs per copy, re-evaluates the networks concretely
// and confirms the violated disjunct's constraint on true semantics. A failed
// confirmation is surfaced (never silently reported as a violation).
inline Counterexample extract_counterexample(const EncodedQuery& q, const Verdict& verdict,
                                             double validation_tol = 1e-6) {
    if (verdict.outcome != QueryOutcome::Sat)
        throw InputError("counterexample extraction requires a Sat verdict");
    Counterexample cex;
    std::size_t offset = 0;
    for (std::size_t c = 0; c < q.input_vars.size(); ++c) {
        const std::size_t dim = q.input_vars[c].size();
        std::vector<double> in(verdict.witness.begin() + offset,
                               verdict.witness.begin() + offset + dim);
        offset += dim;
        cex.outputs.push_back(evaluate(*q.networks[c], in));
        cex.inputs.push_back(std::move(in));
    }
    cex.lp_outputs = verdict.lp_outputs;
    double value = q.check.constant;
    for (const ViolationCheck::Term& t : q.check.terms)
        value += t.coeff * cex.outputs[t.copy][t.label];
    cex.violation = value;
    cex.validated = value >= -validation_tol;
    return cex;
}

} // namespace relucheck
