#pragma once

// Translates the robustness definitions into negated disjunctive queries:
// a property holds iff every disjunct is unsatisfiable, and any satisfying
// assignment decodes to a validated counterexample. Also hosts the norm
// constraint builders and the maximal-delta binary search.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relucheck/solver.hpp"

namespace relucheck {

enum class Norm { Linf, L1 };

enum class PropertyKind { LocalLabel, LocalConfidence, GlobalConfidence };

struct RobustnessSpec {
    PropertyKind kind = PropertyKind::LocalLabel;
    std::vector<double> x0; // Local* kinds
    Box domain;             // Global kind
    double delta = 0.0;
    double epsilon = 0.0; // *Confidence kinds
    Norm norm = Norm::Linf;
};

inline void validate_spec(const RobustnessSpec& spec, const Network& net) {
    if (spec.delta < 0 || !is_finite(spec.delta))
        throw InputError("delta must be non-negative and finite");
    if (spec.kind != PropertyKind::LocalLabel &&
        (spec.epsilon <= 0 || !is_finite(spec.epsilon)))
        throw InputError("epsilon must be positive");
    if (spec.kind == PropertyKind::GlobalConfidence) {
        if (spec.domain.dim() != net.input_dim())
            throw InputError("domain dimension does not match network input");
    } else if (spec.x0.size() != net.input_dim()) {
        throw InputError("x0 dimension does not match network input");
    }
}

// Restricts x_vars to the delta-ball around a fixed center. Linf becomes
// per-coordinate bounds; L1 adds t_i >= |x_i - c_i| and sum t_i <= delta,
// whose projection onto x is exactly the L1 ball.
inline void norm_constraint(EncodedQuery& q, const std::vector<VarId>& x_vars,
                            const std::vector<double>& center, double delta, Norm norm) {
    if (x_vars.size() != center.size())
        throw InputError("norm constraint dimension mismatch");
    for (std::size_t i = 0; i < x_vars.size(); ++i) {
        q.system.tighten_lower(x_vars[i], center[i] - delta);
        q.system.tighten_upper(x_vars[i], center[i] + delta);
    }
    if (norm == Norm::Linf) return;
    std::vector<LinearTerm> sum_row;
    for (std::size_t i = 0; i < x_vars.size(); ++i) {
        VarId t = q.system.add_var(0.0, delta);
        VarId s1 = q.system.add_var(0.0, kInf);
        VarId s2 = q.system.add_var(0.0, kInf);
        q.node_map.resize(q.system.var_count());
        q.system.add_equality({{t, 1.0}, {x_vars[i], -1.0}, {s1, -1.0}}, -center[i]);
        q.system.add_equality({{t, 1.0}, {x_vars[i], 1.0}, {s2, -1.0}}, center[i]);
        sum_row.push_back({t, 1.0});
    }
    VarId s = q.system.add_var(0.0, kInf);
    q.node_map.resize(q.system.var_count());
    sum_row.push_back({s, 1.0});
    q.system.add_equality(sum_row, delta);
}

// Bounds the distance between two variable vectors by delta, via auxiliary
// difference variables d_i = x1_i - x2_i.
inline void norm_constraint(EncodedQuery& q, const std::vector<VarId>& x1,
                            const std::vector<VarId>& x2, double delta, Norm norm) {
    if (x1.size() != x2.size()) throw InputError("norm constraint dimension mismatch");
    std::vector<VarId> diffs(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) {
        VarId d = q.system.add_var(-delta, delta);
        q.node_map.resize(q.system.var_count());
        q.system.add_equality({{d, 1.0}, {x1[i], -1.0}, {x2[i], 1.0}}, 0.0);
        diffs[i] = d;
    }
    if (norm == Norm::Linf) return;
    norm_constraint(q, diffs, std::vector<double>(diffs.size(), 0.0), delta, Norm::L1);
}

namespace detail {

// Adds "expr >= threshold" as expr - slack = threshold with slack >= 0, and
// records the matching concrete-validation functional.
inline void add_violation_constraint(EncodedQuery& q,
                                     const std::vector<ViolationCheck::Term>& terms,
                                     double threshold, double claim) {
    std::vector<LinearTerm> row;
    for (const ViolationCheck::Term& t : terms)
        row.push_back({q.output_vars[t.copy][t.label], t.coeff});
    VarId s = q.system.add_var(0.0, kInf);
    q.node_map.resize(q.system.var_count());
    row.push_back({s, -1.0});
    q.system.add_equality(row, threshold);
    q.check.terms = terms;
    q.check.constant = -threshold;
    q.claim_threshold = claim;
}

} // namespace detail

// Negation of delta-local label robustness: one disjunct per label l != l0,
// each asking whether some x in the ball gets confidence(l) >= confidence(l0)
// + margin. All Unsat certifies the property.
inline std::vector<EncodedQuery> encode_local_label(std::shared_ptr<const Network> net,
                                                    const std::vector<double>& x0,
                                                    double delta, Norm norm,
                                                    double margin = 1e-6,
                                                    const EncodeOptions& eopt = {}) {
    const std::optional<std::size_t> l0 = classify(*net, x0);
    if (!l0) throw InputError("x0 has no unique label; query rejected");
    const Box ball = Box::ball(x0, delta);
    std::vector<EncodedQuery> disjuncts;
    for (std::size_t l = 0; l < net->output_dim(); ++l) {
        if (l == *l0) continue;
        EncodedQuery q;
        encode_network(net, ball, 0, q, eopt);
        norm_constraint(q, q.input_vars[0], x0, delta, norm);
        detail::add_violation_constraint(
            q, {{0, l, 1.0}, {0, *l0, -1.0}}, margin, margin);
        q.name = "label " + net->labels()[l] + " overtakes label " + net->labels()[*l0];
        q.property_label = l;
        disjuncts.push_back(std::move(q));
    }
    return disjuncts;
}

// Negation of (delta,epsilon)-local confidence robustness: two disjuncts per
// label, one per side of |C(x,l) - C(x0,l)| >= epsilon.
inline std::vector<EncodedQuery> encode_local_confidence(std::shared_ptr<const Network> net,
                                                         const std::vector<double>& x0,
                                                         double delta, double epsilon,
                                                         Norm norm,
                                                         const EncodeOptions& eopt = {}) {
    const std::vector<double> base = evaluate(*net, x0);
    const Box ball = Box::ball(x0, delta);
    std::vector<EncodedQuery> disjuncts;
    for (std::size_t l = 0; l < net->output_dim(); ++l) {
        {
            EncodedQuery q;
            encode_network(net, ball, 0, q, eopt);
            norm_constraint(q, q.input_vars[0], x0, delta, norm);
            detail::add_violation_constraint(q, {{0, l, 1.0}}, base[l] + epsilon, epsilon);
            q.name = "confidence of label " + net->labels()[l] + " rises by epsilon";
            q.property_label = l;
            disjuncts.push_back(std::move(q));
        }
        {
            EncodedQuery q;
            encode_network(net, ball, 0, q, eopt);
            norm_constraint(q, q.input_vars[0], x0, delta, norm);
            detail::add_violation_constraint(q, {{0, l, -1.0}}, epsilon - base[l], epsilon);
            q.name = "confidence of label " + net->labels()[l] + " drops by epsilon";
            q.property_label = l;
            disjuncts.push_back(std::move(q));
        }
    }
    return disjuncts;
}

// Two-copy encoding with separate input boxes per copy (the partitioned
// sub-domain runs inflate the second copy's box).
inline std::vector<EncodedQuery> encode_global_boxes(std::shared_ptr<const Network> net,
                                                     const Box& box1, const Box& box2,
                                                     double delta, double epsilon, Norm norm,
                                                     const EncodeOptions& eopt = {}) {
    std::vector<EncodedQuery> disjuncts;
    for (std::size_t l = 0; l < net->output_dim(); ++l) {
        for (int side = 0; side < 2; ++side) {
            EncodedQuery q;
            encode_network(net, box1, 0, q, eopt);
            encode_network(net, box2, 1, q, eopt);
            norm_constraint(q, q.input_vars[0], q.input_vars[1], delta, norm);
            const double c1 = side == 0 ? 1.0 : -1.0;
            detail::add_violation_constraint(
                q, {{0, l, c1}, {1, l, -c1}}, epsilon, epsilon);
            q.name = "label " + net->labels()[l] + " confidence gap >= epsilon (copy " +
                     (side == 0 ? std::string("1 high") : std::string("2 high")) + ")";
            q.property_label = l;
            disjuncts.push_back(std::move(q));
        }
    }
    return disjuncts;
}

// Negation of (delta,epsilon)-global robustness over a box domain: two full
// network copies, inputs tied by the norm constraint, a disjunct per label
// and side. Doubles the variable and ReLU counts.
inline std::vector<EncodedQuery> encode_global(std::shared_ptr<const Network> net,
                                               const Box& domain, double delta,
                                               double epsilon, Norm norm,
                                               const EncodeOptions& eopt = {}) {
    return encode_global_boxes(net, domain, domain, delta, epsilon, norm, eopt);
}

inline std::vector<EncodedQuery> encode_property(std::shared_ptr<const Network> net,
                                                 const RobustnessSpec& spec,
                                                 double margin = 1e-6,
                                                 const EncodeOptions& eopt = {}) {
    validate_spec(spec, *net);
    switch (spec.kind) {
    case PropertyKind::LocalLabel:
        return encode_local_label(net, spec.x0, spec.delta, spec.norm, margin, eopt);
    case PropertyKind::LocalConfidence:
        return encode_local_confidence(net, spec.x0, spec.delta, spec.epsilon, spec.norm,
                                       eopt);
    case PropertyKind::GlobalConfidence:
        return encode_global(net, spec.domain, spec.delta, spec.epsilon, spec.norm, eopt);
    }
    throw InputError("unknown property kind");
}

struct ViolationReport {
    std::vector<std::vector<double>> points; // one input per network copy
    std::size_t label = 0;
    double gap = 0.0; // concrete confidence gap, >= claimed threshold - tol
    std::string disjunct;
};

struct PropertyVerdict {
    enum class Outcome { Robust, Violated, Timeout, ValidationFailure };
    Outcome outcome = Outcome::Timeout;
    std::optional<ViolationReport> violation;
    SearchStats stats;
    std::string diagnostic;
};

// Maps a Sat disjunct to Violated (after concrete re-validation) or to a
// ValidationFailure diagnostic; Unsat to Robust.
inline PropertyVerdict resolve_sat(const EncodedQuery& q, const Verdict& verdict,
                                   double validation_tol) {
    PropertyVerdict pv;
    pv.stats = verdict.stats;
    const Counterexample cex = extract_counterexample(q, verdict, validation_tol);
    if (!cex.validated) {
        pv.outcome = PropertyVerdict::Outcome::ValidationFailure;
        std::string diag = "witness failed concrete validation on '" + q.name +
                           "': functional value " + std::to_string(cex.violation) +
                           "; lp outputs vs true outputs:";
        for (std::size_t c = 0; c < cex.outputs.size(); ++c)
            for (std::size_t i = 0; i < cex.outputs[c].size(); ++i)
                diag += " [" + std::to_string(c) + "," + std::to_string(i) + "] " +
                        std::to_string(cex.lp_outputs[c][i]) + " vs " +
                        std::to_string(cex.outputs[c][i]);
        pv.diagnostic = std::move(diag);
        return pv;
    }
    pv.outcome = PropertyVerdict::Outcome::Violated;
    ViolationReport report;
    report.points = cex.inputs;
    report.label = q.property_label;
    report.gap = cex.violation + q.claim_threshold;
    report.disjunct = q.name;
    pv.violation = std::move(report);
    return pv;
}

// Sequential property check: encode, decide each disjunct, validate any
// witness. The parallel scheduler offers the same semantics across workers.
inline PropertyVerdict verify(std::shared_ptr<const Network> net, const RobustnessSpec& spec,
                              const Budget& budget = {}, const SolveOptions& options = {},
                              const EncodeOptions& eopt = {}) {
    const std::vector<EncodedQuery> disjuncts =
        encode_property(net, spec, options.tol.margin, eopt);
    const DisjunctionVerdict dv = solve_disjunction(disjuncts, budget, options);
    PropertyVerdict pv;
    pv.stats = dv.stats;
    switch (dv.outcome) {
    case QueryOutcome::Unsat:
        pv.outcome = PropertyVerdict::Outcome::Robust;
        return pv;
    case QueryOutcome::Timeout:
        pv.outcome = PropertyVerdict::Outcome::Timeout;
        return pv;
    case QueryOutcome::Sat: {
        PropertyVerdict resolved =
            resolve_sat(disjuncts[dv.sat_index], dv.sat_verdict, options.tol.validation);
        resolved.stats = dv.stats;
        return resolved;
    }
    }
    return pv;
}

struct MaxDeltaResult {
    double delta_star = 0.0;
    bool robust_at_star = false; // false when nothing >= precision was robust
    bool timeout_flagged = false; // some probe timed out (treated as non-robust)
    int probes = 0;
    SearchStats stats;
};

// Bisection for the largest delta at which the property holds, up to
// `precision`. Robustness is monotone non-increasing in delta, so standard
// bisection applies; a probe that times out is treated as non-robust and
// flagged so callers can rerun with a larger budget.
inline MaxDeltaResult max_delta_search(std::shared_ptr<const Network> net,
                                       const std::vector<double>& x0, PropertyKind kind,
                                       std::optional<double> epsilon, Norm norm,
                                       double precision, double delta_hi,
                                       const Budget& budget = {},
                                       const SolveOptions& options = {}) {
    if (kind == PropertyKind::GlobalConfidence)
        throw InputError("max-delta search is defined for local properties");
    if (kind == PropertyKind::LocalConfidence && !epsilon)
        throw InputError("max-delta search over confidence robustness needs epsilon");
    if (precision <= 0 || delta_hi <= 0)
        throw InputError("precision and delta_hi must be positive");

    MaxDeltaResult res;
    auto probe = [&](double delta) {
        RobustnessSpec spec;
        spec.kind = kind;
        spec.x0 = x0;
        spec.delta = delta;
        spec.epsilon = epsilon.value_or(0.0);
        spec.norm = norm;
        const PropertyVerdict pv = verify(net, spec, budget, options);
        ++res.probes;
        res.stats += pv.stats;
        if (pv.outcome == PropertyVerdict::Outcome::Timeout) res.timeout_flagged = true;
        return pv.outcome == PropertyVerdict::Outcome::Robust;
    };

    if (probe(delta_hi)) {
        res.delta_star = delta_hi;
        res.robust_at_star = true;
        return res;
    }
    double lo = 0.0, hi = delta_hi;
    bool lo_robust = false;
    while (hi - lo > precision) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            lo = mid;
            lo_robust = true;
        } else {
            hi = mid;
        }
    }
    res.delta_star = lo;
    res.robust_at_star = lo_robust;
    return res;
}

} // namespace relucheck
