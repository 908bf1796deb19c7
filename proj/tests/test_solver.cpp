#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace relucheck;

namespace {

// h = relu(x), y = h
std::shared_ptr<const Network> relu_net() {
    return std::make_shared<const Network>(
        std::vector<Layer>{{{{1.0}}, {0.0}, Activation::ReLU},
                           {{{1.0}}, {0.0}, Activation::Identity}},
        1);
}

// h2 = relu(relu(x) - 3), y = h2
std::shared_ptr<const Network> chain_net() {
    return std::make_shared<const Network>(
        std::vector<Layer>{{{{1.0}}, {0.0}, Activation::ReLU},
                           {{{1.0}}, {-3.0}, Activation::ReLU},
                           {{{1.0}}, {0.0}, Activation::Identity}},
        1);
}

EncodedQuery encode_over(std::shared_ptr<const Network> net, const Box& box,
                         const EncodeOptions& opt = {}) {
    EncodedQuery q;
    encode_network(net, box, 0, q, opt);
    return q;
}

// y >= threshold on output 0, with matching validation functional.
void require_output_at_least(EncodedQuery& q, double threshold) {
    VarId s = q.system.add_var(0.0, kInf);
    q.node_map.resize(q.system.var_count());
    q.system.add_equality({{q.output_vars[0][0], 1.0}, {s, -1.0}}, threshold);
    q.check.terms = {{0, 0, 1.0}};
    q.check.constant = -threshold;
    q.claim_threshold = threshold;
}

} // namespace

TEST_CASE("encode_network seeds phases from the box") {
    auto q1 = encode_over(relu_net(), Box({1.0}, {2.0}));
    REQUIRE(q1.relus.size() == 1);
    REQUIRE(q1.relus[0].phase == PhaseStatus::Active);

    auto q2 = encode_over(relu_net(), Box({-2.0}, {-1.0}));
    REQUIRE(q2.relus[0].phase == PhaseStatus::Inactive);

    auto q3 = encode_over(relu_net(), Box({-1.0}, {1.0}));
    REQUIRE(q3.relus[0].phase == PhaseStatus::Undetermined);
    REQUIRE(q3.undetermined_count() == 1);
}

TEST_CASE("encode_network wires the affine rows and node map") {
    auto q = encode_over(relu_net(), Box({-1.0}, {1.0}));
    REQUIRE(q.input_vars[0].size() == 1);
    REQUIRE(q.output_vars[0].size() == 1);
    REQUIRE(q.node_map[q.input_vars[0][0]].kind == NodeRef::Kind::Input);
    REQUIRE(q.node_map[q.output_vars[0][0]].kind == NodeRef::Kind::Output);
    REQUIRE(q.node_map[q.relus[0].pre].kind == NodeRef::Kind::Pre);
    REQUIRE(q.node_map[q.relus[0].post].kind == NodeRef::Kind::Post);
    const auto feas = check_feasible(q.system);
    REQUIRE(feas.has_value());
}

TEST_CASE("fix_phases commits a positive box and enables a split-free solve") {
    EncodeOptions raw;
    raw.seed_phases = false;
    auto q = encode_over(relu_net(), Box({0.5}, {2.0}), raw);
    REQUIRE(q.relus[0].phase == PhaseStatus::Undetermined);
    const FixResult fr = fix_phases(q);
    REQUIRE_FALSE(fr.infeasible);
    REQUIRE(fr.fixed == 1);
    REQUIRE(q.relus[0].phase == PhaseStatus::Active);

    auto q2 = encode_over(relu_net(), Box({0.5}, {2.0}), raw);
    require_output_at_least(q2, 3.0); // unreachable: y <= 2
    const Verdict v = solve(q2);
    REQUIRE(v.outcome == QueryOutcome::Unsat);
    REQUIRE(v.stats.splits == 0);
}

TEST_CASE("fix_phases derives the chained inactive phase") {
    // inner post <= 1 forces outer pre <= -2
    EncodeOptions raw;
    raw.seed_phases = false;
    auto q = encode_over(chain_net(), Box({0.0}, {1.0}), raw);
    REQUIRE(q.relus.size() == 2);
    const FixResult fr = fix_phases(q);
    REQUIRE_FALSE(fr.infeasible);
    REQUIRE(fr.fixed == 2);
    REQUIRE(q.relus[0].phase == PhaseStatus::Active);
    REQUIRE(q.relus[1].phase == PhaseStatus::Inactive);
    REQUIRE(q.system.upper(q.relus[1].pre) <= -2.0 + 1e-9);

    // cross-check by brute-force grid evaluation: outer relu never activates
    const auto net = chain_net();
    testsupport::for_each_grid_point(Box({0.0}, {1.0}), 1000,
                                     [&](const std::vector<double>& x) {
                                         REQUIRE(evaluate(*net, x)[0] == 0.0);
                                     });
}

TEST_CASE("fix_phases deduces nothing when every pre-activation spans zero") {
    EncodeOptions raw;
    raw.seed_phases = false;
    auto q = encode_over(relu_net(), Box({-1.0}, {1.0}), raw);
    const FixResult fr = fix_phases(q);
    REQUIRE_FALSE(fr.infeasible);
    REQUIRE(fr.fixed == 0);
}

TEST_CASE("solve: unreachable output bound is Unsat, matching both phase fixings") {
    auto base = encode_over(relu_net(), Box({-1.0}, {1.0}));
    require_output_at_least(base, 2.0); // post <= max(0, 1) = 1 < 2

    // oracle: brute-force over both phase fixings, each a pure LP
    for (PhaseStatus ph : {PhaseStatus::Active, PhaseStatus::Inactive}) {
        EncodedQuery fixed = base;
        set_phase(fixed, 0, ph);
        REQUIRE_FALSE(check_feasible(fixed.system).has_value());
    }
    const Verdict v = solve(base);
    REQUIRE(v.outcome == QueryOutcome::Unsat);
}

TEST_CASE("solve: pure affine contradiction needs no splits") {
    // y1 = x, y2 = -x over [0.5, 1.5]; require y2 >= y1
    auto net = std::make_shared<const Network>(
        std::vector<Layer>{{{{1.0}, {-1.0}}, {0.0, 0.0}, Activation::Identity}}, 1);
    EncodedQuery q = encode_over(net, Box({0.5}, {1.5}));
    VarId s = q.system.add_var(0.0, kInf);
    q.node_map.resize(q.system.var_count());
    q.system.add_equality(
        {{q.output_vars[0][1], 1.0}, {q.output_vars[0][0], -1.0}, {s, -1.0}}, 0.0);
    const Verdict v = solve(q);
    REQUIRE(v.outcome == QueryOutcome::Unsat);
    REQUIRE(v.stats.splits == 0);
}

TEST_CASE("solve agrees with exhaustive phase enumeration on random queries") {
    std::mt19937_64 rng(31337);
    int sat_seen = 0, unsat_seen = 0;
    for (int iter = 0; iter < 60; ++iter) {
        testsupport::NetConfig cfg;
        cfg.relus_min = 3;
        cfg.relus_max = iter % 10 == 0 ? 12 : 8; // a few full-width cases
        const auto net = testsupport::random_network(rng, cfg);
        std::uniform_real_distribution<double> c(-1.0, 1.0), w(0.05, 1.0);
        std::vector<double> lo(net->input_dim()), hi(net->input_dim());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = c(rng);
            hi[i] = lo[i] + w(rng);
        }
        const Box box(lo, hi);
        std::uniform_real_distribution<double> thr(-2.0, 2.0);
        const double threshold = thr(rng);

        EncodedQuery q = encode_over(net, box);
        require_output_at_least(q, threshold);

        EncodeOptions raw;
        raw.seed_bounds = false;
        raw.seed_phases = false;
        EncodedQuery oracle_q = encode_over(net, box, raw);
        require_output_at_least(oracle_q, threshold);

        const QueryOutcome expected = testsupport::enumerate_phases(oracle_q);
        const Verdict got = solve(q);
        INFO("iter " << iter);
        REQUIRE(got.outcome == expected);
        if (expected == QueryOutcome::Sat) ++sat_seen;
        else ++unsat_seen;

        // leaf bound: splits never exceed 2^n - 1
        const std::size_t n = net->relu_count();
        REQUIRE(got.stats.splits <= (std::uint64_t{1} << n) - 1);
    }
    REQUIRE(sat_seen > 5);
    REQUIRE(unsat_seen > 5);
}

TEST_CASE("disabling phase fixing never changes the verdict") {
    std::mt19937_64 rng(555);
    for (int iter = 0; iter < 40; ++iter) {
        testsupport::NetConfig cfg;
        cfg.relus_max = 8;
        const auto net = testsupport::random_network(rng, cfg);
        std::uniform_real_distribution<double> c(-1.0, 1.0);
        std::vector<double> lo(net->input_dim()), hi(net->input_dim());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = c(rng);
            hi[i] = lo[i] + 0.4;
        }
        const Box box(lo, hi);
        const double threshold = c(rng);

        EncodedQuery q = encode_over(net, box);
        require_output_at_least(q, threshold);
        EncodeOptions no_seed;
        no_seed.seed_phases = false;
        EncodedQuery q_off = encode_over(net, box, no_seed);
        require_output_at_least(q_off, threshold);

        SolveOptions fixing_off;
        fixing_off.phase_fixing = false;
        const Verdict with_fixing = solve(q);
        const Verdict without = solve(q_off, {}, fixing_off);
        REQUIRE(with_fixing.outcome == without.outcome);
    }
}

TEST_CASE("solve_disjunction aggregates") {
    const auto net = relu_net();
    auto unsat = [&] {
        EncodedQuery q = encode_over(net, Box({-1.0}, {1.0}));
        require_output_at_least(q, 2.0);
        return q;
    };
    auto sat = [&] {
        EncodedQuery q = encode_over(net, Box({-1.0}, {1.0}));
        require_output_at_least(q, 0.5);
        return q;
    };

    const auto all_unsat = solve_disjunction({unsat(), unsat()});
    REQUIRE(all_unsat.outcome == QueryOutcome::Unsat);

    const auto one_sat = solve_disjunction({unsat(), sat()});
    REQUIRE(one_sat.outcome == QueryOutcome::Sat);
    REQUIRE(one_sat.sat_index == 1);
    REQUIRE_FALSE(one_sat.sat_verdict.witness.empty());

    // a zero timeout forces Timeout before any LP; with no Sat it aggregates
    Budget zero;
    zero.timeout_seconds = 0.0;
    const auto agg = solve_disjunction({unsat(), unsat()}, zero);
    REQUIRE(agg.outcome == QueryOutcome::Timeout);
}

TEST_CASE("extract_counterexample validates an analytic witness") {
    auto net = std::make_shared<const Network>(
        std::vector<Layer>{{{{1.0}, {-1.0}}, {0.0, 0.0}, Activation::Identity}}, 1);
    EncodedQuery q = encode_over(net, Box({-1.0}, {1.0}));
    // y2 >= y1 + margin
    const double margin = 1e-6;
    VarId s = q.system.add_var(0.0, kInf);
    q.node_map.resize(q.system.var_count());
    q.system.add_equality(
        {{q.output_vars[0][1], 1.0}, {q.output_vars[0][0], -1.0}, {s, -1.0}}, margin);
    q.check.terms = {{0, 1, 1.0}, {0, 0, -1.0}};
    q.check.constant = -margin;
    q.claim_threshold = margin;

    const Verdict v = solve(q);
    REQUIRE(v.outcome == QueryOutcome::Sat);
    const Counterexample cex = extract_counterexample(q, v);
    REQUIRE(cex.validated);
    REQUIRE(cex.inputs[0][0] <= 0.0); // -x >= x + margin needs x <= -margin/2
    REQUIRE(-cex.inputs[0][0] >= cex.inputs[0][0] + margin - 1e-9);
}

TEST_CASE("phase-consistent witnesses always validate") {
    std::mt19937_64 rng(606);
    int validated = 0;
    for (int iter = 0; iter < 60; ++iter) {
        const auto net = testsupport::random_network(rng);
        std::uniform_real_distribution<double> c(-1.0, 1.0);
        std::vector<double> lo(net->input_dim()), hi(net->input_dim());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = c(rng);
            hi[i] = lo[i] + 0.6;
        }
        EncodedQuery q = encode_over(net, Box(lo, hi));
        require_output_at_least(q, c(rng));
        const Verdict v = solve(q);
        if (v.outcome != QueryOutcome::Sat) continue;
        const Counterexample cex = extract_counterexample(q, v);
        INFO("iter " << iter << " violation " << cex.violation);
        REQUIRE(cex.validated);
        ++validated;
    }
    REQUIRE(validated > 10);
}

TEST_CASE("a loose relu tolerance admits a spurious witness that fails validation") {
    // box forces x <= -0.5, so y = relu(x) is identically 0, yet the
    // unseeded relaxation can claim y >= 0.5
    EncodeOptions raw;
    raw.seed_bounds = false;
    raw.seed_phases = false;
    EncodedQuery q = encode_over(relu_net(), Box({-1.0}, {-0.5}), raw);
    require_output_at_least(q, 0.5);

    SolveOptions sloppy;
    sloppy.phase_fixing = false;
    sloppy.tol.relu = 10.0; // accept any relaxation witness
    const Verdict v = solve(q, {}, sloppy);
    REQUIRE(v.outcome == QueryOutcome::Sat);
    const Counterexample cex = extract_counterexample(q, v, sloppy.tol.validation);
    REQUIRE_FALSE(cex.validated);
    REQUIRE(cex.violation < -1e-6);
    REQUIRE(cex.outputs[0][0] == 0.0);    // true semantics
    REQUIRE(cex.lp_outputs[0][0] >= 0.5); // what the LP claimed
}

TEST_CASE("triangle relaxation adds cuts without changing verdicts") {
    // structural: an undetermined pair gains its upper-envelope row
    EncodeOptions tri;
    tri.triangle_relaxation = true;
    auto plain = encode_over(relu_net(), Box({-1.0}, {1.0}));
    auto cut = encode_over(relu_net(), Box({-1.0}, {1.0}), tri);
    REQUIRE(cut.system.equalities().size() == plain.system.equalities().size() + 1);
    // the cut excludes relaxation points above the envelope: pre=0, post=1
    // satisfies post >= max(0, pre) but not post <= (pre+1)/2
    {
        EncodedQuery probe = cut;
        probe.system.tighten_lower(probe.relus[0].pre, 0.0);
        probe.system.tighten_upper(probe.relus[0].pre, 0.0);
        probe.system.tighten_lower(probe.relus[0].post, 1.0);
        REQUIRE_FALSE(check_feasible(probe.system).has_value());
        EncodedQuery loose = plain;
        loose.system.tighten_lower(loose.relus[0].pre, 0.0);
        loose.system.tighten_upper(loose.relus[0].pre, 0.0);
        loose.system.tighten_lower(loose.relus[0].post, 1.0);
        REQUIRE(check_feasible(loose.system).has_value());
    }
    // paired runs: identical verdicts on random queries
    std::mt19937_64 rng(717);
    for (int iter = 0; iter < 50; ++iter) {
        testsupport::NetConfig cfg;
        cfg.relus_max = 8;
        const auto net = testsupport::random_network(rng, cfg);
        std::uniform_real_distribution<double> c(-1.0, 1.0);
        std::vector<double> lo(net->input_dim()), hi(net->input_dim());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            lo[i] = c(rng);
            hi[i] = lo[i] + 0.8;
        }
        const double threshold = c(rng);
        EncodedQuery a = encode_over(net, Box(lo, hi));
        require_output_at_least(a, threshold);
        EncodedQuery b = encode_over(net, Box(lo, hi), tri);
        require_output_at_least(b, threshold);
        INFO("iter " << iter);
        REQUIRE(solve(a).outcome == solve(b).outcome);
    }
}

TEST_CASE("cancellation flag stops the search") {
    std::atomic<bool> cancel{true};
    Budget b;
    b.cancel = &cancel;
    EncodedQuery q = encode_over(relu_net(), Box({-1.0}, {1.0}));
    require_output_at_least(q, 0.5);
    const Verdict v = solve(q, b);
    REQUIRE(v.outcome == QueryOutcome::Timeout);
}
