#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"

using namespace relucheck;

namespace {

double max_equality_residual(const LinearSystem& sys, const std::vector<double>& x) {
    double worst = 0;
    for (const Equality& eq : sys.equalities())
        worst = std::max(worst, std::fabs(sys.residual(eq, x)));
    return worst;
}

double max_bound_violation(const LinearSystem& sys, const std::vector<double>& x) {
    double worst = 0;
    for (VarId v = 0; v < sys.var_count(); ++v) {
        if (x[v] < sys.lower(v)) worst = std::max(worst, sys.lower(v) - x[v]);
        if (x[v] > sys.upper(v)) worst = std::max(worst, x[v] - sys.upper(v));
    }
    return worst;
}

} // namespace

TEST_CASE("add_var basics") {
    LinearSystem sys;
    REQUIRE(sys.add_var(0.0, 1.0) == 0);
    REQUIRE(sys.add_var(-kInf, kInf) == 1); // unbounded accepted
    REQUIRE_THROWS_AS(sys.add_var(2.0, 1.0), InputError);
    REQUIRE(sys.var_count() == 2);
}

TEST_CASE("add_equality basics and feasibility examples") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    const VarId y = sys.add_var(0.0, 1.0);
    sys.add_equality({{x, 1.0}, {y, 1.0}}, 1.0);
    const FeasResult r = check_feasible(sys);
    REQUIRE(r.has_value());
    REQUIRE(std::fabs((*r)[x] + (*r)[y] - 1.0) <= 1e-7);

    LinearSystem infeasible;
    const VarId z = infeasible.add_var(0.0, 1.0);
    infeasible.add_equality({{z, 1.0}}, 2.0);
    REQUIRE_FALSE(check_feasible(infeasible).has_value());

    LinearSystem vacuous;
    vacuous.add_var(0.0, 1.0);
    vacuous.add_equality({}, 0.0);
    REQUIRE(check_feasible(vacuous).has_value());

    REQUIRE_THROWS_AS(sys.add_equality({{99, 1.0}}, 0.0), InputError);
}

TEST_CASE("rational oracle sanity") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    const VarId y = sys.add_var(0.0, 1.0);
    sys.add_equality({{x, 1.0}, {y, 1.0}}, 1.0);
    REQUIRE(testsupport::rational_feasible(sys));
    LinearSystem bad;
    const VarId z = bad.add_var(0.0, 1.0);
    bad.add_equality({{z, 1.0}}, 2.0);
    REQUIRE_FALSE(testsupport::rational_feasible(bad));
    // unbounded variable carries the row
    LinearSystem free_sys;
    const VarId a = free_sys.add_var(-kInf, kInf);
    const VarId b = free_sys.add_var(3.0, 4.0);
    free_sys.add_equality({{a, 1.0}, {b, -7.0}}, 11.0);
    REQUIRE(testsupport::rational_feasible(free_sys));
}

TEST_CASE("check_feasible matches the exact-rational oracle on 500 random systems") {
    std::mt19937_64 rng(2024);
    int feasible_seen = 0, infeasible_seen = 0;
    for (int iter = 0; iter < 500; ++iter) {
        const LinearSystem sys = testsupport::random_system(rng);
        const bool expected = testsupport::rational_feasible(sys);
        const FeasResult got = check_feasible(sys);
        INFO("iteration " << iter << "\n" << sys.dump());
        REQUIRE(got.has_value() == expected);
        if (expected) {
            ++feasible_seen;
            REQUIRE(max_equality_residual(sys, *got) <= 1e-7);
            REQUIRE(max_bound_violation(sys, *got) <= 1e-8);
        } else {
            ++infeasible_seen;
        }
    }
    // the generator must exercise both verdicts
    REQUIRE(feasible_seen > 50);
    REQUIRE(infeasible_seen > 50);
}

TEST_CASE("witnesses are deterministic") {
    std::mt19937_64 rng(99);
    for (int iter = 0; iter < 50; ++iter) {
        const LinearSystem sys = testsupport::random_system(rng);
        const FeasResult a = check_feasible(sys);
        const FeasResult b = check_feasible(sys);
        REQUIRE(a.has_value() == b.has_value());
        if (a) REQUIRE(*a == *b); // bitwise identical
    }
}

TEST_CASE("tighten: substitution example") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 10.0);
    const VarId y = sys.add_var(0.0, 1.0);
    sys.add_equality({{x, 1.0}, {y, -1.0}}, 0.0);
    const TightenResult r = tighten(sys);
    REQUIRE_FALSE(r.infeasible);
    REQUIRE(sys.lower(x) == 0.0);
    REQUIRE(sys.upper(x) <= 1.0 + 1e-9);
}

TEST_CASE("tighten: disjoint ranges detected infeasible") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    const VarId y = sys.add_var(3.0, 4.0);
    sys.add_equality({{x, 1.0}, {y, -1.0}}, 0.0);
    REQUIRE(tighten(sys).infeasible);
}

TEST_CASE("tighten skips unbounded sides") {
    LinearSystem sys;
    const VarId x = sys.add_var(-kInf, kInf);
    const VarId y = sys.add_var(0.0, 2.0);
    sys.add_equality({{x, 1.0}, {y, -1.0}}, 0.0); // x = y
    tighten(sys);
    REQUIRE(sys.lower(x) >= -1e-9);
    REQUIRE(sys.upper(x) <= 2.0 + 1e-9);
}

TEST_CASE("tighten is sound: verdict-preserving and point-preserving") {
    std::mt19937_64 rng(777);
    for (int iter = 0; iter < 500; ++iter) {
        LinearSystem sys = testsupport::random_system(rng);
        const FeasResult before = check_feasible(sys);

        // Sample feasible points before tightening: the witness plus random
        // null-space perturbations.
        std::vector<std::vector<double>> points;
        if (before) {
            points.push_back(*before);
            const auto basis = testsupport::null_space(sys);
            for (int s = 0; s < 5; ++s)
                points.push_back(testsupport::perturb_feasible(rng, sys, *before, basis));
        }

        LinearSystem tightened = sys;
        const TightenResult tr = tighten(tightened, 10);
        if (tr.infeasible) {
            INFO(sys.dump());
            REQUIRE_FALSE(before.has_value());
            continue;
        }
        const FeasResult after = check_feasible(tightened);
        INFO(sys.dump());
        REQUIRE(after.has_value() == before.has_value());
        for (const auto& p : points) {
            // only assert for points that truly stayed feasible (perturbation
            // rounding can leave a point marginally outside)
            if (max_equality_residual(sys, p) > 1e-9 || max_bound_violation(sys, p) > 1e-9)
                continue;
            REQUIRE(max_bound_violation(tightened, p) <= 1e-7);
        }
    }
}

TEST_CASE("solver limit is reported distinctly") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    const VarId y = sys.add_var(0.0, 1.0);
    sys.add_equality({{x, 1.0}, {y, 1.0}}, 1.0);
    SimplexOptions opt;
    opt.max_pivots = 0;
    REQUIRE_THROWS_AS(check_feasible(sys, opt), SolverLimitError);
}

TEST_CASE("crossed bounds from tightening mutators read as infeasible") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    sys.tighten_lower(x, 0.5);
    sys.tighten_upper(x, 0.2);
    REQUIRE_FALSE(check_feasible(sys).has_value());
}

TEST_CASE("debug dump lists one constraint per line") {
    LinearSystem sys;
    const VarId x = sys.add_var(0.0, 1.0);
    sys.add_equality({{x, 2.0}}, 1.0);
    const std::string d = sys.dump();
    REQUIRE(d.find("var x0 in [0, 1]") != std::string::npos);
    REQUIRE(d.find("eq: +2*x0 = 1") != std::string::npos);
}
