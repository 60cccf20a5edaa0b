#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "nsmpi/nsmpi.hpp"

using namespace nsmpi;

namespace {

TightInstanceSpec make_spec(int ell, int m, int iterations = 5, double gamma = 0.9,
                            double epsilon = 0.1) {
    TightInstanceSpec spec;
    spec.ell = ell;
    spec.m = m;
    spec.gamma = gamma;
    spec.epsilon = epsilon;
    spec.max_iterations = iterations;
    return spec;
}

}  // namespace

TEST_CASE("chain construction matches the instance description", "[tight]") {
    TightInstanceSpec spec = make_spec(2, 1, 4);
    const int n = tight_resolved_num_states(spec);
    REQUIRE(n == tight_min_num_states(2, 1, 4));
    REQUIRE(n == 4 + (4 * 1 + 1) * 2 + 2);
    FiniteMdp mdp = build_tight_mdp(spec);
    REQUIRE(mdp.num_states() == n);
    REQUIRE(mdp.num_actions() == 2);

    // Position 1 is absorbing with reward 0 under both actions.
    for (int a : {0, 1}) {
        REQUIRE(mdp.reward(0, a) == 0.0);
        REQUIRE(mdp.transitions(0, a).size() == 1);
        REQUIRE(mdp.transitions(0, a)[0].next_state == 0);
    }
    for (int s = 1; s < n; ++s) {
        // Retreat: one step left, reward 0.
        REQUIRE(mdp.reward(s, 1) == 0.0);
        REQUIRE(mdp.transitions(s, 1)[0].next_state == s - 1);
        // Advance: ell-1 steps right, clipped to a self-loop at the boundary.
        const int target = mdp.transitions(s, 0)[0].next_state;
        REQUIRE(target == (s + spec.ell - 1 < n ? s + spec.ell - 1 : s));
    }

    // ell=3: advancing from position 5 lands at position 7.
    FiniteMdp wide = build_tight_mdp(make_spec(3, 1, 4));
    REQUIRE(wide.transitions(4, 0)[0].next_state == 6);
}

TEST_CASE("advance rewards follow the discounted recurrence", "[tight]") {
    TightInstanceSpec spec = make_spec(1, 2, 6);
    FiniteMdp mdp = build_tight_mdp(spec);
    const double g = spec.gamma;
    const double eps = spec.epsilon;

    // r_1 = 0 and r_3 = -0.342 at gamma = 0.9, eps = 0.1.
    REQUIRE(tight_advance_reward(1, g, eps) == 0.0);
    REQUIRE(tight_advance_reward(3, g, eps) == Catch::Approx(-0.342).margin(1e-15));
    REQUIRE(mdp.reward(2, 0) == Catch::Approx(-0.342).margin(1e-15));

    // r_{i+1} = gamma r_i - 2 gamma eps.
    for (int i = 1; i < mdp.num_states(); ++i)
        REQUIRE(tight_advance_reward(i + 1, g, eps) ==
                Catch::Approx(g * tight_advance_reward(i, g, eps) - 2.0 * g * eps).margin(1e-12));
}

TEST_CASE("error schedule places -eps at position k and +eps at k+ell", "[tight]") {
    TightInstanceSpec spec = make_spec(2, 0, 3);
    const int n = tight_resolved_num_states(spec);
    ValueFunction eps = tight_error_schedule(1, spec);
    REQUIRE(static_cast<int>(eps.size()) == n);
    for (int s = 0; s < n; ++s) {
        if (s == 0)
            REQUIRE(eps[s] == -0.1);
        else if (s == 2)
            REQUIRE(eps[s] == 0.1);
        else
            REQUIRE(eps[s] == 0.0);
    }

    // k=4 with ell=1: nonzeros sit at adjacent positions 4 and 5.
    TightInstanceSpec narrow = make_spec(1, 0, 5);
    ValueFunction eps4 = tight_error_schedule(4, narrow);
    for (int s = 0; s < static_cast<int>(eps4.size()); ++s)
        REQUIRE(eps4[s] == (s == 3 ? -0.1 : s == 4 ? 0.1 : 0.0));

    REQUIRE_THROWS_AS(tight_error_schedule(0, spec), std::out_of_range);
    REQUIRE_THROWS_AS(tight_error_schedule(n, spec), std::out_of_range);

    ErrorModel model = tight_error_model(spec);
    REQUIRE(model(2, n) == tight_error_schedule(2, spec));
    REQUIRE_THROWS_AS(model(1, n + 1), std::invalid_argument);
}

TEST_CASE("instance sizing is validated", "[tight]") {
    REQUIRE(tight_min_num_states(1, 0, 8) == 11);
    REQUIRE_THROWS_AS(tight_min_num_states(0, 0, 1), std::invalid_argument);

    TightInstanceSpec spec = make_spec(2, 3, 8);
    spec.num_states = 5;
    REQUIRE_THROWS_AS(tight_resolved_num_states(spec), std::invalid_argument);
    spec.num_states = tight_min_num_states(2, 3, 8) + 7;
    REQUIRE(tight_resolved_num_states(spec) == tight_min_num_states(2, 3, 8) + 7);
}

TEST_CASE("first-iteration closed form equals the injected error", "[tight]") {
    for (auto [ell, m] : std::vector<std::pair<int, int>>{{1, 0}, {2, 3}, {3, 1}}) {
        TightInstanceSpec spec = make_spec(ell, m, 4);
        const int n = tight_resolved_num_states(spec);
        ValueFunction eps = tight_error_schedule(1, spec);
        for (int s = 0; s < n; ++s)
            REQUIRE(tight_value_closed_form(1, s, spec) == Catch::Approx(eps[s]).margin(1e-15));
        REQUIRE(tight_policy_closed_form(1, 0) == 0);
        for (int s = 1; s < n; ++s) REQUIRE(tight_policy_closed_form(1, s) == 1);
    }
}

TEST_CASE("closed forms reproduce the simulated trajectory across the grid", "[tight]") {
    for (int ell : {1, 2, 3}) {
        for (int m : {0, 1, 2, 3}) {
            TightInstanceSpec spec = make_spec(ell, m, 5);
            VerificationReport report = verify_tight_trajectory(spec);
            INFO("ell=" << ell << " m=" << m << " max_dev=" << report.max_value_dev);
            REQUIRE(report.success());
            REQUIRE(report.values_match);
            REQUIRE(report.policies_match);
            REQUIRE(report.equality_within(1e-9));
            REQUIRE(report.rows.size() == 5);
            for (const VerificationRow& row : report.rows) {
                REQUIRE(row.policy_match);
                REQUIRE(row.max_value_dev <= 1e-9);
                REQUIRE(std::abs(row.loss - row.bound) <= 1e-9);
            }
        }
    }
}

TEST_CASE("closed-form trajectory direct spot checks", "[tight]") {
    // ell=2, m=3, k=3: compare state by state against an engine run.
    TightInstanceSpec spec = make_spec(2, 3, 3);
    const int n = tight_resolved_num_states(spec);
    FiniteMdp mdp = build_tight_mdp(spec);

    StationaryPolicy retreat(n, 1);
    retreat[0] = 0;
    NsmpiConfig config;
    config.m = MParameter::finite(spec.m);
    config.ell = spec.ell;
    config.iterations = 3;
    config.v0.assign(n, 0.0);
    config.initial_policies.assign(1, retreat);
    config.error_model = tight_error_model(spec);
    std::vector<IterationRecord> records = nsmpi_run(mdp, config);

    for (int s = 0; s < n; ++s)
        REQUIRE(records[2].value[s] ==
                Catch::Approx(tight_value_closed_form(3, s, spec)).margin(1e-10));

    // The loss of the periodic policy is realized at position k:
    // v_{pi_{k,ell}}(k) = r_k / (1 - gamma^ell), and no state loses more.
    for (const IterationRecord& rec : records) {
        const double expect = tight_advance_reward(rec.k, spec.gamma, spec.epsilon) /
                              (1.0 - std::pow(spec.gamma, spec.ell));
        REQUIRE(rec.periodic_value[rec.k - 1] == Catch::Approx(expect).margin(1e-10));
        double worst = 0.0;
        for (double v : rec.periodic_value) worst = std::max(worst, -v);
        REQUIRE(worst <= -rec.periodic_value[rec.k - 1] + 1e-12);
    }
}

TEST_CASE("zero error level degenerates to a lossless trajectory", "[tight]") {
    // With eps = 0 all rewards vanish, every policy is optimal, and the
    // policy comparison is vacuous; values, losses, and bounds are all zero.
    TightInstanceSpec spec = make_spec(2, 3, 4);
    spec.epsilon = 0.0;
    VerificationReport report = verify_tight_trajectory(spec);
    REQUIRE(report.success());
    REQUIRE(report.equality_within(1e-15));
    for (const VerificationRow& row : report.rows) {
        REQUIRE(row.loss == 0.0);
        REQUIRE(row.bound == 0.0);
        REQUIRE(row.max_value_dev == 0.0);
    }
}

TEST_CASE("closed-form accessors reject out-of-range queries", "[tight]") {
    TightInstanceSpec spec = make_spec(2, 1, 3);
    const int n = tight_resolved_num_states(spec);
    REQUIRE_THROWS_AS(tight_value_closed_form(0, 0, spec), std::out_of_range);
    REQUIRE_THROWS_AS(tight_value_closed_form(4, 0, spec), std::out_of_range);
    REQUIRE_THROWS_AS(tight_value_closed_form(1, n, spec), std::out_of_range);
    REQUIRE_THROWS_AS(tight_policy_closed_form(0, 0), std::invalid_argument);
}

TEST_CASE("exact periodic evaluation on the chain still meets the bound exactly", "[tight]") {
    // m = inf: the update equals the periodic value plus the injected error;
    // the measured loss must still match the bound at every iteration.
    TightInstanceSpec sizing = make_spec(2, 1, 6);
    const int n = tight_resolved_num_states(sizing);
    FiniteMdp mdp = build_tight_mdp(sizing);

    StationaryPolicy retreat(n, 1);
    retreat[0] = 0;
    NsmpiConfig config;
    config.m = MParameter::infinite();
    config.ell = sizing.ell;
    config.iterations = 6;
    config.v0.assign(n, 0.0);
    config.initial_policies.assign(1, retreat);
    config.error_model = tight_error_model(sizing);
    ValueFunction v_star(n, 0.0);
    std::vector<IterationRecord> records = nsmpi_run(mdp, config, &v_star);

    BoundInputs inputs;
    inputs.gamma = sizing.gamma;
    inputs.ell = sizing.ell;
    inputs.epsilon = sizing.epsilon;
    inputs.initial_gap = 0.0;
    for (const BoundCheckRow& row : check_bound_satisfaction(records, inputs))
        REQUIRE(std::abs(row.slack) <= 1e-9);
}
