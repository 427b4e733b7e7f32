#include "doctest.h"

#include <cmath>

#include "sap/analytic.hpp"
#include "sap/sim.hpp"

using namespace sap;
using namespace sap::sim;

namespace {

SystemParams params(double lambda, double mu = 1, double delta = 2, double omega = 1) {
    return SystemParams{lambda, mu, delta, omega};
}

SimConfig quick(std::uint64_t seed = 42) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.warmup = 500;
    cfg.horizon = 6000;
    cfg.replications = 10;
    return cfg;
}

bool within_ci(double est, double ci, double truth) {
    return std::abs(est - truth) <= ci;
}

}  // namespace

TEST_CASE("config validation") {
    SimConfig bad = quick();
    bad.replications = 1;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
    bad = quick();
    bad.horizon = bad.warmup;
    CHECK_THROWS_AS(bad.validate(), InvalidParams);
}

TEST_CASE("always-on single server reproduces M/M/1") {
    const auto est = simulate(AlwaysOn{1}, params(0.5), quick());
    CHECK(within_ci(est.r_mean, est.r_ci_halfwidth, 2.0));
    CHECK(est.c_mean == doctest::Approx(1.0));  // cost is deterministic
    CHECK_THROWS_AS(simulate(AlwaysOn{1}, params(1.0), quick()), UnstableError);
}

TEST_CASE("hold-on simulation matches the closed form") {
    const SystemParams p = params(0.5);
    const auto est = simulate(HoldOn{1, false, 4}, p, quick());
    CHECK(within_ci(est.r_mean, 1.2 * est.r_ci_halfwidth, 3.0));
    CHECK(within_ci(est.c_mean, 1.2 * est.c_ci_halfwidth, 0.875));
}

TEST_CASE("reactive s=1 simulation matches the reduced expressions") {
    const auto est = simulate(ReactiveUnlimited{1}, params(0.5), quick());
    CHECK(within_ci(est.r_mean, 1.2 * est.r_ci_halfwidth, 3.0));
    CHECK(within_ci(est.c_mean, 1.2 * est.c_ci_halfwidth, 1.0));
}

TEST_CASE("deterministic hold-on timer") {
    const SystemParams p = params(0.6);
    const Metrics m = analytic::single_hold_on(p, HoldOn{1, true, 4});
    const auto est = simulate(HoldOn{1, true, 4}, p, quick());
    CHECK(within_ci(est.r_mean, 3 * est.r_ci_halfwidth / 1.96, m.r));
    CHECK(within_ci(est.c_mean, 3 * est.c_ci_halfwidth / 1.96, m.c));
}

TEST_CASE("proactive at a very large setup delay") {
    // no closed-form limit is asserted; the simulator is the oracle for
    // the slow-setup regime
    const SystemParams p = params(0.5, 1, 100);
    const Metrics m = analytic::proactive_unlimited(p);
    SimConfig cfg;
    cfg.seed = 31;
    cfg.warmup = 5000;
    cfg.horizon = 60000;
    cfg.replications = 10;
    const auto est = simulate(ProactiveUnlimited{}, p, cfg);
    CHECK(within_ci(est.r_mean, 1.5 * est.r_ci_halfwidth, m.r));
    CHECK(within_ci(est.c_mean, 1.5 * est.c_ci_halfwidth, m.c));
}

TEST_CASE("identical seeds give bit-identical estimates") {
    const SystemParams p = params(0.7);
    const auto a = simulate(DualBothDynamic{}, p, quick(99));
    const auto b = simulate(DualBothDynamic{}, p, quick(99));
    CHECK(a.r_mean == b.r_mean);
    CHECK(a.c_mean == b.c_mean);
    CHECK(a.objective_mean == b.objective_mean);
    REQUIRE(a.reps.size() == b.reps.size());
    for (size_t i = 0; i < a.reps.size(); ++i) {
        CHECK(a.reps[i].r == b.reps[i].r);
        CHECK(a.reps[i].c == b.reps[i].c);
    }
    const auto c = simulate(DualBothDynamic{}, p, quick(100));
    CHECK(a.r_mean != c.r_mean);
}

TEST_CASE("Little's law holds inside each replication") {
    const auto est = simulate(HoldOn{2, false, 3}, params(0.6), quick(7));
    for (const auto& rep : est.reps) {
        const double little_r = rep.mean_n / rep.lambda_eff;
        CHECK(std::abs(little_r - rep.r) / rep.r < 0.01);
    }
}

TEST_CASE("confidence intervals cover the truth") {
    // 100 seeded runs of the hold-on case with known R and C; the 95%
    // interval should contain the truth in at least 90 of them.
    const SystemParams p = params(0.5);
    SimConfig cfg;
    cfg.warmup = 300;
    cfg.horizon = 3000;
    cfg.replications = 8;
    int cover_r = 0, cover_c = 0;
    for (int seed = 1; seed <= 100; ++seed) {
        cfg.seed = seed;
        const auto est = simulate(HoldOn{1, false, 4}, p, cfg);
        CHECK(est.r_ci_halfwidth > 0);
        CHECK(est.c_ci_halfwidth > 0);
        if (within_ci(est.r_mean, est.r_ci_halfwidth, 3.0)) ++cover_r;
        if (within_ci(est.c_mean, est.c_ci_halfwidth, 0.875)) ++cover_c;
    }
    CHECK(cover_r >= 90);
    CHECK(cover_c >= 90);
}

TEST_CASE("policy-table replay") {
    const SystemParams p = params(0.5);

    SUBCASE("forced always-on matches the M/M/1 baseline") {
        const smdp::SmdpCaps caps{60, 1, -1};
        const smdp::StateSpace space(caps);
        smdp::PolicyTable t{caps, std::vector<smdp::Action>(space.size(), smdp::Action::NC)};
        for (int i = 0; i < space.size(); ++i)
            if (space.state(i).m == 0 && space.state(i).a == 0)
                t.actions[i] = smdp::Action::IA;
        const auto est = simulate_policy_table(t, p, quick());
        const Metrics mm1 = analytic::mmk_baseline(p, 1);
        CHECK(within_ci(est.r_mean, 1.2 * est.r_ci_halfwidth, mm1.r));
        CHECK(within_ci(est.c_mean, 1.2 * est.c_ci_halfwidth, mm1.c));
    }
    SUBCASE("optimal table reproduces the solver's objective") {
        const auto solved = smdp::solve_optimal_auto(p, 1);
        const auto est = simulate_policy_table(solved.result.policy, p, quick(5));
        CHECK(within_ci(est.objective_mean, 1.2 * est.objective_ci_halfwidth,
                        solved.result.objective()));
    }
    SUBCASE("low-load optimal policy really deallocates") {
        const SystemParams low = params(0.1);
        const auto solved = smdp::solve_optimal_auto(low, 1);
        const auto est = simulate_policy_table(solved.result.policy, low, quick(6));
        CHECK(est.c_mean < low.mu);
        const Metrics m = smdp::stationary_metrics(solved.result.policy, low);
        CHECK(within_ci(est.c_mean, 1.3 * est.c_ci_halfwidth, m.c));
    }
}

TEST_CASE("two-site replay: local-only always-on decomposes into two M/M/1s") {
    routing::TwoSiteParams tp;
    tp.lambda1 = 0.4;
    tp.lambda2 = 0.4;
    tp.d_r = 3.0;
    tp.mu = 1;
    tp.delta = 2;
    tp.omega = 1;
    tp.servers1 = 1;
    tp.servers2 = 1;
    tp.cap_n = 60;
    const routing::TwoSiteModel model(tp);
    routing::TwoSitePolicyTable table{tp, {}};
    table.actions.resize(model.states().size());
    for (size_t i = 0; i < model.states().size(); ++i) {
        const auto& s = model.states()[i];
        routing::TwoSiteAction act{routing::Provisioning::NC, routing::Route::RL};
        const bool up1 = s.m1 + s.a1 == 0, up2 = s.m2 + s.a2 == 0;
        if (up1 && up2) act.prov = routing::Provisioning::IA1_IA2;
        else if (up1) act.prov = routing::Provisioning::IA1;
        else if (up2) act.prov = routing::Provisioning::IA2;
        table.actions[i] = act;
    }
    const auto est = simulate_two_site_table(table, tp, quick(11));
    const Metrics mm1 = analytic::mmk_baseline(tp.site_params(0.4), 1);
    // independent M/M/1s: omega (E[n1] + E[n2]) + 2 mu; nothing routes
    // remotely so d_r never enters
    const double expected = tp.omega * 2 * (0.4 * mm1.r) + 2 * tp.mu;
    CHECK(within_ci(est.objective_mean, 1.3 * est.objective_ci_halfwidth, expected));
    CHECK(within_ci(est.r_mean, 1.3 * est.r_ci_halfwidth, mm1.r));
}

TEST_CASE("two-site replay tracks the solved objective") {
    routing::TwoSiteParams tp;
    tp.lambda1 = 0.3;
    tp.lambda2 = 0.3;
    tp.d_r = 0.5;
    tp.mu = 1;
    tp.delta = 2;
    tp.omega = 1;
    tp.servers1 = 1;
    tp.servers2 = 1;
    tp.cap_n = 30;
    const auto sd = routing::solve_state_dependent(tp);
    const auto est = simulate_two_site_table(sd.policy, sd.policy.params, quick(13));
    CHECK(within_ci(est.objective_mean, 1.3 * est.objective_ci_halfwidth,
                    sd.objective()));
}
