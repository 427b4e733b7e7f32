#include "doctest.h"

#include <cmath>
#include <sstream>

#include "sap/analytic.hpp"
#include "sap/routing.hpp"
#include "sap/smdp.hpp"

using namespace sap;
using namespace sap::routing;

namespace {

TwoSiteParams two_sites(double l1, double l2, double d_r, int k1, int k2,
                        int cap_n = 40) {
    TwoSiteParams tp;
    tp.lambda1 = l1;
    tp.lambda2 = l2;
    tp.d_r = d_r;
    tp.mu = 1;
    tp.delta = 2;
    tp.omega = 1;
    tp.servers1 = k1;
    tp.servers2 = k2;
    tp.cap_n = cap_n;
    return tp;
}

}  // namespace

TEST_CASE("two-site transition listings") {
    const TwoSiteParams tp = two_sites(0.3, 0.2, 1.5, 1, 1);

    SUBCASE("NC+RL from the empty state") {
        const auto ts = two_site_transitions({0, 0, 0, 0, 0, 0},
                                             {Provisioning::NC, Route::RL}, tp);
        REQUIRE(ts.items.size() == 2);
        CHECK(ts.items[0].to == TwoSiteState{1, 0, 0, 0, 0, 0});
        CHECK(ts.items[0].rate == doctest::Approx(tp.lambda1));
        CHECK(ts.items[1].to == TwoSiteState{0, 0, 0, 1, 0, 0});
        CHECK(ts.items[1].rate == doctest::Approx(tp.lambda2));
        CHECK(ts.reward_rate == doctest::Approx(0.0));
    }
    SUBCASE("IA1+R12 routes the site-1 stream remotely") {
        const auto ts = two_site_transitions({0, 0, 0, 0, 0, 0},
                                             {Provisioning::IA1, Route::R12}, tp);
        double to_site2 = 0;
        for (const auto& t : ts.items)
            if (t.to == TwoSiteState{0, 0, 1, 1, 0, 0}) to_site2 += t.rate;
        CHECK(to_site2 == doctest::Approx(tp.lambda1 + tp.lambda2));
        CHECK(ts.reward_rate ==
              doctest::Approx(-(tp.omega * tp.lambda1 * tp.d_r + tp.mu)));
    }
    SUBCASE("R12 and RL rewards differ by exactly omega lambda1 d_r") {
        for (const TwoSiteState s :
             {TwoSiteState{2, 1, 0, 1, 1, 0}, {0, 1, 0, 0, 0, 1}, {3, 0, 1, 2, 1, 0}}) {
            const auto rl =
                two_site_transitions(s, {Provisioning::NC, Route::RL}, tp);
            const auto r12 =
                two_site_transitions(s, {Provisioning::NC, Route::R12}, tp);
            CHECK(rl.reward_rate - r12.reward_rate ==
                  doctest::Approx(tp.omega * tp.lambda1 * tp.d_r));
        }
    }
    SUBCASE("setup completions run at 1/delta per site") {
        const auto ts = two_site_transitions({1, 0, 1, 2, 1, 1},
                                             {Provisioning::NC, Route::RL}, tp);
        int setups = 0;
        for (const auto& t : ts.items)
            if (t.to == TwoSiteState{1, 1, 0, 2, 1, 1} ||
                t.to == TwoSiteState{1, 0, 1, 2, 2, 0}) {
                CHECK(t.rate == doctest::Approx(1.0 / tp.delta));
                ++setups;
            }
        CHECK(setups == 2);
    }
    SUBCASE("sub-action preconditions") {
        CHECK_THROWS_AS(two_site_transitions({0, 0, 1, 0, 0, 0},
                                             {Provisioning::IA1, Route::RL}, tp),
                        InvalidParams);
        CHECK_THROWS_AS(two_site_transitions({0, 1, 0, 0, 0, 0},
                                             {Provisioning::IA1_D2, Route::RL}, tp),
                        InvalidParams);
        CHECK_NOTHROW(two_site_transitions({0, 0, 0, 0, 1, 0},
                                           {Provisioning::IA1_D2, Route::RL}, tp));
    }
    SUBCASE("26 actions are available away from boundaries") {
        const TwoSiteParams wide = two_sites(0.3, 0.2, 1.0, 3, 3);
        const TwoSiteModel model(wide);
        // a1 = a2 = 1 with spare capacity and servers on both sites
        int feasible = 0;
        for (int i = 0; i < kNumTwoSiteActions; ++i)
            if (model.feasible({2, 1, 1, 2, 1, 1}, action_at(i))) ++feasible;
        // IA1/IA2/IA-combos need a_i = 0; CA needs a_i = 1, etc.
        CHECK(feasible == 2 * (1 /*CA1*/ + 1 /*CA2*/ + 1 /*CA12*/ + 1 /*NC*/));
        int total = 0;
        for (int p = 0; p < kNumProvisioning; ++p) total += 2;
        CHECK(total == 26);
    }
}

TEST_CASE("state-dependent reduction to a single site") {
    // no traffic and no servers at site 2, free transfers: the two-site
    // optimum must equal the single-site optimum at lambda1
    TwoSiteParams tp = two_sites(0.5, 0.0, 0.0, 1, 0, 30);
    const auto two = solve_state_dependent(tp);
    const auto one = smdp::solve_optimal_auto(tp.site_params(0.5), 1, 1);
    CHECK(two.objective() == doctest::Approx(one.result.objective()).epsilon(1e-8));
}

TEST_CASE("oblivious split search") {
    SUBCASE("no site-1 traffic makes the split irrelevant") {
        TwoSiteParams tp = two_sites(0.0, 0.4, 2.0, 1, 1);
        const auto res = oblivious_optimal(tp, 0.25);
        const auto site2 = eval_site(tp, 0.4, 1);
        CHECK(res.objective == doctest::Approx(site2.objective).epsilon(1e-10));
    }
    SUBCASE("a huge transfer delay forces local processing") {
        TwoSiteParams tp = two_sites(0.4, 0.3, 500.0, 1, 1);
        const auto res = oblivious_optimal(tp, 0.05);
        CHECK(res.fraction == doctest::Approx(0.0));
    }
    SUBCASE("cheap transfers consolidate light symmetric load at site 2") {
        // nearly all site-1 traffic moves over; a residual trickle is
        // served locally at almost zero cost, so the optimum sits just
        // below f = 1
        TwoSiteParams tp = two_sites(0.3, 0.3, 0.05, 1, 1);
        const auto res = oblivious_optimal(tp, 0.05);
        CHECK(res.fraction >= 0.9);
        const auto table = oblivious_split_table(tp, 0.05);
        CHECK(res.objective <=
              table.site_objectives.back() + tp.omega * tp.lambda1 * tp.d_r + 1e-12);
    }
    SUBCASE("granularity refinement never hurts") {
        TwoSiteParams tp = two_sites(0.8, 0.04, 0.5, 1, 1);
        const double coarse = oblivious_optimal(tp, 0.1).objective;
        const double fine = oblivious_optimal(tp, 0.05).objective;
        CHECK(fine <= coarse + 1e-12);
    }
    SUBCASE("relabeling symmetric sites leaves the optimum unchanged") {
        TwoSiteParams tp = two_sites(0.3, 0.3, 0.7, 2, 2);
        TwoSiteParams sw = tp;
        std::swap(sw.servers1, sw.servers2);
        CHECK(oblivious_optimal(tp, 0.1).objective ==
              doctest::Approx(oblivious_optimal(sw, 0.1).objective).epsilon(1e-9));
    }
}

TEST_CASE("baselines") {
    TwoSiteParams tp = two_sites(1.7, 0.04, 1.0, 2, 2);
    // perfectly balanced: both sites see (1.7 + 0.04)/2 = 0.87
    const double f = (tp.lambda1 - tp.lambda2) / (2 * tp.lambda1);
    CHECK(tp.lambda1 * (1 - f) == doctest::Approx(0.87));
    CHECK(tp.lambda2 + tp.lambda1 * f == doctest::Approx(0.87));
    CHECK_NOTHROW(baseline_routing(tp, BaselineMode::Balanced));

    // local-only is the f = 0 split
    const auto table = oblivious_split_table(tp, 0.5);
    const double local = baseline_routing(tp, BaselineMode::LocalOnly);
    CHECK(local == doctest::Approx(table.site_objectives[0]).epsilon(1e-10));

    // sending everything to an overloaded site 2 must fail
    TwoSiteParams over = two_sites(1.2, 0.04, 0.0, 2, 1);
    CHECK_THROWS_AS(baseline_routing(over, BaselineMode::AllToSite2), UnstableError);
}

TEST_CASE("ordering: state-dependent <= oblivious <= fixed baselines") {
    TwoSiteParams tp = two_sites(0.3, 0.3, 0.5, 1, 1, 30);
    const auto sd = solve_state_dependent(tp);
    const auto table = oblivious_split_table(tp, 0.02);
    const auto obl = pick_oblivious(table, tp);
    CHECK(sd.objective() <= obl.objective + 1e-8);
    for (BaselineMode mode :
         {BaselineMode::LocalOnly, BaselineMode::AllToSite2, BaselineMode::Balanced})
        CHECK(obl.objective <= baseline_routing(tp, mode) + 1e-8);
    // the state-dependent objective decomposes as omega Q + C1 + C2
    SystemParams op{tp.lambda1 + tp.lambda2, tp.mu, tp.delta, tp.omega};
    CHECK(objective(sd.metrics, op) == doctest::Approx(sd.objective()).epsilon(1e-8));
}

TEST_CASE("two-site policy table round-trip") {
    TwoSiteParams tp = two_sites(0.3, 0.2, 0.5, 1, 1, 12);
    const TwoSiteModel model(tp);
    TwoSitePolicyTable t{tp, {}};
    t.actions.assign(model.states().size(), {Provisioning::NC, Route::RL});
    std::stringstream ss;
    save_policy(ss, t);
    const TwoSitePolicyTable back = load_policy(ss);
    CHECK(back.actions.size() == t.actions.size());
    CHECK(back.params.lambda1 == doctest::Approx(tp.lambda1));
    CHECK(back.params.cap_n == tp.cap_n);
    CHECK(back.actions == t.actions);
}
