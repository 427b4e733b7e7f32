#include "doctest.h"

#include <cmath>

#include "sap/analytic.hpp"
#include "sap/experiments.hpp"

using namespace sap;
using namespace sap::exp;

TEST_CASE("policy grammar") {
    CHECK(std::get<AlwaysOn>(parse_policy("mmk:servers=2", 1)).servers == 2);
    CHECK(std::get<AlwaysOn>(parse_policy("mmk", 1)).servers == 1);
    {
        const auto h = std::get<HoldOn>(parse_policy("holdon:T=4,k=3", 1));
        CHECK(h.t == doctest::Approx(4));
        CHECK(h.k == 3);
        CHECK(!h.deterministic);
    }
    CHECK(std::get<HoldOn>(parse_policy("holdon:T=4,det=1", 1)).deterministic);
    CHECK(std::get<Batching>(parse_policy("batching:b=5", 1)).b == 5);
    {
        const auto d = std::get<DualOneAlways>(parse_policy("dual-one:l=2,h=3", 1.5));
        CHECK(d.l == 2);
        CHECK(d.h == 3);
        CHECK(d.mu1 == doctest::Approx(1.5));   // defaults follow mu
        CHECK(d.mu2 == doctest::Approx(3.0));
    }
    {
        const auto s = std::get<StateDepRates>(parse_policy("statedep:c=2", 2.0));
        REQUIRE(s.rates.size() == 2);
        CHECK(s.rates[0] == doctest::Approx(2.0));
        CHECK(s.rates[1] == doctest::Approx(4.0));
    }
    {
        const auto s =
            std::get<StateDepRates>(parse_policy("statedep:rates=1;1.7;2.5,T=1", 1));
        REQUIRE(s.rates.size() == 3);
        CHECK(s.rates[1] == doctest::Approx(1.7));
        CHECK(s.t == doctest::Approx(1.0));
    }
    CHECK(std::get<ReactiveUnlimited>(parse_policy("reactive:s=4", 1)).s == 4);
    CHECK(std::holds_alternative<ProactiveUnlimited>(parse_policy("proactive", 1)));
    CHECK(std::holds_alternative<ServerPerRequest>(parse_policy("per-request", 1)));
    CHECK(std::holds_alternative<DualBothDynamic>(parse_policy("dual-both", 1)));
    CHECK_THROWS_AS(parse_policy("nonsense", 1), InvalidParams);
    CHECK_THROWS_AS(parse_policy("holdon:T", 1), InvalidParams);
}

TEST_CASE("key-value configs") {
    const auto kv = KeyValues::from_string(
        "# comment\n"
        "mu = 1\n"
        "delta= 4   # trailing comment\n"
        "policies = holdon:T=0 mmk\n"
        "d_r.list = 0, 0.5, 2\n");
    CHECK(kv.get_num("mu", 0) == doctest::Approx(1));
    CHECK(kv.get_num("delta", 0) == doctest::Approx(4));
    CHECK(kv.get_words("policies").size() == 2);
    const auto grid = kv.get_list("d_r.list", {});
    REQUIRE(grid.size() == 3);
    CHECK(grid[1] == doctest::Approx(0.5));
    CHECK(kv.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(KeyValues::from_string("just words\n"), InvalidParams);

    ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
    CHECK(cfg.delta == doctest::Approx(4));
    CHECK(cfg.policies.size() == 2);

    // overrides compose on top of a base config
    KeyValues over;
    over.set("step=0.5");
    over.set("delta=1");
    const ExperimentConfig merged = ExperimentConfig::from_kv(over, cfg);
    CHECK(merged.step == doctest::Approx(0.5));
    CHECK(merged.delta == doctest::Approx(1));
    CHECK(merged.policies.size() == 2);  // untouched
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    cfg.policies = {"mmk"};
    cfg.step = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg.step = 0.1;
    cfg.to = cfg.from - 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg.to = cfg.from + 1;
    cfg.axis = "sideways";
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
    cfg.axis = "lambda";
    CHECK_NOTHROW(cfg.validate());
    cfg.kind = "routing";
    cfg.d_r_grid.clear();
    CHECK_THROWS_AS(cfg.validate(), InvalidParams);
}

TEST_CASE("presets cover every figure") {
    for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name));
    CHECK(preset("fig5c").delta == doctest::Approx(2));
    CHECK(preset("fig6d").cap_total == 2);
    CHECK(preset("fig7a").cap_total == -1);
    CHECK(preset("fig8").axis == "omega");
    CHECK(preset("fig9c").kind == "routing");
    CHECK(preset("fig9d").lambda1 == doctest::Approx(1.7));
    CHECK_THROWS_AS(preset("fig99"), InvalidParams);
}

TEST_CASE("ratio sweep at the crossover ties T=0 with never-deallocate") {
    // omega lambda Delta (1 + lambda Delta) = mu - lambda at lambda = 0.25
    ExperimentConfig cfg;
    cfg.policies = {"holdon:T=0", "mmk"};
    cfg.cap_total = 1;
    cfg.from = cfg.to = 0.25;
    cfg.step = 1;
    const auto res = run_ratio_sweep(cfg);
    REQUIRE(res.rows.size() == 1);
    REQUIRE(res.rows[0].ratios.size() == 2);
    CHECK(res.rows[0].ratios[0] == doctest::Approx(res.rows[0].ratios[1]).epsilon(1e-9));
    CHECK(res.rows[0].ratios[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sweep marks unstable policies with nan and a flag") {
    ExperimentConfig cfg;
    cfg.policies = {"mmk", "dual-both"};
    cfg.cap_total = 2;
    cfg.from = cfg.to = 1.5;  // unstable for a single always-on server
    cfg.step = 1;
    const auto res = run_ratio_sweep(cfg);
    REQUIRE(res.rows.size() == 1);
    CHECK(std::isnan(res.rows[0].ratios[0]));
    CHECK(!std::isnan(res.rows[0].ratios[1]));
    REQUIRE(res.rows[0].unstable.size() == 1);
    CHECK(res.rows[0].unstable[0] == "mmk");
    CHECK(res.csv.find("nan") != std::string::npos);
}

TEST_CASE("csv headers are stable and numbers round-trip") {
    ExperimentConfig cfg;
    cfg.policies = {"holdon:T=4,k=1"};
    cfg.cap_total = 1;
    cfg.from = cfg.to = 1.0 / 3.0;
    cfg.step = 1;
    const auto res = run_ratio_sweep(cfg);
    CHECK(res.csv.rfind("lambda,opt_objective,ratio_holdon_T4_k1,unstable\n", 0) == 0);
    // the x column reparses to the exact double
    const auto line = res.csv.substr(res.csv.find('\n') + 1);
    const double x = std::stod(line.substr(0, line.find(',')));
    CHECK(x == 1.0 / 3.0);

    CHECK(fmt_full(0.1) == "0.10000000000000001");
    CHECK(std::stod(fmt_full(2.0 / 3.0)) == 2.0 / 3.0);
}
