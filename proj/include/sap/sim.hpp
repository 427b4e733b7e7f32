#ifndef SAP_SIM_HPP
#define SAP_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sap/routing.hpp"
#include "sap/smdp.hpp"
#include "sap/types.hpp"

// Stochastic simulator used as the independent oracle for the closed
// forms and for replaying optimal policy tables. Poisson arrivals,
// exponential service and setup times; holding-on timers are Erlang
// stages or fixed deadlines. Estimation is by independent replications
// with warmup deletion; each replication runs on its own RNG substream
// (seed + jumps), so results are reproducible bit for bit.

namespace sap::sim {

inline constexpr const char* kRngName = "xoshiro256starstar";

struct SimConfig {
    std::uint64_t seed = 12345;
    double warmup = 1e4;
    double horizon = 1e5;  // measurement ends here; must exceed warmup
    int replications = 20;

    void validate() const;
};

// Per-replication outcomes, kept for CSV output and diagnostics.
struct RepStats {
    double r = 0;           // mean sojourn of requests completed after warmup
    double c = 0;           // time-average allocated service rate
    double objective = 0;
    double mean_n = 0;      // time-average number in system
    double lambda_eff = 0;  // completions per unit measured time
};

struct MetricsEstimate {
    double r_mean = 0, r_ci_halfwidth = 0;
    double c_mean = 0, c_ci_halfwidth = 0;
    double objective_mean = 0, objective_ci_halfwidth = 0;
    std::vector<RepStats> reps;
};

MetricsEstimate simulate(const PolicySpec& policy, const SystemParams& p,
                         const SimConfig& cfg);

// Replays a solved table: the action is applied on every state entry
// and arrivals are discarded while n sits at the cap, mirroring the
// truncated decision model.
MetricsEstimate simulate_policy_table(const smdp::PolicyTable& table,
                                      const SystemParams& p, const SimConfig& cfg);

// Two-site replay; the objective estimate is omega * Q + C1 + C2 with
// Q including responses in transit.
MetricsEstimate simulate_two_site_table(const routing::TwoSitePolicyTable& table,
                                        const routing::TwoSiteParams& tp,
                                        const SimConfig& cfg);

}  // namespace sap::sim

#endif
