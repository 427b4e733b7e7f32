#ifndef SAP_ROUTING_HPP
#define SAP_ROUTING_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sap/pi.hpp"
#include "sap/smdp.hpp"
#include "sap/types.hpp"

// Two server sites with local arrival streams; requests arriving at
// site 1 may be processed at site 2 at the price of a response
// transfer delay d_r. Provisioning uses the single-site decision model
// at each site with at most one allocation in progress per site. The
// combined objective is omega * Q + C1 + C2, with Q counting requests
// at either site plus responses in transit.

namespace sap::routing {

struct TwoSiteParams {
    double lambda1 = 0;  // local arrival rate at site 1 (>= 0)
    double lambda2 = 0;  // local arrival rate at site 2 (>= 0)
    double d_r = 0;      // mean response transfer time for remote processing
    double mu = 1;
    double delta = 1;
    double omega = 1;
    int servers1 = 1;    // per-site cap on m + a
    int servers2 = 1;
    int cap_n = 60;      // joint cap on n1 + n2 (adaptively doubled)

    void validate() const;
    SystemParams site_params(double lambda_site) const {
        return SystemParams{lambda_site, mu, delta, omega};
    }
};

struct TwoSiteState {
    int n1 = 0, m1 = 0, a1 = 0;
    int n2 = 0, m2 = 0, a2 = 0;
    bool operator==(const TwoSiteState&) const = default;
};

enum class Provisioning : uint8_t {
    IA1 = 0, IA2, IA1_IA2, CA1, CA2, CA1_CA2, D1, D2,
    IA1_CA2, IA2_CA1, IA1_D2, IA2_D1, NC
};
constexpr int kNumProvisioning = 13;

enum class Route : uint8_t { RL = 0, R12 = 1 };

struct TwoSiteAction {
    Provisioning prov = Provisioning::NC;
    Route route = Route::RL;
    bool operator==(const TwoSiteAction&) const = default;
};
constexpr int kNumTwoSiteActions = kNumProvisioning * 2;

std::string to_string(Provisioning p);
std::string to_string(Route r);
std::optional<Provisioning> provisioning_from_string(const std::string& s);

inline int action_index(TwoSiteAction a) {
    return static_cast<int>(a.prov) * 2 + static_cast<int>(a.route);
}
inline TwoSiteAction action_at(int idx) {
    return {static_cast<Provisioning>(idx / 2), static_cast<Route>(idx % 2)};
}

struct TwoSiteTransition {
    TwoSiteState to;
    double rate;
};

struct TwoSiteTransitionSet {
    std::vector<TwoSiteTransition> items;
    double reward_rate = 0;
};

// pi::DecisionProcess over the joint capped space. Sites without any
// allocatable server exclude the corresponding queue (and the routing
// choices that would feed it), which keeps every policy's chain
// unichain and makes the degenerate one-site case an exact reduction.
class TwoSiteModel : public pi::DecisionProcess {
public:
    explicit TwoSiteModel(const TwoSiteParams& tp);
    int num_states() const override { return static_cast<int>(states_.size()); }
    int num_actions() const override { return kNumTwoSiteActions; }
    void feasible_actions(int s, std::vector<int>& out) const override;
    void transitions(int s, int a, std::vector<pi::Transition>& out,
                     double& reward_rate) const override;
    int reference_state() const override { return ref_; }

    const TwoSiteParams& params() const { return tp_; }
    const std::vector<TwoSiteState>& states() const { return states_; }
    int index(const TwoSiteState& s) const;
    bool feasible(const TwoSiteState& s, TwoSiteAction a) const;
    TwoSiteTransitionSet transition_set(const TwoSiteState& s, TwoSiteAction a) const;
    std::vector<int> initial_policy() const;

private:
    TwoSiteParams tp_;
    std::vector<TwoSiteState> states_;
    std::vector<int> lookup_;
    std::vector<int> code1_, code2_;  // (m, a) -> per-site compact code
    int ma1_count_ = 0, ma2_count_ = 0;
    int ref_ = 0;
};

// Transition/reward listing for one (state, action); throws on an
// infeasible action.
TwoSiteTransitionSet two_site_transitions(const TwoSiteState& s, TwoSiteAction a,
                                          const TwoSiteParams& tp);

struct TwoSitePolicyTable {
    TwoSiteParams params;
    std::vector<TwoSiteAction> actions;  // by TwoSiteModel state index
};

struct TwoSiteSolveResult {
    TwoSitePolicyTable policy;
    double avg_reward = 0;
    int iterations = 0;
    std::vector<double> objective_history;
    Metrics metrics;  // q = E[n1+n2] + remote-rate * d_r, c = C1 + C2
    double c1 = 0, c2 = 0;
    double remote_fraction = 0;  // share of site-1 arrivals routed remotely
    double objective() const { return -avg_reward; }
};

// Policy iteration over the 26-action space, with the joint n-cap
// doubled (warm-started) until the objective is stable to rel_tol.
TwoSiteSolveResult solve_state_dependent(const TwoSiteParams& tp,
                                         const pi::Options& opts = {},
                                         double rel_tol = 1e-6);

// ---------------------------------------------------------------------------
// State-oblivious splits

// Objective (and metrics) of one site run at rate lambda_site under its
// own optimal provisioning; infinite when the rate exceeds capacity.
struct SiteEval {
    double objective = 0;
    Metrics metrics;
    bool feasible = true;
};
SiteEval eval_site(const TwoSiteParams& tp, double lambda_site, int servers);

// Precomputed per-split site objectives; the d_r term is applied at
// selection time so one table serves a whole d_r sweep.
struct SplitTable {
    std::vector<double> fractions;
    std::vector<double> site_objectives;  // obj1 + obj2, +inf if infeasible
    std::vector<Metrics> site1, site2;
};
SplitTable oblivious_split_table(const TwoSiteParams& tp, double granularity = 0.01);

struct ObliviousResult {
    double fraction = 0;   // share of site-1 traffic sent to site 2
    double objective = 0;  // omega Q + C1 + C2
    Metrics site1, site2;
};
ObliviousResult pick_oblivious(const SplitTable& table, const TwoSiteParams& tp);
ObliviousResult oblivious_optimal(const TwoSiteParams& tp, double granularity = 0.01);

enum class BaselineMode { LocalOnly, AllToSite2, Balanced };
std::string to_string(BaselineMode m);

// Objective of a fixed split: f = 0, f = 1, or the load-balancing
// point; throws UnstableError when the split overloads a site.
double baseline_routing(const TwoSiteParams& tp, BaselineMode mode);

// ---------------------------------------------------------------------------
// Serialization: `n1 m1 a1 n2 m2 a2 provisioning routing` rows.

void save_policy(std::ostream& os, const TwoSitePolicyTable& policy);
TwoSitePolicyTable load_policy(std::istream& is);

}  // namespace sap::routing

#endif
