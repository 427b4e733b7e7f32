#ifndef SAP_SMDP_HPP
#define SAP_SMDP_HPP

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sap/pi.hpp"
#include "sap/types.hpp"

// Single-site server-allocation decision process. States are
// (n, m, a): requests in system, allocated servers on entry, and
// allocations in progress on entry. A decision is taken on every state
// entry (arrival, service completion, or setup completion); the
// transition rates out of a state reflect the post-action allocation
// variables. Average reward equals -(omega * E[n] + mu * E[m + a]).

namespace sap::smdp {

struct SmdpState {
    int n = 0;
    int m = 0;
    int a = 0;
    bool operator==(const SmdpState&) const = default;
};

// Fixed improvement order IA < CA < D < NC (used for tie-breaking).
enum class Action : uint8_t { IA = 0, CA = 1, D = 2, NC = 3 };
constexpr int kNumActions = 4;
std::string to_string(Action a);
std::optional<Action> action_from_string(const std::string& s);

struct SmdpCaps {
    int cap_n = 0;       // n <= cap_n; arrivals are zeroed at the cap
    int cap_total = 0;   // m + a <= min(cap_total, cap_n)
    int cap_a = -1;      // separate cap on a; -1 for none

    int total_limit() const { return cap_total < cap_n ? cap_total : cap_n; }
    int a_limit() const {
        const int t = total_limit();
        return (cap_a >= 0 && cap_a < t) ? cap_a : t;
    }
    void validate() const;
    bool operator==(const SmdpCaps&) const = default;
};

// Deterministically ordered enumeration of the capped state space with
// O(1) index lookup.
class StateSpace {
public:
    explicit StateSpace(const SmdpCaps& caps);
    const SmdpCaps& caps() const { return caps_; }
    int size() const { return static_cast<int>(states_.size()); }
    const SmdpState& state(int idx) const { return states_[idx]; }
    const std::vector<SmdpState>& states() const { return states_; }
    // -1 when (n, m, a) is outside the space
    int index(const SmdpState& s) const;

private:
    SmdpCaps caps_;
    std::vector<SmdpState> states_;
    std::vector<int> lookup_;
    int stride_m_ = 0, stride_n_ = 0;
};

StateSpace build_state_space(const SmdpCaps& caps);

// Action legality in a state, including the boundary restrictions that
// keep every post-action state with positive outflow.
bool action_feasible(const SmdpState& s, Action act, const SmdpCaps& caps);

struct Transition {
    SmdpState to;
    double rate;
};

struct TransitionSet {
    std::array<Transition, 3> items{};
    int count = 0;
    double reward_rate = 0;
};

// Rates and reward for a feasible action; zero-rate entries are omitted.
TransitionSet transitions(const SmdpState& s, Action act, const SystemParams& p,
                          const SmdpCaps& caps);

struct PolicyTable {
    SmdpCaps caps;
    std::vector<Action> actions;  // by StateSpace index
};

struct SolveResult {
    PolicyTable policy;
    double avg_reward = 0;             // == -(objective)
    std::vector<double> values;        // relative values, v[(0,0,0)] = 0
    int iterations = 0;
    std::vector<double> objective_history;
    double objective() const { return -avg_reward; }
};

// pi::DecisionProcess view of the capped model (used by the policy-
// iteration engine and by tests that drive the steps directly).
class SmdpModel : public pi::DecisionProcess {
public:
    SmdpModel(const SystemParams& p, const SmdpCaps& caps);
    int num_states() const override { return space_.size(); }
    int num_actions() const override { return kNumActions; }
    void feasible_actions(int s, std::vector<int>& out) const override;
    void transitions(int s, int a, std::vector<pi::Transition>& out,
                     double& reward_rate) const override;
    int reference_state() const override { return ref_; }
    const StateSpace& space() const { return space_; }
    const SystemParams& params() const { return params_; }
    // A load-matching starting policy whose chain is unichain.
    std::vector<int> initial_policy() const;

private:
    SystemParams params_;
    StateSpace space_;
    int ref_;
};

// Step 1: relative values and gain for a fixed policy.
std::pair<double, std::vector<double>> value_determination(
    const PolicyTable& policy, const SystemParams& p,
    const pi::Options& opts = {});

// Step 2: greedy sweep against the given values; keeps the current
// action on ties, otherwise takes the lowest action index.
PolicyTable policy_improvement(const std::vector<double>& values,
                               double avg_reward, const SystemParams& p,
                               const PolicyTable& current,
                               const pi::Options& opts = {});

SolveResult solve_optimal(const SystemParams& p, const SmdpCaps& caps,
                          const pi::Options& opts = {});

// Adaptive cap_n: starts at max(20, ceil(10/(1-rho))) and doubles until
// the objective moves by less than rel_tol. cap_total < 0 ties the
// server cap to cap_n (effectively unbounded).
struct AutoSolveResult {
    SolveResult result;
    SmdpCaps caps;
};
AutoSolveResult solve_optimal_auto(const SystemParams& p, int cap_total,
                                   int cap_a = -1, const pi::Options& opts = {},
                                   double rel_tol = 1e-6);

// R and C separately for a policy, via the stationary distribution of
// the induced chain: R = E[n]/lambda, C = mu * E[m + a] (post-action).
Metrics stationary_metrics(const PolicyTable& policy, const SystemParams& p);

// Line-oriented serialization: commented header with params and caps,
// then one `n m a action` row per state.
void save_policy(std::ostream& os, const PolicyTable& policy,
                 const SystemParams& p);
struct LoadedPolicy {
    PolicyTable table;
    SystemParams params;
};
LoadedPolicy load_policy(std::istream& is);

}  // namespace sap::smdp

#endif
