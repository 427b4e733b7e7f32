#ifndef SAP_PI_HPP
#define SAP_PI_HPP

#include <utility>
#include <vector>

#include "sap/types.hpp"

// Average-reward policy iteration over a finite continuous-time decision
// process. Shared by the single-site and two-site models.

namespace sap::pi {

struct Transition {
    int to;
    double rate;
};

// A finite state space with per-state feasible actions; taking action a
// on entering state s yields exponential transition rates out of s and a
// reward accrual rate while in s.
class DecisionProcess {
public:
    virtual ~DecisionProcess() = default;
    virtual int num_states() const = 0;
    virtual int num_actions() const = 0;
    virtual void feasible_actions(int s, std::vector<int>& out) const = 0;
    virtual void transitions(int s, int a, std::vector<Transition>& out,
                             double& reward_rate) const = 0;
    // State pinned to relative value 0.
    virtual int reference_state() const = 0;
};

struct Options {
    int max_iters = 1000;
    double residual_tol = 1e-10;   // value-determination residual, relative
    double tie_tol_rel = 1e-9;     // improvement tie tolerance, relative
    // direct sparse factorization up to this many states, iterative beyond
    int direct_solve_limit = 50'000;
};

struct ValueSolution {
    double gain = 0;               // average reward rate
    std::vector<double> values;    // relative values, values[ref] == 0
};

struct Result {
    std::vector<int> policy;       // action index per state
    double gain = 0;
    std::vector<double> values;
    int iterations = 0;
    // -gain after each value determination (the minimized objective).
    std::vector<double> objective_history;
};

// Solve gain = r[s] + sum_s' q(s,s') (v[s'] - v[s]) with v[ref] = 0.
// Throws SingularChainError if the policy's chain is not unichain and
// ConvergenceError if the residual tolerance cannot be met.
ValueSolution value_determination(const DecisionProcess& dp,
                                  const std::vector<int>& policy,
                                  const Options& opts = {});

// One greedy improvement sweep; keeps the current action on ties.
// Returns the new policy and whether anything changed.
std::pair<std::vector<int>, bool> improve(const DecisionProcess& dp,
                                          const std::vector<int>& policy,
                                          const ValueSolution& sol,
                                          const Options& opts = {});

Result policy_iteration(const DecisionProcess& dp, std::vector<int> initial,
                        const Options& opts = {});

// Time-stationary distribution of the chain induced by a policy.
// Transient states get probability zero. Throws SingularChainError when
// more than one closed recurrent class exists.
std::vector<double> stationary_distribution(const DecisionProcess& dp,
                                            const std::vector<int>& policy);

}  // namespace sap::pi

#endif
