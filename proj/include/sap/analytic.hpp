#ifndef SAP_ANALYTIC_HPP
#define SAP_ANALYTIC_HPP

#include <string>
#include <utility>
#include <vector>

#include "sap/types.hpp"

// Closed-form evaluators for the simple allocation policies. Every
// function is a pure function of its inputs and returns exact (up to
// rounding) steady-state metrics; no truncation is involved. The
// *_state_probs diagnostics return a truncated stationary vector for
// inspection and testing.

namespace sap::analytic {

// Roots of x^2 - ((lambda + mu1 + 1/delta)/mu1) x + lambda/mu1 = 0.
// r1 is the geometric-tail ratio of the setup-in-progress states;
// 0 < r1 < min(lambda/mu1, 1) < r2 whenever delta is finite.
struct CharRoots {
    double r1;
    double r2;
};

CharRoots char_roots(double lambda, double mu1, double delta);

struct StateProb {
    std::string label;
    double p;
};
using StateProbVector = std::vector<StateProb>;

// M/M/k with all servers permanently allocated (Erlang delay).
Metrics mmk_baseline(const SystemParams& p, int servers);

Metrics single_hold_on(const SystemParams& p, const HoldOn& pol);

Metrics single_batching(const SystemParams& p, int b);

// Best single-server objective over {never deallocate} U {deallocate
// when empty, reallocate after b arrivals}, with the minimizing policy.
struct SingleOptimal {
    double value;
    PolicySpec best;  // AlwaysOn{1} or Batching{b}
};
SingleOptimal single_optimal_objective(const SystemParams& p);

Metrics single_statedep_rates(const SystemParams& p, const StateDepRates& pol);

// General 1 <= l <= h path.
Metrics dual_one_always(const SystemParams& p, const DualOneAlways& pol);
// Specialized l == h closed form; requires pol.l == pol.h. Retained as
// an independent algebraic route for cross-checking the general path.
Metrics dual_one_always_lh(const SystemParams& p, const DualOneAlways& pol);

Metrics dual_both_dynamic(const SystemParams& p);

Metrics server_per_request(const SystemParams& p);

Metrics reactive_unlimited(const SystemParams& p, int s);

Metrics proactive_unlimited(const SystemParams& p);

// Dispatch over the analytic policies. Throws InvalidParams for
// SmdpTablePolicy, which has no closed form.
Metrics evaluate(const PolicySpec& spec, const SystemParams& p);

// ---------------------------------------------------------------------------
// Diagnostics: truncated stationary probabilities, labelled as in the
// corresponding state-transition diagram. Truncated tail mass < eps.
// Labels: "<n>I", "<n>H<j>", "<n>D", "<n>A" (single server),
// "<n>B", "<n>B+", "<n>E" (dual), "(<i>,<k>)" (unlimited).

StateProbVector hold_on_state_probs(const SystemParams& p, const HoldOn& pol,
                                    double eps = 1e-9);
StateProbVector dual_one_always_state_probs(const SystemParams& p,
                                            const DualOneAlways& pol,
                                            double eps = 1e-9);
StateProbVector dual_both_state_probs(const SystemParams& p, double eps = 1e-9);
StateProbVector reactive_state_probs(const SystemParams& p, int s,
                                     double eps = 1e-9);
StateProbVector proactive_state_probs(const SystemParams& p, double eps = 1e-9);

}  // namespace sap::analytic

#endif
