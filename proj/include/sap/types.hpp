#ifndef SAP_TYPES_HPP
#define SAP_TYPES_HPP

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sap {

// Invalid or out-of-range input. Inputs are rejected, never clamped.
struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The requested evaluation diverges (e.g. lambda >= mu for a capped
// policy). Kept distinct from InvalidParams: the parameters are legal,
// the model just has no steady state.
struct UnstableError : std::domain_error {
    using std::domain_error::domain_error;
};

// An iterative solve failed to reach its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The Markov chain induced by a policy has no unique stationary
// distribution (more than one closed recurrent class).
struct SingularChainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Arrival rate, per-server service rate, mean setup delay and the
// objective weight. All rates and times are dimensionless doubles;
// nothing assumes mu == 1.
struct SystemParams {
    double lambda = 0;  // request arrival rate, > 0
    double mu = 0;      // per-server service rate, > 0
    double delta = 0;   // mean server setup delay, >= 0
    double omega = 0;   // weight on the request-time term, >= 0

    void validate() const;
};

// Mean response time and cost rate of a policy. `q` is set only for
// two-site evaluations, where it is the mean number of requests in the
// system including responses in transit.
struct Metrics {
    double r = 0;
    double c = 0;
    std::optional<double> q;
};

// omega * lambda * R + C, or omega * Q + C when Q is present (Q already
// folds in the transfer-delay term).
double objective(const Metrics& m, const SystemParams& p);

// ---------------------------------------------------------------------------
// Policy descriptions

struct AlwaysOn {
    int servers = 1;
};

// Deallocate when idle after a holding-on delay with mean t: Erlang-k
// stages for integer k >= 1, or a fixed timer (deterministic = true,
// the k -> infinity limit).
struct HoldOn {
    int k = 1;
    bool deterministic = false;
    double t = 0;
};

// Deallocate when empty; allocation is triggered once b requests have
// accumulated.
struct Batching {
    int b = 1;
};

// Baseline resources (rate mu1) always allocated; extra resources
// (total rate mu2) requested at queue length h and released below l.
struct DualOneAlways {
    double mu1 = 0;
    double mu2 = 0;
    int l = 1;
    int h = 1;
};

// Two servers, each allocated exactly while it would be busy.
struct DualBothDynamic {};

// Single allocation unit whose service rate depends on queue length:
// rate mu_i with i requests (i < c), mu_c beyond. Cost is charged at
// the highest rate whenever allocated. Optional holding-on as HoldOn.
struct StateDepRates {
    std::vector<double> rates;  // mu_1..mu_c, nondecreasing
    int k = 1;
    bool deterministic = false;
    double t = 0;
};

// A fresh server per request, released on completion.
struct ServerPerRequest {};

// Allocation initiated per arrival, at most s setups in progress;
// servers and setups trimmed so active+pending <= requests.
struct ReactiveUnlimited {
    int s = 1;
};

// At least one server always allocated; a setup is kept in progress
// whenever all allocated servers are busy.
struct ProactiveUnlimited {};

namespace smdp {
struct PolicyTable;  // smdp.hpp
}

// Replay of an explicit state -> action table.
struct SmdpTablePolicy {
    std::shared_ptr<const smdp::PolicyTable> table;
};

using PolicySpec = std::variant<AlwaysOn, HoldOn, Batching, DualOneAlways,
                                DualBothDynamic, StateDepRates, ServerPerRequest,
                                ReactiveUnlimited, ProactiveUnlimited, SmdpTablePolicy>;

// Range checks for the policy parameters themselves (stability is
// checked by the evaluators, which know the policy's capacity).
void validate(const PolicySpec& spec);

std::string policy_name(const PolicySpec& spec);

}  // namespace sap

#endif
