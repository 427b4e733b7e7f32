#include "sap/smdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

namespace sap::smdp {

std::string to_string(Action a) {
    switch (a) {
        case Action::IA: return "IA";
        case Action::CA: return "CA";
        case Action::D: return "D";
        case Action::NC: return "NC";
    }
    return "?";
}

std::optional<Action> action_from_string(const std::string& s) {
    if (s == "IA") return Action::IA;
    if (s == "CA") return Action::CA;
    if (s == "D") return Action::D;
    if (s == "NC") return Action::NC;
    return std::nullopt;
}

void SmdpCaps::validate() const {
    if (cap_n < 1) throw InvalidParams("cap_n must be >= 1");
    if (cap_total < 1) throw InvalidParams("cap_total must be >= 1");
    if (cap_a == 0 || cap_a < -1) throw InvalidParams("cap_a must be >= 1 (or -1 for none)");
}

StateSpace::StateSpace(const SmdpCaps& caps) : caps_(caps) {
    caps.validate();
    const int t = caps.total_limit();
    const int al = caps.a_limit();
    stride_m_ = al + 1;
    stride_n_ = (t + 1) * stride_m_;
    lookup_.assign(static_cast<size_t>(caps.cap_n + 1) * stride_n_, -1);
    for (int n = 0; n <= caps.cap_n; ++n)
        for (int m = 0; m <= t; ++m)
            for (int a = 0; a <= std::min(al, t - m); ++a) {
                lookup_[static_cast<size_t>(n) * stride_n_ + m * stride_m_ + a] =
                    static_cast<int>(states_.size());
                states_.push_back({n, m, a});
            }
}

int StateSpace::index(const SmdpState& s) const {
    if (s.n < 0 || s.n > caps_.cap_n || s.m < 0 || s.a < 0) return -1;
    const int t = caps_.total_limit();
    if (s.m > t || s.a > caps_.a_limit() || s.m + s.a > t) return -1;
    return lookup_[static_cast<size_t>(s.n) * stride_n_ + s.m * stride_m_ + s.a];
}

StateSpace build_state_space(const SmdpCaps& caps) { return StateSpace(caps); }

bool action_feasible(const SmdpState& s, Action act, const SmdpCaps& caps) {
    const int t = caps.total_limit();
    const bool at_n_cap = s.n == caps.cap_n;
    switch (act) {
        case Action::IA:
            return s.m + s.a < t && s.a < caps.a_limit();
        case Action::CA:
            if (s.a <= 0) return false;
            // post-action outflow would be zero: arrivals zeroed, nothing
            // in service, no setups left
            return !(at_n_cap && s.a == 1 && s.m == 0);
        case Action::D:
            if (s.m <= 0 || s.a != 0) return false;
            return !(at_n_cap && s.m == 1);
        case Action::NC:
            return !(at_n_cap && s.m == 0 && s.a == 0);
    }
    return false;
}

TransitionSet transitions(const SmdpState& s, Action act, const SystemParams& p,
                          const SmdpCaps& caps) {
    if (!action_feasible(s, act, caps))
        throw InvalidParams("infeasible action " + to_string(act));
    // post-action allocation variables
    int m = s.m, a = s.a;
    switch (act) {
        case Action::IA: a += 1; break;
        case Action::CA: a -= 1; break;
        case Action::D: m -= 1; break;
        case Action::NC: break;
    }
    TransitionSet out;
    out.reward_rate = -(p.omega * s.n + (m + a) * p.mu);
    auto add = [&](SmdpState to, double rate) {
        if (rate > 0) out.items[out.count++] = {to, rate};
    };
    if (s.n < caps.cap_n) add({s.n + 1, m, a}, p.lambda);
    add({s.n - 1, m, a}, std::min(s.n, m) * p.mu);
    if (a > 0) add({s.n, m + 1, a - 1}, a / p.delta);
    return out;
}

SmdpModel::SmdpModel(const SystemParams& p, const SmdpCaps& caps)
    : params_(p), space_(caps) {
    params_.validate();
    if (!(p.delta > 0))
        throw InvalidParams("the decision model requires delta > 0");
    ref_ = space_.index({0, 0, 0});
}

void SmdpModel::feasible_actions(int s, std::vector<int>& out) const {
    out.clear();
    const SmdpState& st = space_.state(s);
    for (int a = 0; a < kNumActions; ++a)
        if (action_feasible(st, static_cast<Action>(a), space_.caps()))
            out.push_back(a);
}

void SmdpModel::transitions(int s, int a, std::vector<pi::Transition>& out,
                            double& reward_rate) const {
    const TransitionSet ts =
        smdp::transitions(space_.state(s), static_cast<Action>(a), params_, space_.caps());
    out.clear();
    for (int i = 0; i < ts.count; ++i) {
        const int j = space_.index(ts.items[i].to);
        out.push_back({j, ts.items[i].rate});
    }
    reward_rate = ts.reward_rate;
}

std::vector<int> SmdpModel::initial_policy() const {
    // Track the load: allocate toward n servers, drain idle ones. The
    // induced chain always reaches (0,0,0), so it is unichain.
    std::vector<int> pol(space_.size());
    const SmdpCaps& caps = space_.caps();
    for (int i = 0; i < space_.size(); ++i) {
        const SmdpState& s = space_.state(i);
        Action choice;
        if (s.n > s.m + s.a && action_feasible(s, Action::IA, caps))
            choice = Action::IA;
        else if (s.n < s.m && action_feasible(s, Action::D, caps))
            choice = Action::D;
        else if (s.n < s.m + s.a && action_feasible(s, Action::CA, caps))
            choice = Action::CA;
        else if (action_feasible(s, Action::NC, caps))
            choice = Action::NC;
        else if (action_feasible(s, Action::IA, caps))
            choice = Action::IA;
        else if (action_feasible(s, Action::CA, caps))
            choice = Action::CA;
        else
            choice = Action::D;
        pol[i] = static_cast<int>(choice);
    }
    return pol;
}

namespace {

std::vector<int> to_engine_policy(const PolicyTable& policy, const StateSpace& space) {
    if (policy.actions.size() != static_cast<size_t>(space.size()))
        throw InvalidParams("policy table does not match the state space");
    std::vector<int> pol(space.size());
    for (int i = 0; i < space.size(); ++i) {
        if (!action_feasible(space.state(i), policy.actions[i], space.caps()))
            throw InvalidParams("policy table has an infeasible action");
        pol[i] = static_cast<int>(policy.actions[i]);
    }
    return pol;
}

PolicyTable from_engine_policy(const std::vector<int>& pol, const SmdpCaps& caps) {
    PolicyTable table{caps, {}};
    table.actions.reserve(pol.size());
    for (int a : pol) table.actions.push_back(static_cast<Action>(a));
    return table;
}

}  // namespace

std::pair<double, std::vector<double>> value_determination(
    const PolicyTable& policy, const SystemParams& p, const pi::Options& opts) {
    SmdpModel model(p, policy.caps);
    auto sol = pi::value_determination(model, to_engine_policy(policy, model.space()), opts);
    return {sol.gain, std::move(sol.values)};
}

PolicyTable policy_improvement(const std::vector<double>& values,
                               double avg_reward, const SystemParams& p,
                               const PolicyTable& current, const pi::Options& opts) {
    SmdpModel model(p, current.caps);
    pi::ValueSolution sol{avg_reward, values};
    auto [next, changed] =
        pi::improve(model, to_engine_policy(current, model.space()), sol, opts);
    (void)changed;
    return from_engine_policy(next, current.caps);
}

SolveResult solve_optimal(const SystemParams& p, const SmdpCaps& caps,
                          const pi::Options& opts) {
    SmdpModel model(p, caps);
    pi::Result r = pi::policy_iteration(model, model.initial_policy(), opts);
    SolveResult out;
    out.policy = from_engine_policy(r.policy, caps);
    out.avg_reward = r.gain;
    out.values = std::move(r.values);
    out.iterations = r.iterations;
    out.objective_history = std::move(r.objective_history);
    return out;
}

AutoSolveResult solve_optimal_auto(const SystemParams& p, int cap_total,
                                   int cap_a, const pi::Options& opts,
                                   double rel_tol) {
    p.validate();
    int start;
    if (cap_total > 0) {
        const double rho = p.lambda / (p.mu * cap_total);
        if (rho >= 1)
            throw UnstableError("offered load exceeds the server cap");
        start = std::max(20, static_cast<int>(std::ceil(10.0 / (1.0 - rho))));
    } else {
        start = std::max(20, static_cast<int>(std::ceil(3.0 * p.lambda / p.mu)) + 20);
    }
    constexpr int kMaxCap = 1 << 16;
    SmdpCaps caps{start, cap_total > 0 ? cap_total : start, cap_a};
    SolveResult prev = solve_optimal(p, caps, opts);
    for (int cap = start * 2; cap <= kMaxCap; cap *= 2) {
        SmdpCaps caps2{cap, cap_total > 0 ? cap_total : cap, cap_a};
        SolveResult cur = solve_optimal(p, caps2, opts);
        const double change = std::abs(cur.objective() - prev.objective()) /
                              std::max(1.0, std::abs(cur.objective()));
        if (change < rel_tol) return {std::move(cur), caps2};
        prev = std::move(cur);
        caps = caps2;
    }
    throw ConvergenceError("cap doubling did not converge");
}

Metrics stationary_metrics(const PolicyTable& policy, const SystemParams& p) {
    SmdpModel model(p, policy.caps);
    const auto dist =
        pi::stationary_distribution(model, to_engine_policy(policy, model.space()));
    double mean_n = 0, mean_servers = 0;
    for (int i = 0; i < model.space().size(); ++i) {
        const SmdpState& s = model.space().state(i);
        int m = s.m, a = s.a;
        switch (policy.actions[i]) {
            case Action::IA: a += 1; break;
            case Action::CA: a -= 1; break;
            case Action::D: m -= 1; break;
            case Action::NC: break;
        }
        mean_n += dist[i] * s.n;
        mean_servers += dist[i] * (m + a);
    }
    return Metrics{mean_n / p.lambda, p.mu * mean_servers, {}};
}

void save_policy(std::ostream& os, const PolicyTable& policy, const SystemParams& p) {
    const StateSpace space(policy.caps);
    os.precision(17);  // parameters must survive a round-trip exactly
    os << "# policy-table v1\n";
    os << "# lambda " << p.lambda << "\n# mu " << p.mu << "\n# delta " << p.delta
       << "\n# omega " << p.omega << "\n";
    os << "# cap_n " << policy.caps.cap_n << "\n# cap_total " << policy.caps.cap_total
       << "\n# cap_a " << policy.caps.cap_a << "\n";
    os << "# columns: n m a action\n";
    for (int i = 0; i < space.size(); ++i) {
        const SmdpState& s = space.state(i);
        os << s.n << ' ' << s.m << ' ' << s.a << ' ' << to_string(policy.actions[i])
           << '\n';
    }
}

LoadedPolicy load_policy(std::istream& is) {
    SystemParams p{};
    SmdpCaps caps{};
    std::vector<std::tuple<SmdpState, Action>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "lambda") hs >> p.lambda;
            else if (key == "mu") hs >> p.mu;
            else if (key == "delta") hs >> p.delta;
            else if (key == "omega") hs >> p.omega;
            else if (key == "cap_n") hs >> caps.cap_n;
            else if (key == "cap_total") hs >> caps.cap_total;
            else if (key == "cap_a") hs >> caps.cap_a;
            continue;
        }
        std::istringstream ls(line);
        SmdpState s;
        std::string act;
        if (!(ls >> s.n >> s.m >> s.a >> act))
            throw InvalidParams("bad policy row: " + line);
        const auto a = action_from_string(act);
        if (!a) throw InvalidParams("unknown action: " + act);
        rows.emplace_back(s, *a);
    }
    const StateSpace space(caps);
    PolicyTable table{caps, std::vector<Action>(space.size(), Action::NC)};
    std::vector<bool> seen(space.size(), false);
    for (const auto& [s, a] : rows) {
        const int idx = space.index(s);
        if (idx < 0) throw InvalidParams("policy row outside the capped state space");
        table.actions[idx] = a;
        seen[idx] = true;
    }
    for (bool b : seen)
        if (!b) throw InvalidParams("policy table is missing states");
    return {std::move(table), p};
}

}  // namespace sap::smdp
