#include "sap/routing.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace sap::routing {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void TwoSiteParams::validate() const {
    if (!(lambda1 >= 0) || !(lambda2 >= 0) || !(lambda1 + lambda2 > 0))
        throw InvalidParams("need lambda1, lambda2 >= 0 with a positive total");
    if (!(mu > 0)) throw InvalidParams("mu must be positive");
    if (!(delta > 0)) throw InvalidParams("the two-site model requires delta > 0");
    if (!(omega >= 0)) throw InvalidParams("omega must be nonnegative");
    if (!(d_r >= 0)) throw InvalidParams("d_r must be nonnegative");
    if (servers1 < 0 || servers2 < 0 || servers1 + servers2 < 1)
        throw InvalidParams("need at least one allocatable server across the sites");
    if (cap_n < 1) throw InvalidParams("cap_n must be >= 1");
}

std::string to_string(Provisioning p) {
    switch (p) {
        case Provisioning::IA1: return "IA1";
        case Provisioning::IA2: return "IA2";
        case Provisioning::IA1_IA2: return "IA1/IA2";
        case Provisioning::CA1: return "CA1";
        case Provisioning::CA2: return "CA2";
        case Provisioning::CA1_CA2: return "CA1/CA2";
        case Provisioning::D1: return "D1";
        case Provisioning::D2: return "D2";
        case Provisioning::IA1_CA2: return "IA1/CA2";
        case Provisioning::IA2_CA1: return "IA2/CA1";
        case Provisioning::IA1_D2: return "IA1/D2";
        case Provisioning::IA2_D1: return "IA2/D1";
        case Provisioning::NC: return "NC";
    }
    return "?";
}

std::string to_string(Route r) { return r == Route::RL ? "RL" : "R12"; }

std::optional<Provisioning> provisioning_from_string(const std::string& s) {
    for (int i = 0; i < kNumProvisioning; ++i)
        if (to_string(static_cast<Provisioning>(i)) == s)
            return static_cast<Provisioning>(i);
    return std::nullopt;
}

namespace {

struct SiteVars {
    int m, a;
};

// Post-action allocation variables, or nullopt when the sub-action's
// precondition fails (a_i flags, server presence, per-site caps).
std::optional<std::pair<SiteVars, SiteVars>> apply_provisioning(
    const TwoSiteState& s, Provisioning p, int k1, int k2) {
    SiteVars v1{s.m1, s.a1}, v2{s.m2, s.a2};
    auto ia = [](SiteVars& v, int cap) {
        if (v.a != 0 || v.m + v.a >= cap) return false;
        v.a += 1;
        return true;
    };
    auto ca = [](SiteVars& v) {
        if (v.a != 1) return false;
        v.a -= 1;
        return true;
    };
    auto de = [](SiteVars& v) {
        if (v.m <= 0 || v.a != 0) return false;
        v.m -= 1;
        return true;
    };
    bool ok = true;
    switch (p) {
        case Provisioning::IA1: ok = ia(v1, k1); break;
        case Provisioning::IA2: ok = ia(v2, k2); break;
        case Provisioning::IA1_IA2: ok = ia(v1, k1) && ia(v2, k2); break;
        case Provisioning::CA1: ok = ca(v1); break;
        case Provisioning::CA2: ok = ca(v2); break;
        case Provisioning::CA1_CA2: ok = ca(v1) && ca(v2); break;
        case Provisioning::D1: ok = de(v1); break;
        case Provisioning::D2: ok = de(v2); break;
        case Provisioning::IA1_CA2: ok = ia(v1, k1) && ca(v2); break;
        case Provisioning::IA2_CA1: ok = ia(v2, k2) && ca(v1); break;
        case Provisioning::IA1_D2: ok = ia(v1, k1) && de(v2); break;
        case Provisioning::IA2_D1: ok = ia(v2, k2) && de(v1); break;
        case Provisioning::NC: break;
    }
    if (!ok) return std::nullopt;
    return std::make_pair(v1, v2);
}

TwoSiteTransitionSet build_transitions(const TwoSiteState& s, TwoSiteAction act,
                                       const TwoSiteParams& tp, bool* feasible) {
    TwoSiteTransitionSet out;
    *feasible = false;
    const auto post = apply_provisioning(s, act.prov, tp.servers1, tp.servers2);
    if (!post) return out;
    const auto [v1, v2] = *post;
    // routing toward a serverless queue is excluded (see TwoSiteModel)
    if (tp.servers2 == 0 && act.route == Route::R12) return out;
    if (tp.servers1 == 0 && tp.lambda1 > 0 && act.route == Route::RL) return out;

    const bool at_cap = s.n1 + s.n2 == tp.cap_n;
    auto add = [&](TwoSiteState to, double rate) {
        if (rate > 0) out.items.push_back({to, rate});
    };
    TwoSiteState base{s.n1, v1.m, v1.a, s.n2, v2.m, v2.a};
    if (!at_cap) {
        TwoSiteState arr1 = base;
        if (act.route == Route::RL) arr1.n1 += 1; else arr1.n2 += 1;
        add(arr1, tp.lambda1);
        TwoSiteState arr2 = base;
        arr2.n2 += 1;
        add(arr2, tp.lambda2);
    }
    {
        TwoSiteState t = base;
        t.n1 -= 1;
        add(t, std::min(s.n1, v1.m) * tp.mu);
    }
    {
        TwoSiteState t = base;
        t.n2 -= 1;
        add(t, std::min(s.n2, v2.m) * tp.mu);
    }
    if (v1.a > 0) {
        TwoSiteState t = base;
        t.m1 += 1;
        t.a1 -= 1;
        add(t, v1.a / tp.delta);
    }
    if (v2.a > 0) {
        TwoSiteState t = base;
        t.m2 += 1;
        t.a2 -= 1;
        add(t, v2.a / tp.delta);
    }
    if (out.items.empty()) return out;  // dead post-action state
    *feasible = true;
    out.reward_rate = -(tp.omega * (s.n1 + s.n2) + (v1.m + v1.a + v2.m + v2.a) * tp.mu);
    if (act.route == Route::R12) out.reward_rate -= tp.omega * tp.lambda1 * tp.d_r;
    return out;
}

}  // namespace

TwoSiteTransitionSet two_site_transitions(const TwoSiteState& s, TwoSiteAction a,
                                          const TwoSiteParams& tp) {
    bool feasible = false;
    TwoSiteTransitionSet out = build_transitions(s, a, tp, &feasible);
    if (!feasible)
        throw InvalidParams("infeasible two-site action " + to_string(a.prov) + "+" +
                            to_string(a.route));
    return out;
}

TwoSiteModel::TwoSiteModel(const TwoSiteParams& tp) : tp_(tp) {
    tp.validate();
    const int n1_max = (tp.servers1 == 0 && tp.lambda1 > 0) ? 0 : tp.cap_n;
    const int n2_max = tp.servers2 == 0 ? 0 : tp.cap_n;
    code1_.assign(2 * (tp.servers1 + 1), -1);
    code2_.assign(2 * (tp.servers2 + 1), -1);
    {
        int c = 0;
        for (int m = 0; m <= tp.servers1; ++m)
            for (int a = 0; a <= std::min(1, tp.servers1 - m); ++a)
                code1_[2 * m + a] = c++;
        ma1_count_ = c;
        c = 0;
        for (int m = 0; m <= tp.servers2; ++m)
            for (int a = 0; a <= std::min(1, tp.servers2 - m); ++a)
                code2_[2 * m + a] = c++;
        ma2_count_ = c;
    }
    lookup_.assign(static_cast<size_t>(tp.cap_n + 1) * (tp.cap_n + 1) * ma1_count_ *
                       ma2_count_,
                   -1);
    for (int n1 = 0; n1 <= n1_max; ++n1)
        for (int n2 = 0; n2 <= std::min(n2_max, tp.cap_n - n1); ++n2)
            for (int m1 = 0; m1 <= tp.servers1; ++m1)
                for (int a1 = 0; a1 <= std::min(1, tp.servers1 - m1); ++a1)
                    for (int m2 = 0; m2 <= tp.servers2; ++m2)
                        for (int a2 = 0; a2 <= std::min(1, tp.servers2 - m2); ++a2) {
                            const size_t key =
                                ((static_cast<size_t>(n1) * (tp.cap_n + 1) + n2) *
                                     ma1_count_ +
                                 code1_[2 * m1 + a1]) *
                                    ma2_count_ +
                                code2_[2 * m2 + a2];
                            lookup_[key] = static_cast<int>(states_.size());
                            states_.push_back({n1, m1, a1, n2, m2, a2});
                        }
    ref_ = index({0, 0, 0, 0, 0, 0});
}

int TwoSiteModel::index(const TwoSiteState& s) const {
    if (s.n1 < 0 || s.n2 < 0 || s.n1 + s.n2 > tp_.cap_n) return -1;
    if (s.m1 < 0 || s.a1 < 0 || s.a1 > 1 || s.m1 + s.a1 > tp_.servers1) return -1;
    if (s.m2 < 0 || s.a2 < 0 || s.a2 > 1 || s.m2 + s.a2 > tp_.servers2) return -1;
    const size_t key = ((static_cast<size_t>(s.n1) * (tp_.cap_n + 1) + s.n2) *
                            ma1_count_ +
                        code1_[2 * s.m1 + s.a1]) *
                           ma2_count_ +
                       code2_[2 * s.m2 + s.a2];
    return lookup_[key];
}

bool TwoSiteModel::feasible(const TwoSiteState& s, TwoSiteAction a) const {
    bool ok = false;
    build_transitions(s, a, tp_, &ok);
    return ok;
}

TwoSiteTransitionSet TwoSiteModel::transition_set(const TwoSiteState& s,
                                                  TwoSiteAction a) const {
    return two_site_transitions(s, a, tp_);
}

void TwoSiteModel::feasible_actions(int s, std::vector<int>& out) const {
    out.clear();
    const TwoSiteState& st = states_[s];
    for (int i = 0; i < kNumTwoSiteActions; ++i)
        if (feasible(st, action_at(i))) out.push_back(i);
}

void TwoSiteModel::transitions(int s, int a, std::vector<pi::Transition>& out,
                               double& reward_rate) const {
    const TwoSiteTransitionSet ts = two_site_transitions(states_[s], action_at(a), tp_);
    out.clear();
    for (const auto& t : ts.items) out.push_back({index(t.to), t.rate});
    reward_rate = ts.reward_rate;
}

std::vector<int> TwoSiteModel::initial_policy() const {
    // Per-site load matching (as in the single-site model), combined
    // into the nearest available joint sub-action; local routing.
    std::vector<int> pol(states_.size());
    for (size_t i = 0; i < states_.size(); ++i) {
        const TwoSiteState& s = states_[i];
        auto desire = [&](int n, int m, int a) {
            if (n > m + a) return 0;  // grow
            if (n < m) return 2;      // shrink
            if (n < m + a) return 1;  // cancel
            return 3;                 // hold
        };
        const int d1 = desire(s.n1, s.m1, s.a1), d2 = desire(s.n2, s.m2, s.a2);
        static constexpr Provisioning combo[4][4] = {
            {Provisioning::IA1_IA2, Provisioning::IA1_CA2, Provisioning::IA1_D2,
             Provisioning::IA1},
            {Provisioning::IA2_CA1, Provisioning::CA1_CA2, Provisioning::CA1,
             Provisioning::CA1},
            {Provisioning::IA2_D1, Provisioning::CA2, Provisioning::D1,
             Provisioning::D1},
            {Provisioning::IA2, Provisioning::CA2, Provisioning::D2,
             Provisioning::NC}};
        TwoSiteAction cand{combo[d1][d2], Route::RL};
        if (tp_.servers1 == 0 && tp_.lambda1 > 0) cand.route = Route::R12;
        if (!feasible(s, cand)) {
            bool found = false;
            for (Provisioning p :
                 {Provisioning::NC, Provisioning::IA1, Provisioning::IA2,
                  Provisioning::CA1, Provisioning::CA2, Provisioning::D1,
                  Provisioning::D2}) {
                if (feasible(s, {p, cand.route})) {
                    cand.prov = p;
                    found = true;
                    break;
                }
            }
            if (!found) {
                for (int a = 0; a < kNumTwoSiteActions && !found; ++a)
                    if (feasible(s, action_at(a))) {
                        cand = action_at(a);
                        found = true;
                    }
                if (!found) throw SingularChainError("state with no feasible action");
            }
        }
        pol[i] = action_index(cand);
    }
    return pol;
}

namespace {

struct SolveOutcome {
    pi::Result res;
    Metrics metrics;
    double c1 = 0, c2 = 0, remote_fraction = 0;
};

SolveOutcome solve_at_cap(const TwoSiteParams& tp, const pi::Options& opts,
                          const std::vector<int>* warm,
                          const TwoSiteModel* warm_model) {
    TwoSiteModel model(tp);
    std::vector<int> initial = model.initial_policy();
    if (warm && warm_model) {
        for (size_t i = 0; i < model.states().size(); ++i) {
            const int old = warm_model->index(model.states()[i]);
            if (old >= 0 &&
                model.feasible(model.states()[i], action_at((*warm)[old])))
                initial[i] = (*warm)[old];
        }
    }
    SolveOutcome out;
    out.res = pi::policy_iteration(model, std::move(initial), opts);

    const auto dist = pi::stationary_distribution(model, out.res.policy);
    double mean_n = 0, servers1 = 0, servers2 = 0, remote_rate = 0, admit1 = 0,
           remote_q = 0;
    for (size_t i = 0; i < model.states().size(); ++i) {
        const TwoSiteState& s = model.states()[i];
        const TwoSiteAction act = action_at(out.res.policy[i]);
        const auto post = apply_provisioning(s, act.prov, tp.servers1, tp.servers2);
        mean_n += dist[i] * (s.n1 + s.n2);
        servers1 += dist[i] * (post->first.m + post->first.a);
        servers2 += dist[i] * (post->second.m + post->second.a);
        if (act.route == Route::R12) {
            // the reward charges lambda1 * d_r for the whole sojourn in
            // an R12 state, so Q mirrors that accounting exactly
            remote_q += dist[i] * tp.lambda1;
            if (s.n1 + s.n2 < tp.cap_n) remote_rate += dist[i] * tp.lambda1;
        }
        if (s.n1 + s.n2 < tp.cap_n) admit1 += dist[i] * tp.lambda1;
    }
    out.c1 = tp.mu * servers1;
    out.c2 = tp.mu * servers2;
    out.metrics.q = mean_n + remote_q * tp.d_r;
    out.metrics.c = out.c1 + out.c2;
    out.metrics.r = *out.metrics.q / (tp.lambda1 + tp.lambda2);
    out.remote_fraction = admit1 > 0 ? remote_rate / admit1 : 0;
    return out;
}

}  // namespace

TwoSiteSolveResult solve_state_dependent(const TwoSiteParams& tp,
                                         const pi::Options& opts, double rel_tol) {
    tp.validate();
    constexpr int kMaxCap = 4096;
    TwoSiteParams cur = tp;
    SolveOutcome prev = solve_at_cap(cur, opts, nullptr, nullptr);
    while (true) {
        TwoSiteParams next = cur;
        next.cap_n = cur.cap_n * 2;
        if (next.cap_n > kMaxCap)
            throw ConvergenceError("two-site cap doubling did not converge");
        TwoSiteModel prev_model(cur);
        SolveOutcome curr = solve_at_cap(next, opts, &prev.res.policy, &prev_model);
        const double a = -prev.res.gain, b = -curr.res.gain;
        if (std::abs(a - b) < rel_tol * std::max(1.0, std::abs(b))) {
            TwoSiteSolveResult out;
            out.policy.params = next;
            out.policy.actions.reserve(curr.res.policy.size());
            for (int x : curr.res.policy) out.policy.actions.push_back(action_at(x));
            out.avg_reward = curr.res.gain;
            out.iterations = curr.res.iterations;
            out.objective_history = std::move(curr.res.objective_history);
            out.metrics = curr.metrics;
            out.c1 = curr.c1;
            out.c2 = curr.c2;
            out.remote_fraction = curr.remote_fraction;
            return out;
        }
        prev = std::move(curr);
        cur = next;
    }
}

// ---------------------------------------------------------------------------
// State-oblivious machinery

SiteEval eval_site(const TwoSiteParams& tp, double lambda_site, int servers) {
    if (lambda_site <= 1e-300) return {0.0, Metrics{0, 0, {}}, true};
    if (servers < 1 || !(lambda_site < servers * tp.mu * 0.9975))
        return {kInf, Metrics{}, false};
    const SystemParams p = tp.site_params(lambda_site);
    const auto solved = smdp::solve_optimal_auto(p, servers, 1);
    const Metrics m = smdp::stationary_metrics(solved.result.policy, p);
    return {solved.result.objective(), m, true};
}

SplitTable oblivious_split_table(const TwoSiteParams& tp, double granularity) {
    tp.validate();
    if (!(granularity > 0) || granularity > 1)
        throw InvalidParams("granularity must lie in (0, 1]");
    SplitTable table;
    for (double f = 0.0; f < 1.0 + granularity / 2; f += granularity)
        table.fractions.push_back(std::min(f, 1.0));
    // include the exact load-balance point so the balanced baseline can
    // never undercut the grid search
    if (tp.lambda1 > 0) {
        const double fb = (tp.lambda1 - tp.lambda2) / (2 * tp.lambda1);
        if (fb > 0 && fb < 1) table.fractions.push_back(fb);
    }
    std::sort(table.fractions.begin(), table.fractions.end());
    table.fractions.erase(std::unique(table.fractions.begin(), table.fractions.end()),
                          table.fractions.end());

    const int n = static_cast<int>(table.fractions.size());
    table.site_objectives.resize(n);
    table.site1.resize(n);
    table.site2.resize(n);
    // independent single-site solves; safe to evaluate concurrently
    detail::parallel_for(n, [&](int i) {
        const double f = table.fractions[i];
        const SiteEval e1 = eval_site(tp, tp.lambda1 * (1 - f), tp.servers1);
        const SiteEval e2 = eval_site(tp, tp.lambda2 + tp.lambda1 * f, tp.servers2);
        table.site_objectives[i] =
            (e1.feasible && e2.feasible) ? e1.objective + e2.objective : kInf;
        table.site1[i] = e1.metrics;
        table.site2[i] = e2.metrics;
    });
    return table;
}

ObliviousResult pick_oblivious(const SplitTable& table, const TwoSiteParams& tp) {
    double best = kInf;
    size_t best_i = 0;
    for (size_t i = 0; i < table.fractions.size(); ++i) {
        const double obj = table.site_objectives[i] +
                           tp.omega * tp.lambda1 * table.fractions[i] * tp.d_r;
        if (obj < best) {
            best = obj;
            best_i = i;
        }
    }
    if (!(best < kInf)) throw UnstableError("every split overloads a site");
    return {table.fractions[best_i], best, table.site1[best_i], table.site2[best_i]};
}

ObliviousResult oblivious_optimal(const TwoSiteParams& tp, double granularity) {
    return pick_oblivious(oblivious_split_table(tp, granularity), tp);
}

std::string to_string(BaselineMode m) {
    switch (m) {
        case BaselineMode::LocalOnly: return "local_only";
        case BaselineMode::AllToSite2: return "all_to_site2";
        case BaselineMode::Balanced: return "balanced";
    }
    return "?";
}

double baseline_routing(const TwoSiteParams& tp, BaselineMode mode) {
    tp.validate();
    double f = 0;
    switch (mode) {
        case BaselineMode::LocalOnly: f = 0; break;
        case BaselineMode::AllToSite2: f = 1; break;
        case BaselineMode::Balanced:
            f = tp.lambda1 > 0
                    ? std::clamp((tp.lambda1 - tp.lambda2) / (2 * tp.lambda1), 0.0, 1.0)
                    : 0.0;
            break;
    }
    const SiteEval e1 = eval_site(tp, tp.lambda1 * (1 - f), tp.servers1);
    const SiteEval e2 = eval_site(tp, tp.lambda2 + tp.lambda1 * f, tp.servers2);
    if (!e1.feasible || !e2.feasible)
        throw UnstableError("baseline split overloads a site: " + to_string(mode));
    return e1.objective + e2.objective + tp.omega * tp.lambda1 * f * tp.d_r;
}

// ---------------------------------------------------------------------------

void save_policy(std::ostream& os, const TwoSitePolicyTable& policy) {
    const TwoSiteModel model(policy.params);
    const TwoSiteParams& tp = policy.params;
    os.precision(17);
    os << "# two-site-policy-table v1\n";
    os << "# lambda1 " << tp.lambda1 << "\n# lambda2 " << tp.lambda2 << "\n# d_r "
       << tp.d_r << "\n# mu " << tp.mu << "\n# delta " << tp.delta << "\n# omega "
       << tp.omega << "\n";
    os << "# servers1 " << tp.servers1 << "\n# servers2 " << tp.servers2
       << "\n# cap_n " << tp.cap_n << "\n";
    os << "# columns: n1 m1 a1 n2 m2 a2 provisioning routing\n";
    for (size_t i = 0; i < model.states().size(); ++i) {
        const TwoSiteState& s = model.states()[i];
        os << s.n1 << ' ' << s.m1 << ' ' << s.a1 << ' ' << s.n2 << ' ' << s.m2 << ' '
           << s.a2 << ' ' << to_string(policy.actions[i].prov) << ' '
           << to_string(policy.actions[i].route) << '\n';
    }
}

TwoSitePolicyTable load_policy(std::istream& is) {
    TwoSiteParams tp;
    std::vector<std::pair<TwoSiteState, TwoSiteAction>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string key;
            hs >> key;
            if (key == "lambda1") hs >> tp.lambda1;
            else if (key == "lambda2") hs >> tp.lambda2;
            else if (key == "d_r") hs >> tp.d_r;
            else if (key == "mu") hs >> tp.mu;
            else if (key == "delta") hs >> tp.delta;
            else if (key == "omega") hs >> tp.omega;
            else if (key == "servers1") hs >> tp.servers1;
            else if (key == "servers2") hs >> tp.servers2;
            else if (key == "cap_n") hs >> tp.cap_n;
            continue;
        }
        std::istringstream ls(line);
        TwoSiteState s;
        std::string prov, route;
        if (!(ls >> s.n1 >> s.m1 >> s.a1 >> s.n2 >> s.m2 >> s.a2 >> prov >> route))
            throw InvalidParams("bad two-site policy row: " + line);
        const auto p = provisioning_from_string(prov);
        if (!p) throw InvalidParams("unknown provisioning sub-action: " + prov);
        if (route != "RL" && route != "R12")
            throw InvalidParams("unknown routing sub-action: " + route);
        rows.push_back({s, {*p, route == "RL" ? Route::RL : Route::R12}});
    }
    const TwoSiteModel model(tp);
    TwoSitePolicyTable table{tp, std::vector<TwoSiteAction>(model.states().size())};
    std::vector<bool> seen(model.states().size(), false);
    for (const auto& [s, a] : rows) {
        const int idx = model.index(s);
        if (idx < 0) throw InvalidParams("two-site policy row outside the state space");
        table.actions[idx] = a;
        seen[idx] = true;
    }
    for (bool b : seen)
        if (!b) throw InvalidParams("two-site policy table is missing states");
    return table;
}

}  // namespace sap::routing
