#include "sap/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <thread>

namespace sap::sim {

namespace {

// xoshiro256** with splitmix64 seeding; jump() advances 2^128 steps so
// each replication gets a disjoint substream.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& si : s_) {
            x += 0x9E3779B97F4A7C15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
            si = z ^ (z >> 31);
        }
    }
    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }
    void jump() {
        static constexpr std::uint64_t kJump[] = {
            0x180ec6d33cfd0abaULL, 0xd5a61266f0c9392cULL, 0xa9582618e03fc9aaULL,
            0x39abdc4529b1661cULL};
        std::uint64_t s0 = 0, s1 = 0, s2 = 0, s3 = 0;
        for (std::uint64_t word : kJump)
            for (int b = 0; b < 64; ++b) {
                if (word & (1ULL << b)) {
                    s0 ^= s_[0];
                    s1 ^= s_[1];
                    s2 ^= s_[2];
                    s3 ^= s_[3];
                }
                next();
            }
        s_[0] = s0;
        s_[1] = s1;
        s_[2] = s2;
        s_[3] = s3;
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }  // [0, 1)
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }
    std::uint64_t s_[4];
};

Rng substream(std::uint64_t seed, int replication) {
    Rng rng(seed);
    for (int i = 0; i < replication; ++i) rng.jump();
    return rng;
}

// Time-integrated statistics over the measurement window.
struct Tally {
    double warmup, horizon;
    double area_n = 0, area_cost = 0;
    double sum_sojourn = 0;
    long completions = 0;

    void integrate(double t0, double t1, double n, double cost) {
        const double a = std::max(t0, warmup), b = std::min(t1, horizon);
        if (b > a) {
            area_n += n * (b - a);
            area_cost += cost * (b - a);
        }
    }
    void complete(double when, double sojourn) {
        if (when > warmup && when <= horizon) {
            sum_sojourn += sojourn;
            ++completions;
        }
    }
    double span() const { return horizon - warmup; }
    RepStats stats() const {
        RepStats r;
        r.mean_n = area_n / span();
        r.c = area_cost / span();
        r.r = completions > 0 ? sum_sojourn / completions : 0;
        r.lambda_eff = completions / span();
        return r;
    }
};

// Race of exponential competitors, optionally cut short by a fixed
// deadline; memorylessness makes re-sampling after every event exact.
struct Race {
    double rates[8];
    int ids[8];
    int count = 0;
    void add(int id, double rate) {
        if (rate > 0) {
            rates[count] = rate;
            ids[count] = id;
            ++count;
        }
    }
    // returns event id (or deadline_id) and the elapsed time
    std::pair<int, double> run(Rng& rng, std::optional<double> until_deadline,
                               int deadline_id) const {
        double total = 0;
        for (int i = 0; i < count; ++i) total += rates[i];
        double dt = total > 0 ? rng.exponential(total)
                              : std::numeric_limits<double>::infinity();
        if (until_deadline && dt >= *until_deadline)
            return {deadline_id, *until_deadline};
        double u = rng.uniform() * total;
        for (int i = 0; i < count; ++i) {
            if (u < rates[i]) return {ids[i], dt};
            u -= rates[i];
        }
        return {ids[count - 1], dt};
    }
};

enum EventId {
    kArrive = 0,
    kArrive2,
    kService,
    kService2,
    kSetup,
    kSetup2,
    kHoldStage,
    kDeadline
};

// ---------------------------------------------------------------------------
// Single-site policy runners

RepStats run_mmk(const SystemParams& p, int servers, const SimConfig& cfg, Rng& rng) {
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;
    double t = 0;
    while (t < cfg.horizon) {
        Race race;
        race.add(kArrive, p.lambda);
        race.add(kService, std::min<int>(fifo.size(), servers) * p.mu);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, fifo.size(), servers * p.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        if (ev == kArrive) {
            fifo.push_back(t);
        } else {
            tally.complete(t, t - fifo.front());
            fifo.pop_front();
        }
    }
    return tally.stats();
}

// Hold-on, batching and queue-dependent rates share one machine: a
// single allocation unit that turns off when empty (after an optional
// holding-on delay) and is re-allocated once b requests are waiting.
struct SingleDynamic {
    std::vector<double> rates;  // service rate with i present: rates[min(i,c)-1]
    int b = 1;
    int hold_k = 1;
    bool hold_det = false;
    double hold_t = 0;
};

RepStats run_single_dynamic(const SystemParams& p, const SingleDynamic& pol,
                            const SimConfig& cfg, Rng& rng) {
    enum Phase { kOff, kSetup_, kActive, kHold };
    const int c = static_cast<int>(pol.rates.size());
    const double mu_top = pol.rates.back();
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;
    Phase phase = kOff;
    int stage = 0;
    double deadline = 0;
    double t = 0;
    while (t < cfg.horizon) {
        Race race;
        race.add(kArrive, p.lambda);
        std::optional<double> until;
        double cost = mu_top;
        switch (phase) {
            case kOff:
                cost = 0;
                break;
            case kSetup_:
                race.add(kSetup, 1.0 / p.delta);
                break;
            case kActive:
                race.add(kService, pol.rates[std::min<int>(fifo.size(), c) - 1]);
                break;
            case kHold:
                if (pol.hold_det)
                    until = deadline - t;
                else
                    race.add(kHoldStage, pol.hold_k / pol.hold_t);
                break;
        }
        auto [ev, dt] = race.run(rng, until, kDeadline);
        tally.integrate(t, t + dt, fifo.size(), cost);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                fifo.push_back(t);
                if (phase == kOff && static_cast<int>(fifo.size()) >= pol.b)
                    phase = (p.delta > 0) ? kSetup_ : kActive;
                else if (phase == kHold)
                    phase = kActive;
                break;
            case kSetup:
                phase = kActive;
                break;
            case kService:
                tally.complete(t, t - fifo.front());
                fifo.pop_front();
                if (fifo.empty()) {
                    if (pol.hold_t > 0) {
                        phase = kHold;
                        stage = 1;
                        deadline = t + pol.hold_t;
                    } else {
                        phase = kOff;
                    }
                }
                break;
            case kHoldStage:
                if (++stage > pol.hold_k) phase = kOff;
                break;
            case kDeadline:
                phase = kOff;
                break;
        }
    }
    return tally.stats();
}

RepStats run_dual_one_always(const SystemParams& p, const DualOneAlways& pol,
                             const SimConfig& cfg, Rng& rng) {
    enum Phase { kBase, kBasePlus, kExtra };
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;
    Phase phase = kBase;
    double t = 0;
    while (t < cfg.horizon) {
        const int n = static_cast<int>(fifo.size());
        Race race;
        race.add(kArrive, p.lambda);
        double cost = pol.mu1;
        switch (phase) {
            case kBase:
                if (n > 0) race.add(kService, pol.mu1);
                break;
            case kBasePlus:
                race.add(kService, pol.mu1);
                race.add(kSetup, 1.0 / p.delta);
                cost = pol.mu2;
                break;
            case kExtra:
                race.add(kService, pol.mu2);
                cost = pol.mu2;
                break;
        }
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, n, cost);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                fifo.push_back(t);
                if (phase == kBase && static_cast<int>(fifo.size()) == pol.h)
                    phase = kBasePlus;
                break;
            case kService:
                tally.complete(t, t - fifo.front());
                fifo.pop_front();
                if (phase != kBase && static_cast<int>(fifo.size()) < pol.l)
                    phase = kBase;
                break;
            case kSetup:
                phase = kExtra;
                break;
        }
    }
    return tally.stats();
}

RepStats run_dual_both(const SystemParams& p, const SimConfig& cfg, Rng& rng) {
    enum Phase { kIdle, kSetupPh, kOneActive, kTwoActive };
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;
    Phase phase = kIdle;
    double t = 0;
    while (t < cfg.horizon) {
        const int n = static_cast<int>(fifo.size());
        Race race;
        race.add(kArrive, p.lambda);
        double cost = 0;
        switch (phase) {
            case kIdle:
                break;
            case kSetupPh:
                race.add(kSetup, std::min(n, 2) / p.delta);
                cost = std::min(n, 2) * p.mu;
                break;
            case kOneActive:
                race.add(kService, p.mu);
                if (n >= 2) race.add(kSetup, 1.0 / p.delta);
                cost = (n >= 2 ? 2.0 : 1.0) * p.mu;
                break;
            case kTwoActive:
                race.add(kService, 2.0 * p.mu);
                cost = 2.0 * p.mu;
                break;
        }
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, n, cost);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                fifo.push_back(t);
                if (phase == kIdle) phase = kSetupPh;
                break;
            case kSetup:
                phase = (phase == kSetupPh) ? kOneActive : kTwoActive;
                break;
            case kService:
                tally.complete(t, t - fifo.front());
                fifo.pop_front();
                if (fifo.empty())
                    phase = kIdle;
                else if (phase == kTwoActive && fifo.size() == 1)
                    phase = kOneActive;
                break;
        }
    }
    return tally.stats();
}

RepStats run_per_request(const SystemParams& p, const SimConfig& cfg, Rng& rng) {
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> in_setup, in_service;
    double t = 0;
    while (t < cfg.horizon) {
        Race race;
        race.add(kArrive, p.lambda);
        if (p.delta > 0)
            race.add(kSetup, in_setup.size() / p.delta);
        race.add(kService, in_service.size() * p.mu);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        const double n = in_setup.size() + in_service.size();
        tally.integrate(t, t + dt, n, n * p.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                if (p.delta > 0)
                    in_setup.push_back(t);
                else
                    in_service.push_back(t);
                break;
            case kSetup:
                in_service.push_back(in_setup.front());
                in_setup.pop_front();
                break;
            case kService:
                tally.complete(t, t - in_service.front());
                in_service.pop_front();
                break;
        }
    }
    return tally.stats();
}

RepStats run_reactive(const SystemParams& p, int s, const SimConfig& cfg, Rng& rng) {
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> waiting, serving;
    double t = 0;
    while (t < cfg.horizon) {
        const int i = static_cast<int>(waiting.size());
        const int k = static_cast<int>(serving.size());
        Race race;
        race.add(kArrive, p.lambda);
        race.add(kService, k * p.mu);
        race.add(kSetup, std::min(i, s) / p.delta);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, i + k, (k + std::min(i, s)) * p.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                waiting.push_back(t);
                break;
            case kService:
                tally.complete(t, t - serving.front());
                serving.pop_front();
                if (!waiting.empty()) {  // freed server is reused at once
                    serving.push_back(waiting.front());
                    waiting.pop_front();
                }
                break;
            case kSetup:
                serving.push_back(waiting.front());
                waiting.pop_front();
                break;
        }
    }
    return tally.stats();
}

RepStats run_proactive(const SystemParams& p, const SimConfig& cfg, Rng& rng) {
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;  // oldest request completes first
    int allocated = 1;
    double t = 0;
    while (t < cfg.horizon) {
        const int n = static_cast<int>(fifo.size());
        const bool pending = n >= allocated;  // all allocated servers busy
        Race race;
        race.add(kArrive, p.lambda);
        race.add(kService, std::min(n, allocated) * p.mu);
        if (pending) race.add(kSetup, 1.0 / p.delta);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, n, (allocated + (pending ? 1 : 0)) * p.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                fifo.push_back(t);
                break;
            case kService:
                tally.complete(t, t - fifo.front());
                fifo.pop_front();
                allocated = std::max(1, std::min<int>(allocated, fifo.size() + 1));
                break;
            case kSetup:
                ++allocated;
                break;
        }
    }
    return tally.stats();
}

RepStats run_table(const smdp::PolicyTable& table, const SystemParams& p,
                   const SimConfig& cfg, Rng& rng) {
    const smdp::StateSpace space(table.caps);
    Tally tally{cfg.warmup, cfg.horizon};
    std::deque<double> fifo;
    int m = 0, a = 0;  // post-action allocation variables
    auto enter = [&](int n) {
        const int idx = space.index({n, m, a});
        if (idx < 0) throw InvalidParams("replay reached a state outside the table");
        switch (table.actions[idx]) {
            case smdp::Action::IA: a += 1; break;
            case smdp::Action::CA: a -= 1; break;
            case smdp::Action::D: m -= 1; break;
            case smdp::Action::NC: break;
        }
    };
    enter(0);
    double t = 0;
    while (t < cfg.horizon) {
        const int n = static_cast<int>(fifo.size());
        Race race;
        if (n < table.caps.cap_n) race.add(kArrive, p.lambda);
        race.add(kService, std::min(n, m) * p.mu);
        race.add(kSetup, a / p.delta);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, n, (m + a) * p.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                fifo.push_back(t);
                break;
            case kService:
                tally.complete(t, t - fifo.front());
                fifo.pop_front();
                break;
            case kSetup:
                m += 1;
                a -= 1;
                break;
        }
        enter(static_cast<int>(fifo.size()));
    }
    return tally.stats();
}

struct TwoSiteRep {
    RepStats stats;
    double remote_admit_rate = 0;  // admitted remote routings per unit time
};

TwoSiteRep run_two_site(const routing::TwoSitePolicyTable& table,
                        const routing::TwoSiteParams& tp, const SimConfig& cfg,
                        Rng& rng) {
    using routing::Route;
    using routing::TwoSiteState;
    const routing::TwoSiteModel model(tp);
    Tally tally{cfg.warmup, cfg.horizon};
    // per-site queues: arrival time and whether the response must travel back
    std::deque<std::pair<double, bool>> q1, q2;
    int m1 = 0, a1 = 0, m2 = 0, a2 = 0;
    Route route = Route::RL;
    long remote_admitted = 0;

    auto enter = [&]() {
        const TwoSiteState s{static_cast<int>(q1.size()), m1, a1,
                             static_cast<int>(q2.size()), m2, a2};
        const int idx = model.index(s);
        if (idx < 0) throw InvalidParams("replay reached a state outside the table");
        const routing::TwoSiteAction act = table.actions[idx];
        route = act.route;
        switch (act.prov) {
            case routing::Provisioning::IA1: a1 += 1; break;
            case routing::Provisioning::IA2: a2 += 1; break;
            case routing::Provisioning::IA1_IA2: a1 += 1; a2 += 1; break;
            case routing::Provisioning::CA1: a1 -= 1; break;
            case routing::Provisioning::CA2: a2 -= 1; break;
            case routing::Provisioning::CA1_CA2: a1 -= 1; a2 -= 1; break;
            case routing::Provisioning::D1: m1 -= 1; break;
            case routing::Provisioning::D2: m2 -= 1; break;
            case routing::Provisioning::IA1_CA2: a1 += 1; a2 -= 1; break;
            case routing::Provisioning::IA2_CA1: a2 += 1; a1 -= 1; break;
            case routing::Provisioning::IA1_D2: a1 += 1; m2 -= 1; break;
            case routing::Provisioning::IA2_D1: a2 += 1; m1 -= 1; break;
            case routing::Provisioning::NC: break;
        }
    };
    enter();
    double t = 0;
    while (t < cfg.horizon) {
        const int n1 = static_cast<int>(q1.size()), n2 = static_cast<int>(q2.size());
        const bool at_cap = n1 + n2 == tp.cap_n;
        Race race;
        if (!at_cap) {
            race.add(kArrive, tp.lambda1);
            race.add(kArrive2, tp.lambda2);
        }
        race.add(kService, std::min(n1, m1) * tp.mu);
        race.add(kService2, std::min(n2, m2) * tp.mu);
        race.add(kSetup, a1 / tp.delta);
        race.add(kSetup2, a2 / tp.delta);
        auto [ev, dt] = race.run(rng, std::nullopt, kDeadline);
        tally.integrate(t, t + dt, n1 + n2, (m1 + a1 + m2 + a2) * tp.mu);
        t += dt;
        if (t >= cfg.horizon) break;
        switch (ev) {
            case kArrive:
                if (route == Route::RL) {
                    q1.push_back({t, false});
                } else {
                    q2.push_back({t, true});
                    if (t > cfg.warmup && t <= cfg.horizon) ++remote_admitted;
                }
                break;
            case kArrive2:
                q2.push_back({t, false});
                break;
            case kService: {
                const auto [when, remote] = q1.front();
                q1.pop_front();
                tally.complete(t, t - when + (remote ? tp.d_r : 0));
                break;
            }
            case kService2: {
                const auto [when, remote] = q2.front();
                q2.pop_front();
                tally.complete(t, t - when + (remote ? tp.d_r : 0));
                break;
            }
            case kSetup:
                m1 += 1;
                a1 -= 1;
                break;
            case kSetup2:
                m2 += 1;
                a2 -= 1;
                break;
        }
        enter();
    }
    TwoSiteRep out{tally.stats(), remote_admitted / tally.span()};
    return out;
}

// ---------------------------------------------------------------------------
// Replication orchestration

double t_quantile_975(int df) {
    static constexpr double kTable[] = {
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
    if (df <= 30) return kTable[df - 1];
    if (df <= 40) return 2.021;
    if (df <= 60) return 2.000;
    if (df <= 120) return 1.980;
    return 1.96;
}

template <typename F>
std::vector<RepStats> run_replications(const SimConfig& cfg, F&& one_rep) {
    std::vector<RepStats> reps(cfg.replications);
    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = std::min<int>(cfg.replications, std::max(1u, hw));
    if (workers <= 1) {
        for (int r = 0; r < cfg.replications; ++r) reps[r] = one_rep(r);
        return reps;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < cfg.replications;
                 r = next.fetch_add(1))
                reps[r] = one_rep(r);
        });
    for (auto& th : pool) th.join();
    return reps;
}

struct MeanCi {
    double mean, ci;
};

MeanCi summarize(const std::vector<double>& xs) {
    const int n = static_cast<int>(xs.size());
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= n;
    double var = 0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= (n - 1);
    return {mean, t_quantile_975(n - 1) * std::sqrt(var / n)};
}

MetricsEstimate assemble(std::vector<RepStats> reps) {
    MetricsEstimate est;
    std::vector<double> rs, cs, objs;
    for (const auto& r : reps) {
        rs.push_back(r.r);
        cs.push_back(r.c);
        objs.push_back(r.objective);
    }
    const auto mr = summarize(rs), mc = summarize(cs), mo = summarize(objs);
    est.r_mean = mr.mean;
    est.r_ci_halfwidth = mr.ci;
    est.c_mean = mc.mean;
    est.c_ci_halfwidth = mc.ci;
    est.objective_mean = mo.mean;
    est.objective_ci_halfwidth = mo.ci;
    est.reps = std::move(reps);
    return est;
}

}  // namespace

void SimConfig::validate() const {
    if (!(warmup >= 0) || !(horizon > warmup))
        throw InvalidParams("need horizon > warmup >= 0");
    if (replications < 2)
        throw InvalidParams("need at least 2 replications for an interval");
}

MetricsEstimate simulate(const PolicySpec& policy, const SystemParams& p,
                         const SimConfig& cfg) {
    p.validate();
    sap::validate(policy);
    cfg.validate();
    // table replays use the decision model's own objective accounting
    if (const auto* t = std::get_if<SmdpTablePolicy>(&policy))
        return simulate_policy_table(*t->table, p, cfg);

    // immediate setups are handled by the single-unit machine; the
    // multi-server policies all race a 1/delta clock
    const bool needs_delta =
        std::holds_alternative<DualOneAlways>(policy) ||
        std::holds_alternative<DualBothDynamic>(policy) ||
        std::holds_alternative<ReactiveUnlimited>(policy) ||
        std::holds_alternative<ProactiveUnlimited>(policy) ||
        std::holds_alternative<SmdpTablePolicy>(policy);
    if (needs_delta && !(p.delta > 0))
        throw InvalidParams("this policy's simulation requires delta > 0");

    auto dispatch = [&](Rng& rng) -> RepStats {
        struct V {
            const SystemParams& p;
            const SimConfig& cfg;
            Rng& rng;
            RepStats operator()(const AlwaysOn& s) const {
                if (p.lambda >= s.servers * p.mu)
                    throw UnstableError("always-on requires lambda < servers*mu");
                return run_mmk(p, s.servers, cfg, rng);
            }
            RepStats operator()(const HoldOn& s) const {
                if (p.lambda >= p.mu) throw UnstableError("hold-on requires lambda < mu");
                return run_single_dynamic(
                    p, SingleDynamic{{p.mu}, 1, s.k, s.deterministic, s.t}, cfg, rng);
            }
            RepStats operator()(const Batching& s) const {
                if (p.lambda >= p.mu)
                    throw UnstableError("batching requires lambda < mu");
                return run_single_dynamic(p, SingleDynamic{{p.mu}, s.b, 1, false, 0},
                                          cfg, rng);
            }
            RepStats operator()(const StateDepRates& s) const {
                if (p.lambda >= s.rates.back())
                    throw UnstableError("state-dep rates require lambda < mu_c");
                return run_single_dynamic(
                    p, SingleDynamic{s.rates, 1, s.k, s.deterministic, s.t}, cfg, rng);
            }
            RepStats operator()(const DualOneAlways& s) const {
                if (p.lambda >= s.mu2)
                    throw UnstableError("dual one-always requires lambda < mu2");
                return run_dual_one_always(p, s, cfg, rng);
            }
            RepStats operator()(const DualBothDynamic&) const {
                if (p.lambda >= 2 * p.mu)
                    throw UnstableError("dual both-dynamic requires lambda < 2mu");
                return run_dual_both(p, cfg, rng);
            }
            RepStats operator()(const ServerPerRequest&) const {
                return run_per_request(p, cfg, rng);
            }
            RepStats operator()(const ReactiveUnlimited& s) const {
                return run_reactive(p, s.s, cfg, rng);
            }
            RepStats operator()(const ProactiveUnlimited&) const {
                return run_proactive(p, cfg, rng);
            }
            RepStats operator()(const SmdpTablePolicy& s) const {
                return run_table(*s.table, p, cfg, rng);
            }
        };
        return std::visit(V{p, cfg, rng}, policy);
    };

    auto reps = run_replications(cfg, [&](int r) {
        Rng rng = substream(cfg.seed, r);
        RepStats st = dispatch(rng);
        st.objective = p.omega * p.lambda * st.r + st.c;
        return st;
    });
    return assemble(std::move(reps));
}

MetricsEstimate simulate_policy_table(const smdp::PolicyTable& table,
                                      const SystemParams& p, const SimConfig& cfg) {
    p.validate();
    cfg.validate();
    if (!(p.delta > 0)) throw InvalidParams("table replay requires delta > 0");
    auto reps = run_replications(cfg, [&](int r) {
        Rng rng = substream(cfg.seed, r);
        RepStats st = run_table(table, p, cfg, rng);
        // reward accounting of the decision model: omega E[n] + C
        st.objective = p.omega * st.mean_n + st.c;
        return st;
    });
    return assemble(std::move(reps));
}

MetricsEstimate simulate_two_site_table(const routing::TwoSitePolicyTable& table,
                                        const routing::TwoSiteParams& tp,
                                        const SimConfig& cfg) {
    tp.validate();
    cfg.validate();
    auto reps = run_replications(cfg, [&](int r) {
        Rng rng = substream(cfg.seed, r);
        TwoSiteRep two = run_two_site(table, tp, cfg, rng);
        RepStats st = two.stats;
        st.objective =
            tp.omega * (st.mean_n + two.remote_admit_rate * tp.d_r) + st.c;
        return st;
    });
    return assemble(std::move(reps));
}

}  // namespace sap::sim
