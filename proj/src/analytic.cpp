#include "sap/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sap::analytic {

namespace {

// (lambda*T/k + 1)^k, or its k -> infinity limit exp(lambda*T).
double hold_factor(double lambda, int k, bool deterministic, double t) {
    if (deterministic) return std::exp(lambda * t);
    return std::pow(lambda * t / k + 1.0, k);
}

void require_stable(bool ok, const char* what) {
    if (!ok) throw UnstableError(what);
}

double check_positive_delta(double delta) {
    if (!(delta > 0))
        throw InvalidParams("this evaluator requires delta > 0");
    return delta;
}

}  // namespace

CharRoots char_roots(double lambda, double mu1, double delta) {
    if (!(lambda > 0) || !(mu1 > 0) || !(delta > 0))
        throw InvalidParams("char_roots requires positive lambda, mu1, delta");
    const double s = (lambda + mu1 + 1.0 / delta) / mu1;
    const double r2 = 0.5 * (s + std::sqrt(s * s - 4.0 * lambda / mu1));
    // r1 via the product of roots; the subtractive form cancels badly
    // when 1/delta is small.
    return CharRoots{(lambda / mu1) / r2, r2};
}

Metrics mmk_baseline(const SystemParams& p, int servers) {
    p.validate();
    if (servers < 1) throw InvalidParams("servers must be >= 1");
    const double k = servers;
    require_stable(p.lambda < k * p.mu, "mmk requires lambda < servers*mu");
    const double a = p.lambda / p.mu;
    const double rho = a / k;
    // Erlang C
    double term = 1.0, sum = 1.0;
    for (int j = 1; j < servers; ++j) {
        term *= a / j;
        sum += term;
    }
    term *= a / servers;  // a^k / k!
    const double pwait = term / ((1.0 - rho) * sum + term);
    const double wq = pwait / (k * p.mu - p.lambda);
    return Metrics{1.0 / p.mu + wq, k * p.mu, {}};
}

Metrics single_hold_on(const SystemParams& p, const HoldOn& pol) {
    p.validate();
    validate(PolicySpec{pol});
    require_stable(p.lambda < p.mu, "hold-on requires lambda < mu");
    const double e = hold_factor(p.lambda, pol.k, pol.deterministic, pol.t);
    const double ld = p.lambda * p.delta;
    const double denom = e + ld;
    Metrics m;
    m.r = (1.0 / p.mu) / (1.0 - p.lambda / p.mu) + p.delta * (1.0 + ld) / denom;
    m.c = p.mu - (p.mu - p.lambda) / denom;
    return m;
}

Metrics single_batching(const SystemParams& p, int b) {
    p.validate();
    if (b < 1) throw InvalidParams("batching threshold b must be >= 1");
    require_stable(p.lambda < p.mu, "batching requires lambda < mu");
    const double ld = p.lambda * p.delta;
    Metrics m;
    m.r = (1.0 / p.mu) / (1.0 - p.lambda / p.mu) + p.delta +
          b * (b - 1.0) / (2.0 * p.lambda * (ld + b));
    m.c = p.mu - b * (p.mu - p.lambda) / (ld + b);
    return m;
}

SingleOptimal single_optimal_objective(const SystemParams& p) {
    p.validate();
    require_stable(p.lambda < p.mu, "single-server optimum requires lambda < mu");
    if (p.omega == 0)
        throw InvalidParams(
            "omega = 0 admits no finite optimal batching threshold "
            "(cost decreases toward lambda as b grows)");
    const double ld = p.lambda * p.delta;
    const double base =
        p.omega * (p.lambda / p.mu) / (1.0 - p.lambda / p.mu) + p.mu;

    // bracket(b) = omega*(lambda*Delta + b(b-1)/(2(lambda*Delta+b)))
    //              - b(mu-lambda)/(lambda*Delta+b)
    auto bracket = [&](double b) {
        return p.omega * (ld + b * (b - 1.0) / (2.0 * (ld + b))) -
               b * (p.mu - p.lambda) / (ld + b);
    };
    // The bracket is eventually increasing for omega > 0 (the quadratic
    // term grows like omega*b/2). Stop after it has risen for three
    // consecutive b past the running minimum.
    double best_val = bracket(1);
    long best_b = 1;
    int rising = 0;
    double prev = best_val;
    for (long b = 2; b < (1L << 40); ++b) {
        const double v = bracket(static_cast<double>(b));
        if (v < best_val) {
            best_val = v;
            best_b = b;
        }
        rising = (v > prev) ? rising + 1 : 0;
        prev = v;
        if (rising >= 3 && v > best_val) break;
    }

    SingleOptimal out{base, PolicySpec{AlwaysOn{1}}};
    if (best_val < 0) {
        out.value = base + best_val;
        out.best = PolicySpec{Batching{static_cast<int>(best_b)}};
    }
    return out;
}

Metrics single_statedep_rates(const SystemParams& p, const StateDepRates& pol) {
    p.validate();
    validate(PolicySpec{pol});
    check_positive_delta(p.delta);
    const int c = static_cast<int>(pol.rates.size());
    const double muc = pol.rates.back();
    require_stable(p.lambda < muc, "state-dep rates require lambda < mu_c");
    const double lam = p.lambda;
    const double e = hold_factor(lam, pol.k, pol.deterministic, pol.t);
    const double y = lam / (lam + 1.0 / p.delta);
    const double rho = lam / muc;
    const double geo1 = 1.0 / (1.0 - rho);
    const double geo2 = geo1 * geo1;

    // sum_{i=1}^{c-1} lambda^i / prod(mu) terms, plus the geometric tail
    double prod = 1.0, s_lin = 0.0, s_lin_i = 0.0;
    for (int i = 1; i < c; ++i) {
        prod *= lam / pol.rates[i - 1];
        s_lin += prod;
        s_lin_i += i * prod;
    }
    const double prod_c = prod * lam / muc;
    const double term_a = (s_lin + prod_c * geo1 + 1.0) * e;
    const double term_a_i = (s_lin_i + prod_c * (geo2 + (c - 1) * geo1)) * e;

    double term_b = 0.0, term_b_i = 0.0;
    double ypow = 1.0;
    for (int i = 1; i < c; ++i) {
        ypow *= y;
        double inner = 0.0, inner_i = 0.0, pr = 1.0;
        for (int l = 0; l <= c - 1 - i; ++l) {
            if (l > 0) pr *= lam / pol.rates[i + l - 1];
            inner += pr;
            inner_i += (i + l) * pr;
        }
        const double pr_full = pr * lam / muc;
        inner += pr_full * geo1;
        inner_i += pr_full * (geo2 + (c - 1) * geo1);
        term_b += ypow * inner;
        term_b_i += ypow * inner_i;
    }
    ypow *= y;  // y^c
    const double term_c = ypow * (lam * p.delta + 1.0) * geo1;
    const double term_c_i = std::pow(lam * p.delta, c) /
                            std::pow(lam * p.delta + 1.0, c - 1) *
                            (rho * geo2 + (lam * p.delta + c) * geo1);

    const double p0i = 1.0 / (term_a + term_b + term_c);
    const double mean_n = p0i * (term_a_i + term_b_i + term_c_i);
    return Metrics{mean_n / lam, muc * (1.0 - p0i), {}};
}

// ---------------------------------------------------------------------------
// Dual servers, one always allocated

namespace {

struct DualScaled {
    // All quantities scaled by p_{hB+}.
    double sum_bplus, sum_i_bplus;
    double sum_e, sum_i_e;
    double sum_b, sum_i_b;
};

// General 1 <= l <= h solution, built from the recurrences with powers
// of r2 kept nonpositive (anchor at i = h) so large h cannot overflow.
DualScaled dual_scaled(const SystemParams& p, const DualOneAlways& pol) {
    const double lam = p.lambda;
    const auto [r1, r2] = char_roots(lam, pol.mu1, p.delta);
    const int l = pol.l, h = pol.h, w = h - l;
    const double rho2 = lam / pol.mu2;
    const double q = r1 / r2;        // < 1
    const double inv2 = 1.0 / r2;    // < 1
    const double qw1 = std::pow(q, w + 1);
    const double denom_w = 1.0 - qw1;

    DualScaled out{};

    // B+ states, l..h-1: x_i = r2^{i-h} (1 - q^{i-l+1}) / (1 - q^{w+1});
    // tail i >= h: x_i = r1^{i-h}.
    {
        double r2pow = std::pow(inv2, w);  // r2^{l-h}
        double qpow = q;                   // q^{i-l+1} at i=l
        for (int i = l; i < h; ++i) {
            const double x = r2pow * (1.0 - qpow) / denom_w;
            out.sum_bplus += x;
            out.sum_i_bplus += i * x;
            r2pow *= r2;
            qpow *= q;
        }
        out.sum_bplus += 1.0 / (1.0 - r1);
        out.sum_i_bplus += h / (1.0 - r1) + r1 / ((1.0 - r1) * (1.0 - r1));
    }

    // E states, l..h: from the finite recurrence solution; i > h tail in
    // closed form through x_{hE}.
    double x_he = 0.0;
    {
        for (int i = l; i <= h; ++i) {
            // sum_{m=0}^{i-l-1} rho2^m and the mixed sum, all divided by
            // r2^{w+1} where a positive power would appear.
            double geo = 0.0, rp = 1.0;
            for (int m = 0; m < i - l; ++m) {
                geo += rp;
                rp *= rho2;
            }
            const double rho_il = rp;  // rho2^{i-l}
            const double t1 =
                (r2 - r1) * ((rho_il + geo) - rho_il * std::pow(inv2, w + 1));
            double t2 = 0.0;
            double rm = 1.0;
            for (int m = 0; m < i - l; ++m) {
                // (1-r1) r2^{i-l-m+1} / r2^{w+1} + (r2-1) r1^{i-l-m+1} / r2^{w+1}
                const int e2 = (i - l - m + 1) - (w + 1);  // <= 0 for i <= h
                t2 += rm * ((1.0 - r1) * std::pow(inv2, -e2) +
                            (r2 - 1.0) * std::pow(r1, i - l - m + 1) *
                                std::pow(inv2, w + 1));
                rm *= rho2;
            }
            const double x = (pol.mu1 / pol.mu2) * (t1 - t2) / denom_w;
            if (i < h) {
                out.sum_e += x;
                out.sum_i_e += i * x;
            } else {
                x_he = x;
            }
        }
        const double tail_e = x_he / (1.0 - rho2) +
                              (lam - r1 * pol.mu1) /
                                  ((pol.mu2 - lam) * (1.0 - r1));
        const double tail_i_e =
            x_he * (h - (h - 1) * rho2) / ((1.0 - rho2) * (1.0 - rho2)) +
            (1.0 / (pol.mu2 - lam)) * ((lam - r1 * pol.mu1) / (1.0 - r1)) *
                (h + 1.0 / (1.0 - rho2) + r1 / (1.0 - r1));
        out.sum_e += tail_e;
        out.sum_i_e += tail_i_e;
    }

    // B states, 0..h-1: x_i = G * sum of phi^m with phi = mu1/lambda,
    // via the downward recurrence t_{i-1} = phi*(t_i + [i >= l]).
    {
        const double phi = pol.mu1 / lam;
        const double g = (r2 - r1) / denom_w;
        double t = phi;  // t_{h-1}
        for (int i = h - 1; i >= 0; --i) {
            const double x = g * t;
            out.sum_b += x;
            out.sum_i_b += i * x;
            if (i > 0) t = phi * (t + (i >= l ? 1.0 : 0.0));
        }
    }
    return out;
}

}  // namespace

Metrics dual_one_always(const SystemParams& p, const DualOneAlways& pol) {
    p.validate();
    validate(PolicySpec{pol});
    check_positive_delta(p.delta);
    require_stable(p.lambda < pol.mu2, "dual one-always requires lambda < mu2");
    const DualScaled s = dual_scaled(p, pol);
    const double total = s.sum_bplus + s.sum_e + s.sum_b;
    const double ph = 1.0 / total;
    const double mean_n = ph * (s.sum_i_bplus + s.sum_i_e + s.sum_i_b);
    Metrics m;
    m.r = mean_n / p.lambda;
    m.c = pol.mu1 * ph * s.sum_b + pol.mu2 * ph * (s.sum_bplus + s.sum_e);
    return m;
}

Metrics dual_one_always_lh(const SystemParams& p, const DualOneAlways& pol) {
    p.validate();
    validate(PolicySpec{pol});
    check_positive_delta(p.delta);
    if (pol.l != pol.h) throw InvalidParams("specialized path requires l == h");
    require_stable(p.lambda < pol.mu2, "dual one-always requires lambda < mu2");
    const double lam = p.lambda;
    const int h = pol.h;
    const auto [r1, r2] = char_roots(lam, pol.mu1, p.delta);
    const double phi = pol.mu1 / lam;

    // Geometric factors over the B states degenerate at mu1 == lambda:
    // (1 - phi^h)/(1 - phi) -> h and the mean-term factor
    // ((h(1-phi)+1)phi^h - 1)/(1-phi)^2 -> -h(h+1)/2.
    double sum_b_factor, mean_b_factor;
    if (std::abs(phi - 1.0) <= 1e-9) {
        sum_b_factor = h;
        mean_b_factor = -0.5 * h * (h + 1.0);
    } else {
        const double phih = std::pow(phi, h);
        sum_b_factor = (1.0 - phih) / (1.0 - phi);
        mean_b_factor =
            ((h * (1.0 - phi) + 1.0) * phih - 1.0) / ((1.0 - phi) * (1.0 - phi));
    }

    const double den = 1.0 + (lam / r1 - pol.mu1) / (pol.mu2 - lam) +
                       ((1.0 - r1) / r1) * sum_b_factor;
    const double ph_b = (1.0 - r1) / den;
    const double mean_n =
        h + r1 / (1.0 - r1) +
        (lam * (lam / r1 - pol.mu1) / ((pol.mu2 - lam) * (pol.mu2 - lam)) +
         ((1.0 - r1) / r1) * mean_b_factor - sum_b_factor) /
            den;

    const double sum_b = ph_b * (1.0 / r1) * sum_b_factor;
    const double sum_bplus = ph_b / (1.0 - r1);
    const double sum_e =
        ph_b * (lam / r1 - pol.mu1) / ((pol.mu2 - lam) * (1.0 - r1));
    Metrics m;
    m.r = mean_n / lam;
    m.c = pol.mu1 * sum_b + pol.mu2 * (sum_bplus + sum_e);
    return m;
}

// ---------------------------------------------------------------------------
// Dual servers, both dynamically allocated

namespace {

struct DualBothScaled {
    // All sums scaled by p_{0I}.
    double sd, sid;    // D states
    double sb, sib;    // B states
    double se, sie;    // E states
    double p1d, p1b;
};

// Main branch, valid when 2mu - lambda - 2/Delta is not ~0.
DualBothScaled dual_both_main(double lam, double mu, double delta) {
    const auto [r1, r2] = char_roots(lam, mu, delta);
    const double d1 = lam + 1.0 / delta;
    const double d2 = lam + 2.0 / delta;
    const double q = 2.0 * mu - lam - 2.0 / delta;
    const double s = r1 - (lam * delta / 2.0) * (1.0 - r1);
    const double half_ld = 1.0 + lam * delta / 2.0;

    DualBothScaled out{};
    out.sd = (lam / d1) * half_ld;
    out.sid = (lam / d1) * half_ld * half_ld;
    out.sb = lam / (mu * (1.0 - r1)) +
             (d2 * lam / d1) * (lam * delta - 2.0 * r1 / (1.0 - r1)) / q;
    out.sib = lam / (mu * (1.0 - r1) * (1.0 - r1)) +
              (2.0 * d2 * lam / d1) *
                  (half_ld * half_ld - 1.0 / ((1.0 - r1) * (1.0 - r1))) / q;

    const double ab =
        (lam * lam * lam * (r1 + mu * delta * (1.0 - r1)) +
         lam * lam * (4.0 * mu + 5.0 * r1 / delta - 8.0 * r1 * mu) +
         (4.0 * lam / delta) * (mu + 2.0 * r1 / delta - 4.0 * r1 * mu) +
         (4.0 * r1 / delta) *
             (1.0 / (delta * delta) - 2.0 * mu / delta - mu * mu)) /
        (d1 * q * q * s);
    out.se = ab * (lam * lam / (2.0 * mu * (2.0 * mu - lam))) +
             (d2 * lam * lam / (d1 * q * q)) * half_ld +
             lam * (2.0 * mu / delta + d1 * d2) * r1 * r1 /
                 (2.0 * mu * d1 * q * s * (1.0 - r1));
    out.sie =
        ab * (lam * lam * (2.0 - lam / (2.0 * mu)) /
              ((2.0 * mu - lam) * (2.0 * mu - lam))) +
        (d2 * lam * lam / (d1 * q * q)) * half_ld * (2.0 + lam * delta / 2.0) +
        lam * (2.0 * mu / delta + d1 * d2) * r1 * r1 * (2.0 - r1) /
            (2.0 * mu * d1 * q * s * (1.0 - r1) * (1.0 - r1));

    out.p1d = lam / d1;
    out.p1b = lam / mu;
    return out;
}

// Degenerate branch at mu = lambda/2 + 1/Delta, where the particular-
// solution ratio coincides with r1 and the E-state family becomes
// (c0 + c1 i + c2 i^2) g^i with g = lambda/(2 mu).
DualBothScaled dual_both_degenerate(double lam, double mu, double delta) {
    const double d1 = lam + 1.0 / delta;
    const double d2 = lam + 2.0 / delta;
    const double g = lam / d2;
    const double a = 2.0 * lam / d2;
    const double b = 4.0 * lam / ((lam + 4.0 / delta) * (lam * delta + 1.0));
    const double ld = lam * delta;
    const double den = ld * ld + 5.0 * ld + 4.0;
    const double c0 = (-2.0 * ld * ld - 7.0 * ld - 4.0) / den;
    const double c1 = 2.0 * (ld * ld + 3.0 * ld + 1.0) / den;
    const double c2 = (ld + 2.0) / den;
    const double half_ld = 1.0 + ld / 2.0;
    const double u = 1.0 - g;

    // sum_{i>=2} i^j g^i
    const double s0 = g * g / u;
    const double s1 = g * g * (2.0 - g) / (u * u);
    const double s2 = g * g * (g * g - 3.0 * g + 4.0) / (u * u * u);
    const double s3 =
        g * g * (-g * g * g + 4.0 * g * g - 5.0 * g + 8.0) / (u * u * u * u);

    DualBothScaled out{};
    out.sd = (lam / d1) * half_ld;
    out.sid = (lam / d1) * half_ld * half_ld;
    out.sb = a / u + b * g / (u * u);
    out.sib = a / (u * u) + 2.0 * b * g / (u * u * u);
    out.se = c0 * s0 + c1 * s1 + c2 * s2;
    out.sie = c0 * s1 + c1 * s2 + c2 * s3;
    out.p1d = lam / d1;
    out.p1b = lam / mu;
    return out;
}

}  // namespace

Metrics dual_both_dynamic(const SystemParams& p) {
    p.validate();
    check_positive_delta(p.delta);
    require_stable(p.lambda < 2.0 * p.mu, "dual both-dynamic requires lambda < 2mu");
    const double q = 2.0 * p.mu - p.lambda - 2.0 / p.delta;
    const bool degenerate = std::abs(q) <= 1e-9 * 2.0 * p.mu;
    const DualBothScaled s = degenerate
                                 ? dual_both_degenerate(p.lambda, p.mu, p.delta)
                                 : dual_both_main(p.lambda, p.mu, p.delta);
    const double p0i = 1.0 / (1.0 + s.sd + s.sb + s.se);
    Metrics m;
    m.r = p0i * (s.sid + s.sib + s.sie) / p.lambda;
    m.c = 2.0 * p.mu * p0i * (s.sd + s.sb + s.se) -
          p.mu * p0i * (s.p1d + s.p1b);
    return m;
}

Metrics server_per_request(const SystemParams& p) {
    p.validate();
    return Metrics{1.0 / p.mu + p.delta, p.lambda * (1.0 + p.delta * p.mu), {}};
}

// ---------------------------------------------------------------------------
// Unlimited-server policies (product-form solutions; all sums closed)

namespace {

struct ReactiveSums {
    double norm;     // normalizing constant of the waiting marginal
    double mean_i;   // E[waiting]
    double mean_min; // E[min(waiting, s)]
};

ReactiveSums reactive_sums(double lam, double delta, int s) {
    // f_i = prod_{m=0}^{i} lambda/(lambda + min(m,s)/Delta), i = 0..s
    double f = 1.0;
    double norm = 0.0, head_i = 0.0;
    for (int i = 0; i < s; ++i) {
        norm += f;
        head_i += i * f;
        f *= lam / (lam + (i + 1) / delta);
    }
    // f now equals f_s
    const double xs = lam / (lam + s / delta);
    const double g1 = 1.0 / (1.0 - xs);
    norm += f * g1;
    const double mean_i = head_i + f * (s * g1 + xs * g1 * g1);
    const double mean_min = head_i + f * s * g1;
    return ReactiveSums{norm, mean_i, mean_min};
}

}  // namespace

Metrics reactive_unlimited(const SystemParams& p, int s) {
    p.validate();
    if (s < 1) throw InvalidParams("setup limit s must be >= 1");
    check_positive_delta(p.delta);
    const ReactiveSums rs = reactive_sums(p.lambda, p.delta, s);
    Metrics m;
    m.r = 1.0 / p.mu + rs.mean_i / (p.lambda * rs.norm);
    m.c = p.lambda + p.mu * rs.mean_min / rs.norm;
    return m;
}

Metrics proactive_unlimited(const SystemParams& p) {
    p.validate();
    check_positive_delta(p.delta);
    const double r = char_roots(p.lambda, p.mu, p.delta).r1;
    Metrics m;
    m.r = (1.0 / p.mu) * ((p.mu + 1.0 / p.delta) / p.lambda) * (r / (1.0 - r));
    m.c = p.mu * (1.0 + r) + (1.0 / p.delta) * (r / (1.0 - r));
    return m;
}

Metrics evaluate(const PolicySpec& spec, const SystemParams& p) {
    struct V {
        const SystemParams& p;
        Metrics operator()(const AlwaysOn& s) const { return mmk_baseline(p, s.servers); }
        Metrics operator()(const HoldOn& s) const { return single_hold_on(p, s); }
        Metrics operator()(const Batching& s) const { return single_batching(p, s.b); }
        Metrics operator()(const DualOneAlways& s) const { return dual_one_always(p, s); }
        Metrics operator()(const DualBothDynamic&) const { return dual_both_dynamic(p); }
        Metrics operator()(const StateDepRates& s) const { return single_statedep_rates(p, s); }
        Metrics operator()(const ServerPerRequest&) const { return server_per_request(p); }
        Metrics operator()(const ReactiveUnlimited& s) const { return reactive_unlimited(p, s.s); }
        Metrics operator()(const ProactiveUnlimited&) const { return proactive_unlimited(p); }
        Metrics operator()(const SmdpTablePolicy&) const {
            throw InvalidParams("policy tables have no closed form; use smdp::stationary_metrics");
        }
    };
    return std::visit(V{p}, spec);
}

// ---------------------------------------------------------------------------
// State-probability diagnostics

namespace {

constexpr int kMaxDiagStates = 4'000'000;

[[noreturn]] void diag_overflow() {
    throw ConvergenceError("state-probability truncation did not reach the tail tolerance");
}

}  // namespace

StateProbVector hold_on_state_probs(const SystemParams& p, const HoldOn& pol,
                                    double eps) {
    p.validate();
    validate(PolicySpec{pol});
    if (pol.deterministic)
        throw InvalidParams("state probabilities require an Erlang holding-on shape");
    check_positive_delta(p.delta);
    require_stable(p.lambda < p.mu, "hold-on requires lambda < mu");
    const double lam = p.lambda, mu = p.mu;
    const double e = hold_factor(lam, pol.k, pol.deterministic, pol.t);
    const double ld = lam * p.delta;
    const double p0i = (1.0 - lam / mu) / (e + ld);
    const double y = lam / (lam + 1.0 / p.delta);

    StateProbVector out;
    out.push_back({"0I", p0i});
    double mass = p0i;
    if (pol.t > 0) {
        // p_{0Hj} = p0I (lambda T / k) ((lambda + k/T)/(k/T))^{k-j}
        const double step = (lam + pol.k / pol.t) / (pol.k / pol.t);
        double v = p0i * (lam * pol.t / pol.k);
        for (int j = pol.k; j >= 1; --j) {
            out.push_back({"0H" + std::to_string(j), v});
            mass += v;
            v *= step;
        }
    }
    // p_iD = p0I y^i ; p_iA = p_i - p_iD with
    // p_i = p0I ((lam/mu)^i E + B_i), B_i = (lam/mu) B_{i-1} + y^i.
    double apow = e;   // (lam/mu)^i * E
    double bsum = 0.0; // B_i
    double ypow = 1.0;
    for (int i = 1; i <= kMaxDiagStates; ++i) {
        apow *= lam / mu;
        ypow *= y;
        bsum = (lam / mu) * bsum + ypow;
        const double pid = p0i * ypow;
        const double pia = p0i * (apow + bsum - ypow);
        out.push_back({std::to_string(i) + "D", pid});
        out.push_back({std::to_string(i) + "A", pia});
        mass += pid + pia;
        if (1.0 - mass < eps) return out;
    }
    diag_overflow();
}

StateProbVector dual_one_always_state_probs(const SystemParams& p,
                                            const DualOneAlways& pol,
                                            double eps) {
    p.validate();
    validate(PolicySpec{pol});
    check_positive_delta(p.delta);
    require_stable(p.lambda < pol.mu2, "dual one-always requires lambda < mu2");
    const double lam = p.lambda;
    const auto [r1, r2] = char_roots(lam, pol.mu1, p.delta);
    const int l = pol.l, h = pol.h, w = h - l;
    const double rho2 = lam / pol.mu2;
    const double q = r1 / r2, inv2 = 1.0 / r2;
    const double denom_w = 1.0 - std::pow(q, w + 1);
    const DualScaled s = dual_scaled(p, pol);
    const double ph = 1.0 / (s.sum_bplus + s.sum_e + s.sum_b);

    StateProbVector out;
    double mass = 0.0;
    auto push = [&](std::string label, double v) {
        out.push_back({std::move(label), v});
        mass += v;
    };

    // B states
    {
        const double phi = pol.mu1 / lam;
        const double g = (r2 - r1) / denom_w;
        std::vector<double> t(h);
        t[h - 1] = phi;
        for (int i = h - 1; i > 0; --i) t[i - 1] = phi * (t[i] + (i >= l ? 1.0 : 0.0));
        for (int i = 0; i < h; ++i) push(std::to_string(i) + "B", ph * g * t[i]);
    }
    // B+ finite part and E finite part
    std::vector<double> xe(h + 1, 0.0);
    for (int i = l; i <= h; ++i) {
        double geo = 0.0, rp = 1.0;
        for (int m = 0; m < i - l; ++m) {
            geo += rp;
            rp *= rho2;
        }
        const double t1 = (r2 - r1) * ((rp + geo) - rp * std::pow(inv2, w + 1));
        double t2 = 0.0, rm = 1.0;
        for (int m = 0; m < i - l; ++m) {
            const int e2 = (i - l - m + 1) - (w + 1);
            t2 += rm * ((1.0 - r1) * std::pow(inv2, -e2) +
                        (r2 - 1.0) * std::pow(r1, i - l - m + 1) * std::pow(inv2, w + 1));
            rm *= rho2;
        }
        xe[i] = (pol.mu1 / pol.mu2) * (t1 - t2) / denom_w;
    }
    for (int i = l; i < h; ++i) {
        const double xb = std::pow(inv2, h - i) * (1.0 - std::pow(q, i - l + 1)) / denom_w;
        push(std::to_string(i) + "B+", ph * xb);
        push(std::to_string(i) + "E", ph * xe[i]);
    }
    // tails from i = h upward:
    // p_iB+ = ph r1^{i-h};  p_iE = x_he rho2^{i-h} + ((lam - r1 mu1)/mu2) S_i
    // with S_i = sum_{m} r1^m rho2^{i-h-1-m}, S_{i+1} = rho2 S_i + r1^{i-h}.
    double r1pow = 1.0, rho2pow = 1.0, smix = 0.0;
    const double coef = (lam - r1 * pol.mu1) / pol.mu2;
    for (int i = h; i <= h + kMaxDiagStates; ++i) {
        const double pbp = ph * r1pow;
        const double pe = ph * (xe[h] * rho2pow + coef * smix);
        push(std::to_string(i) + "B+", pbp);
        push(std::to_string(i) + "E", pe);
        if (1.0 - mass < eps) return out;
        smix = rho2 * smix + r1pow;
        r1pow *= r1;
        rho2pow *= rho2;
    }
    diag_overflow();
}

StateProbVector dual_both_state_probs(const SystemParams& p, double eps) {
    p.validate();
    check_positive_delta(p.delta);
    require_stable(p.lambda < 2.0 * p.mu, "dual both-dynamic requires lambda < 2mu");
    const double lam = p.lambda, mu = p.mu, delta = p.delta;
    const double d1 = lam + 1.0 / delta;
    const double d2 = lam + 2.0 / delta;
    const double g = lam / d2;
    const double qdef = 2.0 * mu - lam - 2.0 / delta;
    const bool degenerate = std::abs(qdef) <= 1e-9 * 2.0 * mu;
    const DualBothScaled sums = degenerate ? dual_both_degenerate(lam, mu, delta)
                                           : dual_both_main(lam, mu, delta);
    const double p0i = 1.0 / (1.0 + sums.sd + sums.sb + sums.se);
    const double r1 = char_roots(lam, mu, delta).r1;

    StateProbVector out;
    double mass = 0.0;
    auto push = [&](std::string label, double v) {
        out.push_back({std::move(label), v});
        mass += v;
    };
    push("0I", p0i);

    const double ld = lam * delta;
    const double den = ld * ld + 5.0 * ld + 4.0;
    const double c0 = (-2.0 * ld * ld - 7.0 * ld - 4.0) / den;
    const double c1 = 2.0 * (ld * ld + 3.0 * ld + 1.0) / den;
    const double c2 = (ld + 2.0) / den;
    const double bb = 4.0 * lam / ((lam + 4.0 / delta) * (ld + 1.0));

    // main-branch E coefficients
    double alpha = 0.0, phi_c = 0.0, gamma = 0.0;
    if (!degenerate) {
        const double s = r1 - (ld / 2.0) * (1.0 - r1);
        alpha = (lam * lam * lam * (r1 + mu * delta * (1.0 - r1)) +
                 lam * lam * (4.0 * mu + 5.0 * r1 / delta - 8.0 * r1 * mu) +
                 (4.0 * lam / delta) * (mu + 2.0 * r1 / delta - 4.0 * r1 * mu) +
                 (4.0 * r1 / delta) * (1.0 / (delta * delta) - 2.0 * mu / delta - mu * mu)) /
                (d1 * qdef * qdef * s);
        phi_c = d2 * d2 * d2 / (d1 * qdef * qdef);
        gamma = lam * (2.0 * mu / delta + d1 * d2) /
                (2.0 * mu * d1 * qdef * s);
    }

    double gpow_im1 = 1.0;          // g^{i-1}
    double r1pow_im1 = 1.0;         // r1^{i-1}
    double halfpow = lam / (2.0 * mu);  // (lam/2mu)^i at i=1
    double gpow_i = g;              // g^i at i=1
    double r1pow_i = r1;            // r1^i at i=1
    for (int i = 1; i <= kMaxDiagStates; ++i) {
        const double pid = p0i * (lam / d1) * gpow_im1;
        double pib;
        if (degenerate) {
            pib = p0i * (2.0 * lam / d2 + bb * (i - 1)) * gpow_im1;
        } else {
            pib = p0i * (lam * r1pow_im1 / mu +
                         (2.0 * d2 * lam / d1) * (gpow_im1 - r1pow_im1) / qdef);
        }
        push(std::to_string(i) + "D", pid);
        push(std::to_string(i) + "B", pib);
        if (i >= 2) {
            double pie;
            if (degenerate) {
                pie = p0i * (c0 + c1 * i + c2 * double(i) * i) * gpow_i;
            } else {
                pie = p0i * (alpha * halfpow + phi_c * gpow_i + gamma * r1pow_i);
            }
            push(std::to_string(i) + "E", pie);
        }
        if (1.0 - mass < eps) return out;
        gpow_im1 = gpow_i;
        r1pow_im1 = r1pow_i;
        gpow_i *= g;
        r1pow_i *= r1;
        halfpow *= lam / (2.0 * mu);
    }
    diag_overflow();
}

StateProbVector reactive_state_probs(const SystemParams& p, int s, double eps) {
    p.validate();
    if (s < 1) throw InvalidParams("setup limit s must be >= 1");
    check_positive_delta(p.delta);
    const double lam = p.lambda;
    const ReactiveSums rs = reactive_sums(lam, p.delta, s);

    // waiting marginal until its tail < eps/2
    std::vector<double> pi;
    {
        double f = 1.0, mass = 0.0;
        for (int i = 0; mass < 1.0 - eps / 2; ++i) {
            if (i > kMaxDiagStates) diag_overflow();
            pi.push_back(f / rs.norm);
            mass += f / rs.norm;
            f *= lam / (lam + std::min(i + 1, s) / p.delta);
        }
    }
    // in-service marginal: Poisson(lam/mu)
    std::vector<double> pk;
    {
        const double a = lam / p.mu;
        double v = std::exp(-a), mass = 0.0;
        for (int k = 0; mass < 1.0 - eps / 2; ++k) {
            if (k > kMaxDiagStates) diag_overflow();
            pk.push_back(v);
            mass += v;
            v *= a / (k + 1);
        }
    }
    StateProbVector out;
    out.reserve(pi.size() * pk.size());
    for (size_t i = 0; i < pi.size(); ++i)
        for (size_t k = 0; k < pk.size(); ++k)
            out.push_back({"(" + std::to_string(i) + "," + std::to_string(k) + ")",
                           pi[i] * pk[k]});
    return out;
}

StateProbVector proactive_state_probs(const SystemParams& p, double eps) {
    p.validate();
    check_positive_delta(p.delta);
    const double r = char_roots(p.lambda, p.mu, p.delta).r1;
    const double a = r / (p.delta * p.mu * (1.0 - r));
    std::vector<double> pi;
    {
        double v = 1.0 - r, mass = 0.0;
        for (int i = 0; mass < 1.0 - eps / 2; ++i) {
            if (i > kMaxDiagStates) diag_overflow();
            pi.push_back(v);
            mass += v;
            v *= r;
        }
    }
    std::vector<double> pk;
    {
        double v = std::exp(-a), mass = 0.0;
        for (int k = 0; mass < 1.0 - eps / 2; ++k) {
            if (k > kMaxDiagStates) diag_overflow();
            pk.push_back(v);
            mass += v;
            v *= a / (k + 1);
        }
    }
    StateProbVector out;
    out.reserve(pi.size() * pk.size());
    for (size_t i = 0; i < pi.size(); ++i)
        for (size_t k = 0; k < pk.size(); ++k)
            out.push_back({"(" + std::to_string(i) + "," + std::to_string(k) + ")",
                           pi[i] * pk[k]});
    return out;
}

}  // namespace sap::analytic
