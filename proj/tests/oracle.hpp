#ifndef SAP_TESTS_ORACLE_HPP
#define SAP_TESTS_ORACLE_HPP

// Independent numerical oracle for the closed-form evaluators: each
// builder writes down a policy's state-transition diagram directly and
// the stationary distribution is obtained by a sparse linear solve.
// Nothing here touches the formulas under test.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace oracle {

struct Chain {
    std::vector<std::string> labels;
    std::vector<int> level;         // requests in system
    std::vector<double> cost_rate;  // allocated service rate
    std::vector<bool> interior;     // equation complete w.r.t. the infinite chain
    std::unordered_map<std::string, int> index;
    std::vector<std::vector<std::pair<int, double>>> out;

    int add(const std::string& label, int lvl, double cost, bool inter = true) {
        index.emplace(label, static_cast<int>(labels.size()));
        labels.push_back(label);
        level.push_back(lvl);
        cost_rate.push_back(cost);
        interior.push_back(inter);
        out.emplace_back();
        return static_cast<int>(labels.size()) - 1;
    }
    void rate(const std::string& from, const std::string& to, double q) {
        if (q <= 0) return;
        out[index.at(from)].emplace_back(index.at(to), q);
    }

    std::vector<double> stationary() const {
        const int n = static_cast<int>(labels.size());
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < n; ++i) {
            double total = 0;
            for (const auto& [j, q] : out[i]) {
                if (j < n - 1) trip.emplace_back(j, i, q);
                total += q;
            }
            if (i < n - 1) trip.emplace_back(i, i, -total);
        }
        for (int i = 0; i < n; ++i) trip.emplace_back(n - 1, i, 1.0);
        Eigen::SparseMatrix<double> A(n, n);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        b[n - 1] = 1.0;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw std::runtime_error("oracle chain solve failed");
        Eigen::VectorXd x = lu.solve(b);
        return std::vector<double>(x.data(), x.data() + n);
    }

    double mean_level(const std::vector<double>& p) const {
        double s = 0;
        for (size_t i = 0; i < p.size(); ++i) s += level[i] * p[i];
        return s;
    }
    double mean_cost(const std::vector<double>& p) const {
        double s = 0;
        for (size_t i = 0; i < p.size(); ++i) s += cost_rate[i] * p[i];
        return s;
    }
};

struct RC {
    double r;
    double c;
};

inline RC metrics(const Chain& ch, double lambda) {
    const auto p = ch.stationary();
    return {ch.mean_level(p) / lambda, ch.mean_cost(p)};
}

// Largest relative imbalance |inflow - outflow| / flow scale over the
// interior states, for an externally supplied probability assignment
// (e.g. the closed-form state probabilities). States absent from the
// map contribute zero probability.
struct ResidualReport {
    double max_residual = 0;
    double checked_mass = 0;
};
inline ResidualReport balance_residual(
    const Chain& ch, const std::unordered_map<std::string, double>& probs) {
    const int n = static_cast<int>(ch.labels.size());
    auto prob = [&](int i) {
        const auto it = probs.find(ch.labels[i]);
        return it == probs.end() ? 0.0 : it->second;
    };
    std::vector<double> inflow(n, 0.0), outflow(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double pi = prob(i);
        for (const auto& [j, q] : ch.out[i]) {
            outflow[i] += pi * q;
            inflow[j] += pi * q;
        }
    }
    ResidualReport rep;
    for (int i = 0; i < n; ++i) {
        if (!ch.interior[i]) continue;
        const double scale = std::max({inflow[i], outflow[i], 1e-300});
        rep.max_residual = std::max(rep.max_residual,
                                    std::abs(inflow[i] - outflow[i]) / scale);
        rep.checked_mass += prob(i);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Chain builders (labels match the analytic diagnostics)

inline std::string lbl(int i, const char* tag) { return std::to_string(i) + tag; }

// Single server with Erlang-k holding-on (finite k only).
inline Chain holdon_chain(double lam, double mu, double delta, int k, double T,
                          int N) {
    Chain ch;
    ch.add("0I", 0, 0.0);
    if (T > 0)
        for (int j = 1; j <= k; ++j) ch.add("0H" + std::to_string(j), 0, mu);
    for (int i = 1; i <= N; ++i) ch.add(lbl(i, "D"), i, mu, i < N);
    for (int i = 1; i <= N; ++i) ch.add(lbl(i, "A"), i, mu, i < N);
    ch.rate("0I", "1D", lam);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "D"), lbl(i + 1, "D"), lam);
    for (int i = 1; i <= N; ++i) ch.rate(lbl(i, "D"), lbl(i, "A"), 1.0 / delta);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "A"), lbl(i + 1, "A"), lam);
    for (int i = 2; i <= N; ++i) ch.rate(lbl(i, "A"), lbl(i - 1, "A"), mu);
    if (T > 0) {
        ch.rate("1A", "0H1", mu);
        for (int j = 1; j < k; ++j)
            ch.rate("0H" + std::to_string(j), "0H" + std::to_string(j + 1), k / T);
        ch.rate("0H" + std::to_string(k), "0I", k / T);
        for (int j = 1; j <= k; ++j) ch.rate("0H" + std::to_string(j), "1A", lam);
    } else {
        ch.rate("1A", "0I", mu);
    }
    return ch;
}

// Immediate deallocation with allocation triggered at b arrivals.
inline Chain batching_chain(double lam, double mu, double delta, int b, int N) {
    Chain ch;
    for (int i = 0; i < b; ++i) ch.add(lbl(i, "W"), i, 0.0);
    for (int i = b; i <= N; ++i) ch.add(lbl(i, "D"), i, mu, i < N);
    for (int i = 1; i <= N; ++i) ch.add(lbl(i, "A"), i, mu, i < N);
    for (int i = 0; i + 1 < b; ++i) ch.rate(lbl(i, "W"), lbl(i + 1, "W"), lam);
    ch.rate(lbl(b - 1, "W"), lbl(b, "D"), lam);
    for (int i = b; i < N; ++i) ch.rate(lbl(i, "D"), lbl(i + 1, "D"), lam);
    for (int i = b; i <= N; ++i) ch.rate(lbl(i, "D"), lbl(i, "A"), 1.0 / delta);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "A"), lbl(i + 1, "A"), lam);
    for (int i = 2; i <= N; ++i) ch.rate(lbl(i, "A"), lbl(i - 1, "A"), mu);
    ch.rate("1A", "0W", mu);
    return ch;
}

// Single allocation unit with queue-length dependent service rates.
inline Chain statedep_chain(double lam, const std::vector<double>& rates,
                            double delta, int k, double T, int N) {
    const int c = static_cast<int>(rates.size());
    const double muc = rates[c - 1];
    auto mu_at = [&](int i) { return rates[std::min(i, c) - 1]; };
    Chain ch;
    ch.add("0I", 0, 0.0);
    if (T > 0)
        for (int j = 1; j <= k; ++j) ch.add("0H" + std::to_string(j), 0, muc);
    for (int i = 1; i <= N; ++i) ch.add(lbl(i, "D"), i, muc, i < N);
    for (int i = 1; i <= N; ++i) ch.add(lbl(i, "A"), i, muc, i < N);
    ch.rate("0I", "1D", lam);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "D"), lbl(i + 1, "D"), lam);
    for (int i = 1; i <= N; ++i) ch.rate(lbl(i, "D"), lbl(i, "A"), 1.0 / delta);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "A"), lbl(i + 1, "A"), lam);
    for (int i = 2; i <= N; ++i) ch.rate(lbl(i, "A"), lbl(i - 1, "A"), mu_at(i));
    if (T > 0) {
        ch.rate("1A", "0H1", mu_at(1));
        for (int j = 1; j < k; ++j)
            ch.rate("0H" + std::to_string(j), "0H" + std::to_string(j + 1), k / T);
        ch.rate("0H" + std::to_string(k), "0I", k / T);
        for (int j = 1; j <= k; ++j) ch.rate("0H" + std::to_string(j), "1A", lam);
    } else {
        ch.rate("1A", "0I", mu_at(1));
    }
    return ch;
}

// Dual servers, baseline always allocated; extra requested at h,
// released below l.
inline Chain dual_one_always_chain(double lam, double mu1, double mu2,
                                   double delta, int l, int h, int N) {
    Chain ch;
    for (int i = 0; i < h; ++i) ch.add(lbl(i, "B"), i, mu1);
    for (int i = l; i <= N; ++i) ch.add(lbl(i, "B+"), i, mu2, i < N);
    for (int i = l; i <= N; ++i) ch.add(lbl(i, "E"), i, mu2, i < N);
    for (int i = 0; i + 1 < h; ++i) ch.rate(lbl(i, "B"), lbl(i + 1, "B"), lam);
    ch.rate(lbl(h - 1, "B"), lbl(h, "B+"), lam);
    for (int i = 1; i < h; ++i) ch.rate(lbl(i, "B"), lbl(i - 1, "B"), mu1);
    for (int i = l; i < N; ++i) ch.rate(lbl(i, "B+"), lbl(i + 1, "B+"), lam);
    for (int i = l + 1; i <= N; ++i) ch.rate(lbl(i, "B+"), lbl(i - 1, "B+"), mu1);
    ch.rate(lbl(l, "B+"), lbl(l - 1, "B"), mu1);
    for (int i = l; i <= N; ++i) ch.rate(lbl(i, "B+"), lbl(i, "E"), 1.0 / delta);
    for (int i = l; i < N; ++i) ch.rate(lbl(i, "E"), lbl(i + 1, "E"), lam);
    for (int i = l + 1; i <= N; ++i) ch.rate(lbl(i, "E"), lbl(i - 1, "E"), mu2);
    ch.rate(lbl(l, "E"), lbl(l - 1, "B"), mu2);
    return ch;
}

// Dual servers, both dynamically allocated.
inline Chain dual_both_chain(double lam, double mu, double delta, int N) {
    Chain ch;
    ch.add("0I", 0, 0.0);
    for (int i = 1; i <= N; ++i)
        ch.add(lbl(i, "D"), i, std::min(i, 2) * mu, i < N);
    for (int i = 1; i <= N; ++i)
        ch.add(lbl(i, "B"), i, (i >= 2 ? 2.0 : 1.0) * mu, i < N);
    for (int i = 2; i <= N; ++i) ch.add(lbl(i, "E"), i, 2.0 * mu, i < N);
    ch.rate("0I", "1D", lam);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "D"), lbl(i + 1, "D"), lam);
    for (int i = 1; i <= N; ++i)
        ch.rate(lbl(i, "D"), lbl(i, "B"), std::min(i, 2) / delta);
    for (int i = 1; i < N; ++i) ch.rate(lbl(i, "B"), lbl(i + 1, "B"), lam);
    for (int i = 2; i <= N; ++i) ch.rate(lbl(i, "B"), lbl(i - 1, "B"), mu);
    ch.rate("1B", "0I", mu);
    for (int i = 2; i <= N; ++i) ch.rate(lbl(i, "B"), lbl(i, "E"), 1.0 / delta);
    for (int i = 2; i < N; ++i) ch.rate(lbl(i, "E"), lbl(i + 1, "E"), lam);
    for (int i = 3; i <= N; ++i) ch.rate(lbl(i, "E"), lbl(i - 1, "E"), 2.0 * mu);
    ch.rate("2E", "1B", 2.0 * mu);
    return ch;
}

inline std::string pair_lbl(int i, int k) {
    return "(" + std::to_string(i) + "," + std::to_string(k) + ")";
}

// Reactive unlimited: i waiting, k in service, setups min(i,s).
inline Chain reactive_chain(double lam, double mu, double delta, int s, int I,
                            int K) {
    Chain ch;
    for (int i = 0; i <= I; ++i)
        for (int k = 0; k <= K; ++k)
            ch.add(pair_lbl(i, k), i + k, (k + std::min(i, s)) * mu,
                   i < I && k < K);
    for (int i = 0; i <= I; ++i)
        for (int k = 0; k <= K; ++k) {
            if (i < I) ch.rate(pair_lbl(i, k), pair_lbl(i + 1, k), lam);
            if (k > 0) {
                if (i > 0)
                    ch.rate(pair_lbl(i, k), pair_lbl(i - 1, k), k * mu);
                else
                    ch.rate(pair_lbl(0, k), pair_lbl(0, k - 1), k * mu);
            }
            if (i > 0 && k < K)
                ch.rate(pair_lbl(i, k), pair_lbl(i - 1, k + 1),
                        std::min(i, s) / delta);
        }
    return ch;
}

// Proactive unlimited: k+1 allocated, k+i requests, one setup iff i >= 1.
inline Chain proactive_chain(double lam, double mu, double delta, int I, int K) {
    Chain ch;
    for (int i = 0; i <= I; ++i)
        for (int k = 0; k <= K; ++k)
            ch.add(pair_lbl(i, k), i + k, (k + 1 + (i >= 1 ? 1 : 0)) * mu,
                   i < I && k < K);
    for (int i = 0; i <= I; ++i)
        for (int k = 0; k <= K; ++k) {
            if (i < I) ch.rate(pair_lbl(i, k), pair_lbl(i + 1, k), lam);
            const int busy = std::min(k + i, k + 1);
            if (k + i > 0) {
                if (i >= 1)
                    ch.rate(pair_lbl(i, k), pair_lbl(i - 1, k), busy * mu);
                else
                    ch.rate(pair_lbl(0, k), pair_lbl(0, k - 1), busy * mu);
            }
            if (i >= 1 && k < K)
                ch.rate(pair_lbl(i, k), pair_lbl(i - 1, k + 1), 1.0 / delta);
        }
    return ch;
}

// M/M/k with all servers allocated.
inline Chain mmk_chain(double lam, double mu, int servers, int N) {
    Chain ch;
    for (int i = 0; i <= N; ++i)
        ch.add(std::to_string(i), i, servers * mu, i < N);
    for (int i = 0; i < N; ++i) ch.rate(std::to_string(i), std::to_string(i + 1), lam);
    for (int i = 1; i <= N; ++i)
        ch.rate(std::to_string(i), std::to_string(i - 1), std::min(i, servers) * mu);
    return ch;
}

}  // namespace oracle

#endif
