#include "sap/pi.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace sap::pi {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

struct PolicyChain {
    std::vector<std::vector<Transition>> out;  // per state
    std::vector<double> reward;
    std::vector<double> outrate;
};

PolicyChain build_chain(const DecisionProcess& dp, const std::vector<int>& policy) {
    const int n = dp.num_states();
    PolicyChain ch;
    ch.out.resize(n);
    ch.reward.resize(n);
    ch.outrate.assign(n, 0.0);
    std::vector<Transition> buf;
    for (int s = 0; s < n; ++s) {
        buf.clear();
        double rw = 0;
        dp.transitions(s, policy[s], buf, rw);
        ch.reward[s] = rw;
        ch.out[s] = buf;
        for (const auto& t : buf) ch.outrate[s] += t.rate;
        if (!(ch.outrate[s] > 0))
            throw SingularChainError("state with zero outflow under policy");
    }
    return ch;
}

// Solve A x = b either directly or iteratively. Accuracy is judged by
// normwise backward error: every residual entry must be small against
// the largest term magnitude |A||x| + |b| in the system, the criterion
// LU with iterative refinement can actually guarantee when the relative
// values span many orders of magnitude.
Vec solve_sparse(const SpMat& A, const Vec& b, const Options& opts,
                 double residual_scale) {
    const auto ok = [&](const Vec& x) {
        const Vec absx = x.cwiseAbs();
        Vec den = b.cwiseAbs();
        for (int k = 0; k < A.outerSize(); ++k)
            for (SpMat::InnerIterator it(A, k); it; ++it)
                den[it.row()] += std::abs(it.value()) * absx[it.col()];
        const double scale = std::max({1.0, residual_scale, den.maxCoeff()});
        return (A * x - b).cwiseAbs().maxCoeff() <= opts.residual_tol * scale;
    };
    if (A.rows() > opts.direct_solve_limit) {
        Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
        it.preconditioner().setDroptol(1e-7);
        it.preconditioner().setFillfactor(30);
        it.setTolerance(1e-14);
        it.setMaxIterations(4000);
        it.compute(A);
        if (it.info() == Eigen::Success) {
            Vec x = it.solve(b);
            if (ok(x)) return x;
        }
        // fall through to the direct factorization
    }
    Eigen::SparseLU<SpMat> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw SingularChainError("singular value-determination system (chain not unichain?)");
    Vec x = lu.solve(b);
    for (int pass = 0; pass < 3 && !ok(x); ++pass) {
        Vec corr = lu.solve(b - A * x);
        x += corr;
    }
    if (!ok(x)) throw ConvergenceError("value-determination residual above tolerance");
    return x;
}

}  // namespace

ValueSolution value_determination(const DecisionProcess& dp,
                                  const std::vector<int>& policy,
                                  const Options& opts) {
    const int n = dp.num_states();
    const int ref = dp.reference_state();
    const PolicyChain ch = build_chain(dp, policy);

    // unknowns: x[0] = gain, x[1..] = v[s] for s != ref
    auto col = [&](int s) { return s < ref ? s + 1 : s; };  // only for s != ref
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * 5);
    Vec b(n);
    for (int s = 0; s < n; ++s) {
        trip.emplace_back(s, 0, 1.0);
        if (s != ref) trip.emplace_back(s, col(s), ch.outrate[s]);
        for (const auto& t : ch.out[s])
            if (t.to != ref) trip.emplace_back(s, col(t.to), -t.rate);
        b[s] = ch.reward[s];
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());

    double scale = 1.0;
    for (int s = 0; s < n; ++s) scale = std::max(scale, std::abs(ch.reward[s]));
    const Vec x = solve_sparse(A, b, opts, scale);

    ValueSolution sol;
    sol.gain = x[0];
    sol.values.assign(n, 0.0);
    for (int s = 0; s < n; ++s)
        if (s != ref) sol.values[s] = x[col(s)];

    // every equation must hold to the system's backward-error scale
    std::vector<double> resid(n);
    double den_max = 1.0;
    for (int s = 0; s < n; ++s) {
        double lhs = sol.gain;
        double den = std::abs(sol.gain) + std::abs(ch.reward[s]);
        for (const auto& t : ch.out[s]) {
            lhs -= t.rate * (sol.values[t.to] - sol.values[s]);
            den += t.rate * (std::abs(sol.values[t.to]) + std::abs(sol.values[s]));
        }
        resid[s] = std::abs(lhs - ch.reward[s]);
        den_max = std::max(den_max, den);
    }
    const double tol =
        opts.residual_tol * std::max(den_max, std::abs(sol.gain));
    for (int s = 0; s < n; ++s)
        if (resid[s] > tol)
            throw ConvergenceError("value-determination equation residual above tolerance");
    return sol;
}

std::pair<std::vector<int>, bool> improve(const DecisionProcess& dp,
                                          const std::vector<int>& policy,
                                          const ValueSolution& sol,
                                          const Options& opts) {
    const int n = dp.num_states();
    std::vector<int> next(n);
    bool changed = false;
    std::vector<int> acts;
    std::vector<Transition> buf;
    for (int s = 0; s < n; ++s) {
        dp.feasible_actions(s, acts);
        double best = -std::numeric_limits<double>::infinity();
        int best_a = policy[s];
        double cur_score = -std::numeric_limits<double>::infinity();
        for (int a : acts) {
            buf.clear();
            double rw = 0;
            dp.transitions(s, a, buf, rw);
            double qsum = 0, qv = 0;
            for (const auto& t : buf) {
                qsum += t.rate;
                qv += t.rate * sol.values[t.to];
            }
            const double score = (rw - sol.gain + qv) / qsum;
            if (a == policy[s]) cur_score = score;
            if (score > best) {
                best = score;
                best_a = a;
            }
        }
        const double tol = opts.tie_tol_rel * (1.0 + std::abs(best));
        if (cur_score >= best - tol) {
            next[s] = policy[s];
        } else {
            next[s] = best_a;
            changed = true;
        }
    }
    return {std::move(next), changed};
}

Result policy_iteration(const DecisionProcess& dp, std::vector<int> initial,
                        const Options& opts) {
    Result res;
    res.policy = std::move(initial);
    for (int it = 1; it <= opts.max_iters; ++it) {
        ValueSolution sol = value_determination(dp, res.policy, opts);
        res.gain = sol.gain;
        res.values = sol.values;
        res.iterations = it;
        res.objective_history.push_back(-sol.gain);
        auto [next, changed] = improve(dp, res.policy, sol, opts);
        if (!changed) return res;
        res.policy = std::move(next);
    }
    throw ConvergenceError("policy iteration did not converge within max_iters");
}

std::vector<double> stationary_distribution(const DecisionProcess& dp,
                                            const std::vector<int>& policy) {
    const int n = dp.num_states();
    const PolicyChain ch = build_chain(dp, policy);

    // Tarjan SCC, iterative.
    std::vector<int> comp(n, -1), low(n), disc(n, -1), stk;
    std::vector<uint8_t> onstk(n, 0);
    int timer = 0, ncomp = 0;
    struct Frame {
        int v;
        size_t ei;
    };
    std::vector<Frame> call;
    for (int root = 0; root < n; ++root) {
        if (disc[root] != -1) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            auto& fr = call.back();
            const int v = fr.v;
            if (fr.ei == 0) {
                disc[v] = low[v] = timer++;
                stk.push_back(v);
                onstk[v] = 1;
            }
            bool descended = false;
            while (fr.ei < ch.out[v].size()) {
                const int w = ch.out[v][fr.ei].to;
                ++fr.ei;
                if (disc[w] == -1) {
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (onstk[w]) low[v] = std::min(low[v], disc[w]);
            }
            if (descended) continue;
            if (low[v] == disc[v]) {
                while (true) {
                    const int w = stk.back();
                    stk.pop_back();
                    onstk[w] = 0;
                    comp[w] = ncomp;
                    if (w == v) break;
                }
                ++ncomp;
            }
            call.pop_back();
            if (!call.empty()) {
                const int parent = call.back().v;
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }

    // closed components: no edge leaving the component
    std::vector<uint8_t> closed(ncomp, 1);
    for (int s = 0; s < n; ++s)
        for (const auto& t : ch.out[s])
            if (comp[t.to] != comp[s]) closed[comp[s]] = 0;
    int closed_comp = -1;
    for (int c = 0; c < ncomp; ++c) {
        if (!closed[c]) continue;
        if (closed_comp != -1)
            throw SingularChainError("policy chain has multiple recurrent classes");
        closed_comp = c;
    }
    if (closed_comp == -1)
        throw SingularChainError("policy chain has no recurrent class");

    std::vector<int> members;
    std::vector<int> local(n, -1);
    for (int s = 0; s < n; ++s)
        if (comp[s] == closed_comp) {
            local[s] = static_cast<int>(members.size());
            members.push_back(s);
        }
    const int m = static_cast<int>(members.size());
    std::vector<double> out(n, 0.0);
    if (m == 1) {
        out[members[0]] = 1.0;
        return out;
    }

    // pi^T Q = 0 restricted to the class; last equation replaced by sum = 1
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < m - 1; ++j) trip.emplace_back(j, j, -ch.outrate[members[j]]);
    for (int i = 0; i < m; ++i)
        for (const auto& t : ch.out[members[i]]) {
            const int j = local[t.to];
            if (j >= 0 && j < m - 1) trip.emplace_back(j, i, t.rate);
        }
    for (int i = 0; i < m; ++i) trip.emplace_back(m - 1, i, 1.0);
    SpMat A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Vec b = Vec::Zero(m);
    b[m - 1] = 1.0;
    Options opts;
    Vec x = solve_sparse(A, b, opts, 1.0);
    for (int i = 0; i < m; ++i) out[members[i]] = std::max(0.0, x[i]);
    double total = 0;
    for (double v : out) total += v;
    for (double& v : out) v /= total;
    return out;
}

}  // namespace sap::pi
