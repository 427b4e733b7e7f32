#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sap/analytic.hpp"
#include "sap/experiments.hpp"
#include "sap/routing.hpp"
#include "sap/sim.hpp"
#include "sap/smdp.hpp"

// Exit codes: 0 ok, 2 invalid input, 3 unstable model, 4 solver did not
// converge, 5 a --check comparison failed.

namespace {

using namespace sap;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitUnstable = 3;
constexpr int kExitNoConverge = 4;
constexpr int kExitCheckFailed = 5;

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidParams("cannot open output file: " + path);
    out << text;
}

exp::KeyValues gather_kv(const std::string& config_path,
                         const std::vector<std::string>& sets) {
    exp::KeyValues kv = config_path.empty() ? exp::KeyValues{}
                                            : exp::KeyValues::from_file(config_path);
    for (const auto& s : sets) kv.set(s);
    return kv;
}

int cmd_eval(const std::string& policy_text, const SystemParams& p) {
    const PolicySpec spec = exp::parse_policy(policy_text, p.mu);
    const Metrics m = analytic::evaluate(spec, p);
    std::cout << "policy=" << policy_name(spec) << " R=" << exp::fmt_sig10(m.r)
              << " C=" << exp::fmt_sig10(m.c)
              << " objective=" << exp::fmt_sig10(objective(m, p)) << "\n";
    return kExitOk;
}

int cmd_sweep(const exp::ExperimentConfig& cfg, const std::string& out_path) {
    const auto res = exp::run_ratio_sweep(cfg);
    write_output(out_path, res.csv);
    return kExitOk;
}

int cmd_optimal(const SystemParams& p, int cap_n, int cap_total, int cap_a,
                const std::string& out_path) {
    smdp::SolveResult result;
    smdp::SmdpCaps caps;
    if (cap_n > 0) {
        caps = smdp::SmdpCaps{cap_n, cap_total > 0 ? cap_total : cap_n, cap_a};
        result = smdp::solve_optimal(p, caps);
    } else {
        auto auto_res = smdp::solve_optimal_auto(p, cap_total, cap_a);
        result = std::move(auto_res.result);
        caps = auto_res.caps;
    }
    const Metrics m = smdp::stationary_metrics(result.policy, p);
    std::cout << "objective=" << exp::fmt_sig10(result.objective())
              << " R=" << exp::fmt_sig10(m.r) << " C=" << exp::fmt_sig10(m.c)
              << " iterations=" << result.iterations << " cap_n=" << caps.cap_n
              << " cap_total=" << caps.cap_total << " cap_a=" << caps.cap_a << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw InvalidParams("cannot open output file: " + out_path);
        smdp::save_policy(out, result.policy, p);
    }
    return kExitOk;
}

int cmd_routing(const exp::ExperimentConfig& cfg, const std::string& out_path) {
    const auto res = exp::run_routing(cfg);
    write_output(out_path, res.csv);
    return kExitOk;
}

int cmd_figure(const std::string& name, const std::vector<std::string>& sets,
               const std::string& out_path) {
    exp::KeyValues kv;
    for (const auto& s : sets) kv.set(s);
    const exp::ExperimentConfig cfg =
        exp::ExperimentConfig::from_kv(kv, exp::preset(name));
    if (cfg.kind == "routing") return cmd_routing(cfg, out_path);
    return cmd_sweep(cfg, out_path);
}

double standard_error(const std::vector<sim::RepStats>& reps, double mean,
                      double (*pick)(const sim::RepStats&)) {
    double var = 0;
    for (const auto& r : reps) var += (pick(r) - mean) * (pick(r) - mean);
    var /= (reps.size() - 1);
    return std::sqrt(var / reps.size());
}

int cmd_simulate(const std::string& policy_text, const std::string& table_path,
                 SystemParams p, bool have_params, const sim::SimConfig& cfg,
                 bool check, bool csv) {
    sim::MetricsEstimate est;
    double truth_r = 0, truth_c = 0, truth_obj = 0;
    bool check_objective_only = false;

    if (!table_path.empty()) {
        std::ifstream in(table_path);
        if (!in) throw InvalidParams("cannot open policy table: " + table_path);
        const smdp::LoadedPolicy loaded = smdp::load_policy(in);
        if (!have_params) p = loaded.params;
        est = sim::simulate_policy_table(loaded.table, p, cfg);
        truth_obj = -smdp::value_determination(loaded.table, p).first;
        check_objective_only = true;
    } else {
        const PolicySpec spec = exp::parse_policy(policy_text, p.mu);
        est = sim::simulate(spec, p, cfg);
        const Metrics m = analytic::evaluate(spec, p);
        truth_r = m.r;
        truth_c = m.c;
        truth_obj = objective(m, p);
    }

    std::cout << "rng=" << sim::kRngName << " seed=" << cfg.seed
              << " reps=" << cfg.replications << " warmup=" << cfg.warmup
              << " horizon=" << cfg.horizon << "\n";
    std::cout << "R=" << exp::fmt_sig10(est.r_mean) << " +/- "
              << exp::fmt_sig10(est.r_ci_halfwidth) << "\n";
    std::cout << "C=" << exp::fmt_sig10(est.c_mean) << " +/- "
              << exp::fmt_sig10(est.c_ci_halfwidth) << "\n";
    std::cout << "objective=" << exp::fmt_sig10(est.objective_mean) << " +/- "
              << exp::fmt_sig10(est.objective_ci_halfwidth) << "\n";
    if (csv) {
        std::cout << "replication,R,C,objective\n";
        for (size_t i = 0; i < est.reps.size(); ++i)
            std::cout << i << ',' << exp::fmt_full(est.reps[i].r) << ','
                      << exp::fmt_full(est.reps[i].c) << ','
                      << exp::fmt_full(est.reps[i].objective) << "\n";
    }
    if (check) {
        bool ok = true;
        auto against = [&](const char* what, double estv, double se, double truth) {
            const double gap = std::abs(estv - truth);
            const bool pass = gap <= 3 * se;
            std::cout << "check " << what << ": |" << exp::fmt_sig10(estv) << " - "
                      << exp::fmt_sig10(truth) << "| = " << exp::fmt_sig10(gap)
                      << (pass ? " <= " : " > ") << "3*se=" << exp::fmt_sig10(3 * se)
                      << (pass ? " ok" : " FAIL") << "\n";
            ok = ok && pass;
        };
        if (check_objective_only) {
            against("objective", est.objective_mean,
                    standard_error(est.reps, est.objective_mean,
                                   [](const sim::RepStats& r) { return r.objective; }),
                    truth_obj);
        } else {
            against("R", est.r_mean,
                    standard_error(est.reps, est.r_mean,
                                   [](const sim::RepStats& r) { return r.r; }),
                    truth_r);
            against("C", est.c_mean,
                    standard_error(est.reps, est.c_mean,
                                   [](const sim::RepStats& r) { return r.c; }),
                    truth_c);
            (void)truth_obj;
        }
        if (!ok) return kExitCheckFailed;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay/cost analysis of dynamic server allocation policies"};
    app.require_subcommand(1);

    SystemParams p{0.5, 1.0, 2.0, 1.0};
    auto add_params = [&](CLI::App* cmd) {
        cmd->add_option("--lambda", p.lambda, "arrival rate");
        cmd->add_option("--mu", p.mu, "per-server service rate");
        cmd->add_option("--delta", p.delta, "mean setup delay");
        cmd->add_option("--omega", p.omega, "objective weight on request time");
    };

    std::string policy_text, config_path, out_path, figure_name, table_path;
    std::vector<std::string> sets;
    int cap_n = 0, cap_total = 1, cap_a = -1;
    sim::SimConfig sim_cfg;
    bool check = false, rep_csv = false, list_figures = false;

    auto* eval = app.add_subcommand("eval", "closed-form metrics of one policy");
    add_params(eval);
    eval->add_option("--policy", policy_text, "policy spec, e.g. holdon:T=4,k=1")
        ->required();

    auto* sweep = app.add_subcommand("sweep", "objective-ratio sweep as CSV");
    sweep->add_option("--config", config_path, "key = value config file");
    sweep->add_option("--set", sets, "override, key=value (repeatable)");
    sweep->add_option("--out", out_path, "output file (default stdout)");

    auto* optimal = app.add_subcommand("optimal", "solve for an optimal policy table");
    add_params(optimal);
    optimal->add_option("--cap-n", cap_n, "queue cap (0 = adaptive)");
    optimal->add_option("--cap-total", cap_total, "server cap m+a (-1 = queue cap)");
    optimal->add_option("--cap-a", cap_a, "cap on setups in progress (-1 = none)");
    optimal->add_option("--out", out_path, "write the policy table here");

    auto* routing_cmd =
        app.add_subcommand("routing", "two-site comparison over d_r as CSV");
    routing_cmd->add_option("--config", config_path, "key = value config file");
    routing_cmd->add_option("--set", sets, "override, key=value (repeatable)");
    routing_cmd->add_option("--out", out_path, "output file (default stdout)");

    auto* simulate = app.add_subcommand("simulate", "stochastic estimate of one policy");
    add_params(simulate);
    simulate->add_option("--policy", policy_text, "policy spec");
    simulate->add_option("--table", table_path, "replay a saved policy table");
    simulate->add_option("--seed", sim_cfg.seed, "RNG seed");
    simulate->add_option("--warmup", sim_cfg.warmup, "warmup time deleted");
    simulate->add_option("--horizon", sim_cfg.horizon, "simulated time per replication");
    simulate->add_option("--reps", sim_cfg.replications, "independent replications");
    simulate->add_flag("--check", check, "compare against the analytic value (3 s.e.)");
    simulate->add_flag("--csv", rep_csv, "emit per-replication CSV");

    auto* figure = app.add_subcommand("figure", "run a built-in figure preset");
    figure->add_option("--name", figure_name, "preset, e.g. fig5c");
    figure->add_option("--set", sets, "override, key=value (repeatable)");
    figure->add_option("--out", out_path, "output file (default stdout)");
    figure->add_flag("--list", list_figures, "list preset names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitInvalid;
    }

    try {
        if (eval->parsed()) return cmd_eval(policy_text, p);
        if (sweep->parsed())
            return cmd_sweep(
                exp::ExperimentConfig::from_kv(gather_kv(config_path, sets)), out_path);
        if (optimal->parsed()) return cmd_optimal(p, cap_n, cap_total, cap_a, out_path);
        if (routing_cmd->parsed()) {
            exp::ExperimentConfig base;
            base.kind = "routing";
            return cmd_routing(
                exp::ExperimentConfig::from_kv(gather_kv(config_path, sets), base),
                out_path);
        }
        if (simulate->parsed()) {
            if (policy_text.empty() == table_path.empty())
                throw InvalidParams("simulate needs exactly one of --policy / --table");
            const bool have_params =
                simulate->count("--lambda") || simulate->count("--mu") ||
                simulate->count("--delta") || simulate->count("--omega");
            return cmd_simulate(policy_text, table_path, p, have_params, sim_cfg,
                                check, rep_csv);
        }
        if (figure->parsed()) {
            if (list_figures) {
                for (const auto& n : exp::preset_names()) std::cout << n << "\n";
                return kExitOk;
            }
            if (figure_name.empty())
                throw InvalidParams("figure needs --name (or --list)");
            return cmd_figure(figure_name, sets, out_path);
        }
    } catch (const InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const UnstableError& e) {
        std::cerr << "unstable: " << e.what() << "\n";
        return kExitUnstable;
    } catch (const ConvergenceError& e) {
        std::cerr << "no convergence: " << e.what() << "\n";
        return kExitNoConverge;
    } catch (const SingularChainError& e) {
        std::cerr << "singular chain: " << e.what() << "\n";
        return kExitNoConverge;
    }
    return kExitInvalid;
}
