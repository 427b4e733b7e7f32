#ifndef SAP_EXPERIMENTS_HPP
#define SAP_EXPERIMENTS_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sap/routing.hpp"
#include "sap/sim.hpp"
#include "sap/types.hpp"

// Experiment plumbing shared by the CLI and the acceptance suite:
// policy-string parsing, flat key-value configs, figure presets, and
// the sweep/routing runners that emit CSV.

namespace sap::exp {

// Round-trippable and display formatting for CSV / console output.
std::string fmt_full(double v);  // enough digits to reparse exactly
std::string fmt_sig10(double v);

// Policy grammar: name[:key=value[,key=value...]]
//   mmk:servers=2 | holdon:T=4,k=1 | holdon:T=4,det=1 | batching:b=2
//   dual-one:l=2,h=3[,mu1=..,mu2=..] | dual-both
//   statedep:c=2[,rates=1;2][,T=..,k=..,det=1]
//   per-request | reactive:s=4 | proactive
// Unset dual/statedep rates default to mu and 2 mu.
PolicySpec parse_policy(const std::string& text, double mu);

// Flat `key = value` text config; '#' starts a comment. Later keys win.
class KeyValues {
public:
    static KeyValues from_file(const std::string& path);
    static KeyValues from_string(const std::string& text);
    void set(const std::string& assignment);  // "key=value"
    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& def) const;
    double get_num(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& def) const;
    std::vector<std::string> get_words(const std::string& key) const;

private:
    std::map<std::string, std::string> kv_;
};

// One sweep or routing experiment, fully determined by its fields (so
// identical configs always produce byte-identical CSV).
struct ExperimentConfig {
    std::string kind = "sweep";  // "sweep" or "routing"

    double mu = 1, delta = 2, omega = 1;
    std::string axis = "lambda";  // sweep variable: "lambda" or "omega"
    double from = 0.05, to = 0.95, step = 0.01;
    double lambda_fixed = 1.0;  // used when axis == "omega"
    std::vector<std::string> policies;
    int cap_total = 1;  // -1: servers capped only by the queue cap
    int cap_a = -1;

    // routing scenario
    double lambda1 = 0.3, lambda2 = 0.3;
    int servers1 = 1, servers2 = 1;
    std::vector<double> d_r_grid{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
    double granularity = 0.01;
    int cap_n = 60;
    std::string third_baseline = "all_to_site2";  // or "balanced"

    sim::SimConfig sim;

    // Overlays kv onto base, so presets and config files compose with
    // command-line overrides.
    static ExperimentConfig from_kv(const KeyValues& kv);
    static ExperimentConfig from_kv(const KeyValues& kv, const ExperimentConfig& base);
    void validate() const;
    routing::TwoSiteParams two_site(double d_r) const;
};

// Built-in parameterizations behind the ratio and routing figures.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

// ---------------------------------------------------------------------------
// Runners

struct SweepRow {
    double x = 0;  // lambda or omega
    double optimal_objective = 0;
    std::vector<double> ratios;  // NaN when the policy is unstable at x
    std::vector<std::string> unstable;
};

struct SweepResult {
    std::vector<std::string> policy_labels;
    std::vector<SweepRow> rows;
    std::string csv;
};

// Objective ratio of every configured policy against the recomputed
// optimum at each grid point. The token "optimal-a1" compares the
// setup-constrained optimum against the unconstrained one.
SweepResult run_ratio_sweep(const ExperimentConfig& cfg);

struct RoutingRow {
    double d_r = 0;
    double obj_state_dependent = 0;
    double obj_oblivious = 0;
    double obj_local_only = 0;
    double obj_third = 0;  // all_to_site2 or balanced
    double best_fraction = 0;
};

struct RoutingResult {
    std::vector<RoutingRow> rows;
    std::string csv;
};

RoutingResult run_routing(const ExperimentConfig& cfg);

}  // namespace sap::exp

#endif
