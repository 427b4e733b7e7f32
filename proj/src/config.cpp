#include "sap/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sap/analytic.hpp"
#include "sap/smdp.hpp"

#include "parallel.hpp"

namespace sap::exp {

std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sig10(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<double> parse_num_list(const std::string& text, char sep) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

std::map<std::string, std::string> parse_opts(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw InvalidParams("expected key=value in policy options: " + item);
        out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return out;
}

double opt_num(const std::map<std::string, std::string>& o, const std::string& k,
               double def) {
    const auto it = o.find(k);
    return it == o.end() ? def : std::stod(it->second);
}

int opt_int(const std::map<std::string, std::string>& o, const std::string& k,
            int def) {
    const auto it = o.find(k);
    return it == o.end() ? def : std::stoi(it->second);
}

}  // namespace

PolicySpec parse_policy(const std::string& text, double mu) {
    const auto colon = text.find(':');
    const std::string name = trim(text.substr(0, colon));
    const auto opts =
        colon == std::string::npos ? std::map<std::string, std::string>{}
                                   : parse_opts(text.substr(colon + 1));
    if (name == "mmk") return AlwaysOn{opt_int(opts, "servers", 1)};
    if (name == "holdon")
        return HoldOn{opt_int(opts, "k", 1), opt_int(opts, "det", 0) != 0,
                      opt_num(opts, "T", 0.0)};
    if (name == "batching") return Batching{opt_int(opts, "b", 1)};
    if (name == "dual-one")
        return DualOneAlways{opt_num(opts, "mu1", mu), opt_num(opts, "mu2", 2 * mu),
                             opt_int(opts, "l", 2), opt_int(opts, "h", 2)};
    if (name == "dual-both") return DualBothDynamic{};
    if (name == "statedep") {
        StateDepRates s;
        if (opts.count("rates")) {
            s.rates = parse_num_list(opts.at("rates"), ';');
        } else {
            const int c = opt_int(opts, "c", 2);
            for (int i = 1; i <= c; ++i) s.rates.push_back(i * mu);
        }
        s.k = opt_int(opts, "k", 1);
        s.deterministic = opt_int(opts, "det", 0) != 0;
        s.t = opt_num(opts, "T", 0.0);
        return s;
    }
    if (name == "per-request") return ServerPerRequest{};
    if (name == "reactive") return ReactiveUnlimited{opt_int(opts, "s", 1)};
    if (name == "proactive") return ProactiveUnlimited{};
    throw InvalidParams("unknown policy: " + name);
}

// ---------------------------------------------------------------------------

KeyValues KeyValues::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidParams("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

KeyValues KeyValues::from_string(const std::string& text) {
    KeyValues kv;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidParams("expected `key = value` in config: " + line);
        kv.kv_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void KeyValues::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw InvalidParams("expected key=value: " + assignment);
    kv_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

bool KeyValues::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string KeyValues::get(const std::string& key, const std::string& def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

double KeyValues::get_num(const std::string& key, double def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stod(it->second);
}

int KeyValues::get_int(const std::string& key, int def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stoi(it->second);
}

std::vector<double> KeyValues::get_list(const std::string& key,
                                        const std::vector<double>& def) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? def : parse_num_list(it->second, ',');
}

std::vector<std::string> KeyValues::get_words(const std::string& key) const {
    std::vector<std::string> out;
    const auto it = kv_.find(key);
    if (it == kv_.end()) return out;
    std::stringstream ss(it->second);
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv) {
    return from_kv(kv, ExperimentConfig{});
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValues& kv,
                                           const ExperimentConfig& base) {
    ExperimentConfig c = base;
    c.kind = kv.get("kind", c.kind);
    c.mu = kv.get_num("mu", c.mu);
    c.delta = kv.get_num("delta", c.delta);
    c.omega = kv.get_num("omega", c.omega);
    c.axis = kv.get("axis", c.axis);
    c.from = kv.get_num("from", c.from);
    c.to = kv.get_num("to", c.to);
    c.step = kv.get_num("step", c.step);
    c.lambda_fixed = kv.get_num("lambda", c.lambda_fixed);
    if (kv.has("policies")) c.policies = kv.get_words("policies");
    c.cap_total = kv.get_int("cap.total", c.cap_total);
    c.cap_a = kv.get_int("cap.a", c.cap_a);
    c.lambda1 = kv.get_num("lambda1", c.lambda1);
    c.lambda2 = kv.get_num("lambda2", c.lambda2);
    c.servers1 = kv.get_int("servers1", c.servers1);
    c.servers2 = kv.get_int("servers2", c.servers2);
    c.d_r_grid = kv.get_list("d_r.list", c.d_r_grid);
    c.granularity = kv.get_num("granularity", c.granularity);
    c.cap_n = kv.get_int("cap.n", c.cap_n);
    c.third_baseline = kv.get("baseline", c.third_baseline);
    c.sim.seed = static_cast<std::uint64_t>(
        kv.get_num("sim.seed", static_cast<double>(c.sim.seed)));
    c.sim.warmup = kv.get_num("sim.warmup", c.sim.warmup);
    c.sim.horizon = kv.get_num("sim.horizon", c.sim.horizon);
    c.sim.replications = kv.get_int("sim.reps", c.sim.replications);
    return c;
}

void ExperimentConfig::validate() const {
    if (kind != "sweep" && kind != "routing")
        throw InvalidParams("kind must be sweep or routing");
    if (kind == "sweep") {
        if (!(step > 0)) throw InvalidParams("sweep step must be > 0");
        if (!(to >= from)) throw InvalidParams("sweep range is empty");
        if (axis != "lambda" && axis != "omega")
            throw InvalidParams("axis must be lambda or omega");
        if (policies.empty()) throw InvalidParams("no policies configured");
    } else {
        if (d_r_grid.empty()) throw InvalidParams("empty d_r grid");
        if (third_baseline != "all_to_site2" && third_baseline != "balanced")
            throw InvalidParams("baseline must be all_to_site2 or balanced");
    }
}

routing::TwoSiteParams ExperimentConfig::two_site(double d_r) const {
    routing::TwoSiteParams tp;
    tp.lambda1 = lambda1;
    tp.lambda2 = lambda2;
    tp.d_r = d_r;
    tp.mu = mu;
    tp.delta = delta;
    tp.omega = omega;
    tp.servers1 = servers1;
    tp.servers2 = servers2;
    tp.cap_n = cap_n;
    return tp;
}

// ---------------------------------------------------------------------------
// Figure presets: mu = 1, omega = 1, Delta in {0.5, 1, 2, 4}. Grid
// steps and the remaining policy constants are toolkit defaults,
// documented in the README and overridable per run.

std::vector<std::string> preset_names() {
    return {"fig5a", "fig5b", "fig5c", "fig5d", "fig6a", "fig6b", "fig6c",
            "fig6d", "fig7a", "fig7b", "fig7c", "fig7d", "fig8",  "fig9a",
            "fig9b", "fig9c", "fig9d"};
}

ExperimentConfig preset(const std::string& name) {
    const std::map<std::string, double> deltas{
        {"a", 0.5}, {"b", 1.0}, {"c", 2.0}, {"d", 4.0}};
    ExperimentConfig c;
    c.omega = 1;
    c.mu = 1;
    if (name.rfind("fig5", 0) == 0 && name.size() == 5) {
        c.kind = "sweep";
        c.delta = deltas.at(name.substr(4));
        c.policies = {"holdon:T=0", "holdon:T=4,k=1", "holdon:T=4,det=1", "mmk"};
        c.cap_total = 1;
        c.from = 0.05;
        c.to = 0.95;
        c.step = 0.01;
        return c;
    }
    if (name.rfind("fig6", 0) == 0 && name.size() == 5) {
        c.kind = "sweep";
        c.delta = deltas.at(name.substr(4));
        c.policies = {"dual-one:l=2,h=2", "dual-one:l=2,h=3", "dual-both",
                      "statedep:c=2", "mmk:servers=2"};
        c.cap_total = 2;
        c.from = 0.05;
        c.to = 1.95;
        c.step = 0.01;
        return c;
    }
    if (name.rfind("fig7", 0) == 0 && name.size() == 5) {
        c.kind = "sweep";
        c.delta = deltas.at(name.substr(4));
        c.policies = {"reactive:s=1", "reactive:s=2", "reactive:s=4", "proactive",
                      "per-request", "optimal-a1"};
        c.cap_total = -1;
        c.from = 0.1;
        c.to = 2.0;
        c.step = 0.05;
        return c;
    }
    if (name == "fig8") {
        c.kind = "sweep";
        c.axis = "omega";
        c.delta = 2;
        c.lambda_fixed = 1.0;
        c.policies = {"dual-one:l=2,h=2", "dual-one:l=2,h=3", "dual-one:l=2,h=6",
                      "dual-both", "statedep:c=2", "mmk:servers=2"};
        c.cap_total = 2;
        c.from = 0.05;
        c.to = 4.0;
        c.step = 0.05;
        return c;
    }
    if (name.rfind("fig9", 0) == 0 && name.size() == 5) {
        c.kind = "routing";
        c.delta = 2;
        const char panel = name[4];
        if (panel == 'a') {
            c.lambda1 = 0.3; c.lambda2 = 0.3; c.servers1 = 1; c.servers2 = 1;
            c.third_baseline = "all_to_site2";
        } else if (panel == 'b') {
            c.lambda1 = 0.3; c.lambda2 = 0.3; c.servers1 = 2; c.servers2 = 2;
            c.third_baseline = "all_to_site2";
        } else if (panel == 'c') {
            c.lambda1 = 0.8; c.lambda2 = 0.04; c.servers1 = 1; c.servers2 = 1;
            c.third_baseline = "balanced";
        } else if (panel == 'd') {
            c.lambda1 = 1.7; c.lambda2 = 0.04; c.servers1 = 2; c.servers2 = 2;
            c.third_baseline = "balanced";
        } else {
            throw InvalidParams("unknown preset: " + name);
        }
        return c;
    }
    throw InvalidParams("unknown preset: " + name);
}

// ---------------------------------------------------------------------------
// Runners

namespace {

double policy_objective(const std::string& text, const SystemParams& p) {
    const PolicySpec spec = parse_policy(text, p.mu);
    return objective(analytic::evaluate(spec, p), p);
}

}  // namespace

SweepResult run_ratio_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    SweepResult out;
    for (const auto& text : cfg.policies)
        out.policy_labels.push_back(
            text == "optimal-a1"
                ? std::string("optimal-a1")
                : policy_name(parse_policy(text, cfg.mu)));

    const int steps = static_cast<int>(std::floor((cfg.to - cfg.from) / cfg.step + 1e-9));
    out.rows.resize(steps + 1);
    // grid points are independent solves; rows land at their index so
    // the output does not depend on scheduling
    detail::parallel_for(steps + 1, [&](int i) {
        const double x = cfg.from + i * cfg.step;
        SystemParams p{cfg.axis == "lambda" ? x : cfg.lambda_fixed, cfg.mu, cfg.delta,
                       cfg.axis == "omega" ? x : cfg.omega};
        SweepRow row;
        row.x = x;
        const auto opt = smdp::solve_optimal_auto(p, cfg.cap_total, cfg.cap_a);
        row.optimal_objective = opt.result.objective();
        for (const auto& text : cfg.policies) {
            double obj = std::numeric_limits<double>::quiet_NaN();
            try {
                if (text == "optimal-a1")
                    obj = smdp::solve_optimal_auto(p, cfg.cap_total, 1)
                              .result.objective();
                else
                    obj = policy_objective(text, p);
            } catch (const UnstableError&) {
                row.unstable.push_back(text);
            }
            row.ratios.push_back(obj / row.optimal_objective);
        }
        out.rows[i] = std::move(row);
    });

    std::ostringstream csv;
    csv << (cfg.axis == "lambda" ? "lambda" : "omega") << ",opt_objective";
    for (const auto& label : out.policy_labels) csv << ",ratio_" << label;
    csv << ",unstable\n";
    for (const auto& row : out.rows) {
        csv << fmt_full(row.x) << ',' << fmt_full(row.optimal_objective);
        for (double r : row.ratios) csv << ',' << (std::isnan(r) ? "nan" : fmt_full(r));
        csv << ',';
        for (size_t u = 0; u < row.unstable.size(); ++u)
            csv << (u ? ";" : "") << row.unstable[u];
        csv << '\n';
    }
    out.csv = csv.str();
    return out;
}

RoutingResult run_routing(const ExperimentConfig& cfg) {
    cfg.validate();
    RoutingResult out;
    // One split table serves the whole d_r grid: per-site objectives do
    // not depend on the transfer time.
    const auto table = routing::oblivious_split_table(cfg.two_site(0), cfg.granularity);

    const std::string third = cfg.third_baseline;
    out.rows.resize(cfg.d_r_grid.size());
    detail::parallel_for(static_cast<int>(cfg.d_r_grid.size()), [&](int i) {
        const auto tp = cfg.two_site(cfg.d_r_grid[i]);
        RoutingRow row;
        row.d_r = cfg.d_r_grid[i];
        const auto sd = routing::solve_state_dependent(tp);
        row.obj_state_dependent = sd.objective();
        const auto obl = routing::pick_oblivious(table, tp);
        row.obj_oblivious = obl.objective;
        row.best_fraction = obl.fraction;
        row.obj_local_only =
            routing::baseline_routing(tp, routing::BaselineMode::LocalOnly);
        row.obj_third = routing::baseline_routing(
            tp, third == "balanced" ? routing::BaselineMode::Balanced
                                    : routing::BaselineMode::AllToSite2);
        out.rows[i] = row;
    });

    std::ostringstream csv;
    csv << "d_r,obj_state_dependent,obj_oblivious,obj_local_only,obj_" << third
        << ",f_oblivious,ratio_oblivious,ratio_local_only,ratio_" << third << "\n";
    for (const auto& row : out.rows) {
        csv << fmt_full(row.d_r) << ',' << fmt_full(row.obj_state_dependent) << ','
            << fmt_full(row.obj_oblivious) << ',' << fmt_full(row.obj_local_only)
            << ',' << fmt_full(row.obj_third) << ',' << fmt_full(row.best_fraction)
            << ',' << fmt_full(row.obj_oblivious / row.obj_state_dependent) << ','
            << fmt_full(row.obj_local_only / row.obj_state_dependent) << ','
            << fmt_full(row.obj_third / row.obj_state_dependent) << '\n';
    }
    out.csv = csv.str();
    return out;
}

}  // namespace sap::exp
