#include "sap/types.hpp"

#include <cmath>
#include <cstdio>

namespace sap {

namespace {
std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}
}  // namespace

void SystemParams::validate() const {
    if (!(lambda > 0) || !std::isfinite(lambda))
        throw InvalidParams("lambda must be positive and finite");
    if (!(mu > 0) || !std::isfinite(mu))
        throw InvalidParams("mu must be positive and finite");
    if (!(delta >= 0) || !std::isfinite(delta))
        throw InvalidParams("delta must be nonnegative and finite");
    if (!(omega >= 0) || !std::isfinite(omega))
        throw InvalidParams("omega must be nonnegative and finite");
}

double objective(const Metrics& m, const SystemParams& p) {
    if (m.q) return p.omega * (*m.q) + m.c;
    return p.omega * p.lambda * m.r + m.c;
}

void validate(const PolicySpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, AlwaysOn>) {
                if (s.servers < 1) throw InvalidParams("servers must be >= 1");
            } else if constexpr (std::is_same_v<T, HoldOn>) {
                if (!s.deterministic && s.k < 1) throw InvalidParams("Erlang shape k must be >= 1");
                if (!(s.t >= 0)) throw InvalidParams("holding-on time must be >= 0");
            } else if constexpr (std::is_same_v<T, Batching>) {
                if (s.b < 1) throw InvalidParams("batching threshold b must be >= 1");
            } else if constexpr (std::is_same_v<T, DualOneAlways>) {
                if (!(s.mu1 > 0) || !(s.mu2 > s.mu1))
                    throw InvalidParams("need 0 < mu1 < mu2");
                if (s.l < 1 || s.h < s.l) throw InvalidParams("need 1 <= l <= h");
            } else if constexpr (std::is_same_v<T, StateDepRates>) {
                if (s.rates.empty()) throw InvalidParams("need at least one rate");
                double prev = 0;
                for (double r : s.rates) {
                    if (!(r > 0)) throw InvalidParams("rates must be positive");
                    if (r < prev) throw InvalidParams("rates must be nondecreasing");
                    prev = r;
                }
                if (!s.deterministic && s.k < 1) throw InvalidParams("Erlang shape k must be >= 1");
                if (!(s.t >= 0)) throw InvalidParams("holding-on time must be >= 0");
            } else if constexpr (std::is_same_v<T, ReactiveUnlimited>) {
                if (s.s < 1) throw InvalidParams("setup limit s must be >= 1");
            } else if constexpr (std::is_same_v<T, SmdpTablePolicy>) {
                if (!s.table) throw InvalidParams("missing policy table");
            }
        },
        spec);
}

std::string policy_name(const PolicySpec& spec) {
    struct V {
        std::string operator()(const AlwaysOn& s) const {
            return "mmk" + std::to_string(s.servers);
        }
        std::string operator()(const HoldOn& s) const {
            std::string out = "holdon_T" + num(s.t);
            out += s.deterministic ? "_det" : "_k" + std::to_string(s.k);
            return out;
        }
        std::string operator()(const Batching& s) const { return "batching_b" + std::to_string(s.b); }
        std::string operator()(const DualOneAlways& s) const {
            return "dual_one_l" + std::to_string(s.l) + "h" + std::to_string(s.h);
        }
        std::string operator()(const DualBothDynamic&) const { return "dual_both"; }
        std::string operator()(const StateDepRates& s) const {
            return "statedep_c" + std::to_string(s.rates.size());
        }
        std::string operator()(const ServerPerRequest&) const { return "per_request"; }
        std::string operator()(const ReactiveUnlimited& s) const {
            return "reactive_s" + std::to_string(s.s);
        }
        std::string operator()(const ProactiveUnlimited&) const { return "proactive"; }
        std::string operator()(const SmdpTablePolicy&) const { return "table"; }
    };
    return std::visit(V{}, spec);
}

}  // namespace sap
