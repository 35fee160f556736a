#ifndef FADEMAC_NETWORK_OUTAGE_HPP
#define FADEMAC_NETWORK_OUTAGE_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fademac/mac_outage.hpp"
#include "fademac/monte_carlo.hpp"
#include "fademac/network.hpp"

namespace fademac {

/// Raised when an exact value was requested for a MAC the recursion cannot
/// resolve and no sampling fallback was configured.
class NotComputable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OutageMethod { exact, lower, upper, weak, monte_carlo };

inline std::optional<OutageMethod> parse_outage_method(std::string_view s) {
    if (s == "exact") return OutageMethod::exact;
    if (s == "lower") return OutageMethod::lower;
    if (s == "upper") return OutageMethod::upper;
    if (s == "weak") return OutageMethod::weak;
    if (s == "mc" || s == "monte-carlo") return OutageMethod::monte_carlo;
    return std::nullopt;
}

/// Best available value for one MAC on the requested side. Exact values are
/// preferred whenever they resolve; MACs with a mix of equal and distinct
/// rate parameters (or non-i.i.d. upper bounds) have no closed form and go to
/// `fallback` sampling, or throw NotComputable without it.
inline OutageEstimate mac_outage_dispatch(const MacSpec& mac, const RateVector& r, OutageMethod method,
                                          const McConfig* fallback = nullptr) {
    auto sample_or_throw = [&](const char* why) {
        if (fallback) return mc_mac_outage(mac, r, *fallback);
        throw NotComputable(std::string("not computable exactly; use bounds or mc (") + why + ")");
    };
    switch (method) {
        case OutageMethod::monte_carlo:
            detail::require(fallback != nullptr, "monte-carlo method needs an McConfig");
            return mc_mac_outage(mac, r, *fallback);
        case OutageMethod::exact:
            if (auto e = outage_exact(mac, r)) return *e;
            return sample_or_throw("the elimination recursion does not resolve this MAC");
        case OutageMethod::weak:
            if (mac.iid()) return outage_upper_weak(mac, r);
            return sample_or_throw("the weak bound needs identically distributed links");
        case OutageMethod::lower:
        case OutageMethod::upper:
            break;
    }
    if (mac.size() <= 2)
        if (auto e = outage_exact(mac, r)) return *e;
    if (mac.iid()) return method == OutageMethod::lower ? outage_lower_iid(mac, r) : outage_upper_iid(mac, r);
    if (method == OutageMethod::lower) {
        try {
            return outage_lower_distinct(mac, r);
        } catch (const IllConditioned&) {
        }
    }
    return sample_or_throw("no closed-form bound for this mix of rate parameters");
}

/// 1 - prod_j (1 - P_j) for independent receivers. The result is tagged as a
/// lower (upper) bound when any input is; mixing directions, or mixing
/// sampled with analytic values, is rejected.
inline OutageEstimate combine_receiver_outages(std::span<const OutageEstimate> parts) {
    bool any_lower = false;
    bool any_upper = false;
    bool any_mc = false;
    double success = 1.0;
    for (const auto& p : parts) {
        any_lower |= p.method == Method::lower;
        any_upper |= p.method == Method::upper;
        any_mc |= p.method == Method::monte_carlo;
        success *= 1.0 - p.value;
    }
    if (any_lower && any_upper) throw InvalidInput("cannot combine lower and upper bounds into one network value");
    if (any_mc && (any_lower || any_upper || parts.size() > 1))
        throw InvalidInput("sampled receiver values must be combined by joint sampling, not by product");
    OutageEstimate out;
    out.value = std::clamp(1.0 - success, 0.0, 1.0);
    out.method = any_lower ? Method::lower : any_upper ? Method::upper : Method::exact;
    if (any_mc && parts.size() == 1) return parts.front();
    return out;
}

struct ReceiverOutage {
    NodeId node;
    std::size_t links;
    OutageEstimate estimate;
};

struct NetworkOutage {
    OutageEstimate total;
    std::vector<ReceiverOutage> receivers;
};

struct NetworkOutageOptions {
    /// Sampling configuration for the monte_carlo method, and the fallback
    /// used when an exact per-receiver value cannot be resolved.
    std::optional<McConfig> mc;
    bool fallback_to_mc = false;
};

/// Network outage under the selected method. Analytic methods are evaluated
/// per receiver and combined with the product formula; monte_carlo samples
/// the whole network jointly (per-receiver values are sampled separately for
/// reporting).
inline NetworkOutage network_outage(const NetworkSpec& net, std::span<const double> rates, OutageMethod method,
                                    const NetworkOutageOptions& opts = {}) {
    detail::require(rates.size() == net.links().size(), "rate vector length does not match link count");
    NetworkOutage out;
    if (method == OutageMethod::monte_carlo) {
        detail::require(opts.mc.has_value(), "monte-carlo method needs an McConfig");
        for (auto j : net.receivers())
            out.receivers.push_back(
                {j, net.in_links(j).size(), mc_mac_outage(mac_of(net, j), local_rates(net, j, rates), *opts.mc)});
        out.total = mc_network_outage(net, rates, *opts.mc);
        return out;
    }
    std::vector<OutageEstimate> parts;
    bool fell_back = false;
    for (auto j : net.receivers()) {
        const auto mac = mac_of(net, j);
        const auto r = local_rates(net, j, rates);
        OutageEstimate est;
        try {
            est = mac_outage_dispatch(mac, r, method);
        } catch (const NotComputable& e) {
            if (!(opts.fallback_to_mc && opts.mc))
                throw NotComputable("receiver " + std::to_string(j) + ": " + e.what());
            est = mc_mac_outage(mac, r, *opts.mc);
            fell_back = true;
        }
        out.receivers.push_back({j, mac.size(), est});
        parts.push_back(est);
    }
    out.total = fell_back ? mc_network_outage(net, rates, *opts.mc) : combine_receiver_outages(parts);
    return out;
}

}  // namespace fademac

#endif
