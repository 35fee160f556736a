#ifndef FADEMAC_CURVE_HPP
#define FADEMAC_CURVE_HPP

// Outage curves: re-solve the allocation at each point of a sweep over the
// multicast rate or the SNR and evaluate the network outage of the optimum.
// All points share one sampling seed so the Monte Carlo column uses common
// random numbers across the sweep.

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fademac/allocation.hpp"
#include "fademac/io.hpp"
#include "fademac/monte_carlo.hpp"
#include "fademac/network.hpp"
#include "fademac/network_outage.hpp"

namespace fademac {

enum class SweepVariable { multicast_rate, snr };

inline std::optional<SweepVariable> parse_sweep_variable(std::string_view s) {
    if (s == "multicast_rate" || s == "rate") return SweepVariable::multicast_rate;
    if (s == "snr") return SweepVariable::snr;
    return std::nullopt;
}

struct CurveRequest {
    SweepVariable variable = SweepVariable::multicast_rate;
    double lo = 0.0;
    double hi = 1.0;
    double step = 0.1;
    bool lower = true;
    bool upper = true;
    bool monte_carlo = true;
    McConfig mc{};
    SolverOptions solver{};

    /// Sweep values lo, lo + step, ... up to hi (inclusive within 1e-9 steps).
    [[nodiscard]] std::vector<double> points() const {
        detail::require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "curve range needs lo < hi");
        detail::require(std::isfinite(step) && step > 0.0, "curve step must be positive");
        const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
        detail::require(count <= 100000, "curve range has too many points");
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
        return out;
    }
};

struct CurvePoint {
    double sweep_value = 0.0;
    double multicast_rate = 0.0;
    std::optional<OutageEstimate> lower;
    std::optional<OutageEstimate> upper;
    std::optional<OutageEstimate> monte_carlo;
    double objective = 0.0;
    bool converged = false;
};

/// The network at one sweep value. For SNR sweeps every transmit power is
/// multiplied by 10^(dB/10), so a network stored with unit powers and unit
/// noise sits at 0 dB.
inline NetworkSpec network_at(const NetworkSpec& base, SweepVariable variable, double value) {
    if (variable == SweepVariable::multicast_rate) return base.with_multicast_rate(value);
    return base.with_power_scale(std::pow(10.0, value / 10.0));
}

inline CurvePoint evaluate_point(const NetworkSpec& net, double sweep_value, const CurveRequest& req) {
    CurvePoint pt;
    pt.sweep_value = sweep_value;
    pt.multicast_rate = net.multicast_rate();
    const AllocationProblem problem(net);
    const auto sol = solve_centralized(problem, req.solver);
    pt.converged = sol.report.converged;
    pt.objective = sol.report.objective;
    if (!pt.converged) return pt;
    NetworkOutageOptions opts;
    opts.mc = req.mc;
    opts.fallback_to_mc = false;
    if (req.lower) pt.lower = network_outage(net, sol.state.rates, OutageMethod::lower, opts).total;
    if (req.upper) pt.upper = network_outage(net, sol.state.rates, OutageMethod::upper, opts).total;
    if (req.monte_carlo) pt.monte_carlo = mc_network_outage(net, sol.state.rates, req.mc);
    return pt;
}

/// Evaluates every sweep point. Points whose allocation does not converge are
/// kept with `converged == false` and no outage values.
inline std::vector<CurvePoint> compute_curve(const NetworkSpec& base, const CurveRequest& req) {
    std::vector<CurvePoint> out;
    for (double v : req.points()) out.push_back(evaluate_point(network_at(base, req.variable, v), v, req));
    return out;
}

/// CSV with columns sweep_value, R_s, outage_lower, outage_upper, outage_mc,
/// mc_halfwidth, objective. Methods that were not requested, and points that
/// did not converge, leave their cells empty.
inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& points) {
    out << "sweep_value,R_s,outage_lower,outage_upper,outage_mc,mc_halfwidth,objective\n";
    auto cell = [](const std::optional<OutageEstimate>& e) { return e ? format_double(e->value) : std::string(); };
    for (const auto& p : points) {
        out << format_double(p.sweep_value) << ',' << format_double(p.multicast_rate) << ',' << cell(p.lower) << ','
            << cell(p.upper) << ',' << cell(p.monte_carlo) << ','
            << (p.monte_carlo ? format_double(p.monte_carlo->half_width) : std::string()) << ','
            << (p.converged ? format_double(p.objective) : std::string()) << '\n';
    }
}

}  // namespace fademac

#endif
