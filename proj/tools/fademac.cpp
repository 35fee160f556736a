// fademac: outage probabilities and rate allocation for fading MAC networks.
//
// Exit status: 0 success, 1 input error, 2 non-convergence.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fademac/allocation.hpp"
#include "fademac/curve.hpp"
#include "fademac/distributed.hpp"
#include "fademac/io.hpp"
#include "fademac/network_outage.hpp"

using namespace fademac;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

constexpr std::uint64_t kBuiltinSeed = 1;

/// --seed wins, then FADEMAC_SEED, then the built-in default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("FADEMAC_SEED"); env && *env) {
        std::uint64_t v = 0;
        const std::string_view s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw InvalidInput("FADEMAC_SEED must be an unsigned integer, got '" + std::string(s) + "'");
        return v;
    }
    return kBuiltinSeed;
}

std::uint64_t res_count(const Json& doc, const char* key) { return doc[key].get<std::uint64_t>(); }

std::string tag(const OutageEstimate& e) { return std::string(to_string(e.method)); }

Json estimate_json(const OutageEstimate& e) {
    Json j;
    j["value"] = e.value;
    j["method"] = tag(e);
    if (e.method == Method::monte_carlo) {
        j["half_width"] = e.half_width;
        j["low_confidence"] = e.low_confidence;
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput(path + ": cannot write file");
    out << body;
}

struct McFlags {
    std::uint64_t trials = 1'000'000;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;

    void add(CLI::App* cmd) {
        cmd->add_option("--trials", trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed, "random seed (default: FADEMAC_SEED, else 1)");
        cmd->add_option("--workers", workers, "sampling threads")->check(CLI::PositiveNumber);
    }
    [[nodiscard]] McConfig config() const { return {trials, resolve_seed(seed), workers}; }
};

// ---- outage -----------------------------------------------------------------

struct OutageArgs {
    std::string network;
    std::string rates;
    std::string method = "upper";
    bool fallback_mc = false;
    bool json = false;
    McFlags mc;
};

int cmd_outage(const OutageArgs& a) {
    const auto net = load_network(a.network);
    const auto rates = load_rates(a.rates, net);
    const auto method = parse_outage_method(a.method);
    if (!method) throw InvalidInput("unknown method '" + a.method + "'");

    NetworkOutageOptions opts;
    opts.mc = a.mc.config();
    opts.fallback_to_mc = a.fallback_mc;
    NetworkOutage res;
    try {
        res = network_outage(net, rates, *method, opts);
    } catch (const NotComputable& e) {
        std::cerr << "fademac: " << e.what() << "\n";
        return kInputError;
    }

    if (a.json) {
        Json doc;
        doc["method"] = a.method;
        doc["receivers"] = Json::array();
        for (const auto& r : res.receivers) {
            auto j = estimate_json(r.estimate);
            j["node"] = r.node;
            j["links"] = r.links;
            doc["receivers"].push_back(j);
        }
        doc["network"] = estimate_json(res.total);
        std::cout << doc.dump(2) << "\n";
        return kOk;
    }
    for (const auto& r : res.receivers) {
        std::cout << "node " << r.node << " (" << r.links << " in-links): " << format_double(r.estimate.value) << " ["
                  << tag(r.estimate) << "]";
        if (r.estimate.method == Method::monte_carlo) std::cout << " +/- " << format_double(r.estimate.half_width);
        std::cout << "\n";
    }
    std::cout << "network: " << format_double(res.total.value) << " [" << tag(res.total) << "]";
    if (res.total.method == Method::monte_carlo) std::cout << " +/- " << format_double(res.total.half_width);
    std::cout << "\n";
    return kOk;
}

// ---- solve ------------------------------------------------------------------

struct SolveArgs {
    std::string network;
    std::string mode = "centralized";
    std::string trace_out;
    std::string rates_out;
    std::optional<std::uint64_t> seed;
    std::uint64_t max_rounds = StopCriterion{}.max_rounds;
    double dual_step = StepSizes::kDefaultDual;
    double primal_ratio = StepSizes::kDefaultPrimalRatio;
    bool json = false;
};

Json residuals_json(const KktResiduals& r) {
    Json j;
    j["primal"] = r.primal;
    j["dual"] = r.dual;
    j["stationarity"] = r.stationarity;
    j["complementarity"] = r.complementarity;
    j["flow_violation"] = r.flow_violation;
    return j;
}

Json state_json(const AllocationProblem& p, const AllocationState& s) {
    const auto& net = p.network();
    Json doc = rates_to_json(net, s.rates);
    doc["flows"] = Json::array();
    for (std::size_t k = 0; k < p.destinations(); ++k) {
        Json row;
        row["destination"] = net.destinations()[k];
        row["flow"] = s.flows[k];
        doc["flows"].push_back(row);
    }
    return doc;
}

int cmd_solve(const SolveArgs& a) {
    const auto net = load_network(a.network);
    const AllocationProblem p(net);
    const auto seed = resolve_seed(a.seed);

    Json doc;
    doc["mode"] = a.mode;
    bool ok = false;
    AllocationState state;
    if (a.mode == "centralized") {
        SolverOptions opt;
        opt.seed = seed;
        const auto sol = solve_centralized(p, opt);
        ok = sol.report.converged;
        state = sol.state;
        doc["converged"] = ok;
        doc["iterations"] = sol.report.iterations;
        doc["objective"] = sol.report.objective;
        doc["rate_cap_active"] = sol.report.rate_cap_active;
        doc["residuals"] = residuals_json(sol.report.residuals);
        doc["message"] = sol.report.message;
        if (!a.trace_out.empty()) std::cerr << "fademac: --out is only written in distributed mode\n";
    } else if (a.mode == "distributed") {
        RunOptions opt;
        opt.stop.max_rounds = a.max_rounds;
        const auto res = run(p, StepSizes::randomized(p, seed, a.dual_step, a.primal_ratio), opt);
        ok = res.status == RunStatus::converged;
        state = res.final_state;
        doc["status"] = to_string(res.status);
        doc["converged"] = ok;
        doc["rounds"] = res.rounds;
        doc["messages"] = res.messages;
        doc["objective"] = res.objective;
        doc["residuals"] = residuals_json(kkt_residuals(p, res.final_state));
        if (!a.trace_out.empty()) {
            std::ostringstream csv;
            write_trace_csv(csv, res.trace);
            write_text_file(a.trace_out, csv.str());
        }
    } else {
        throw InvalidInput("unknown mode '" + a.mode + "'");
    }
    doc["allocation"] = state_json(p, state);
    if (!a.rates_out.empty()) write_text_file(a.rates_out, rates_to_json(net, state.rates).dump(2) + "\n");

    if (a.json) {
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "mode: " << a.mode << "\n";
        if (doc.contains("status")) std::cout << "status: " << doc["status"].get<std::string>() << "\n";
        else std::cout << "converged: " << (ok ? "yes" : "no") << " (" << doc["message"].get<std::string>() << ")\n";
        if (doc.contains("rounds"))
            std::cout << "rounds: " << res_count(doc, "rounds") << ", messages: " << res_count(doc, "messages") << "\n";
        std::cout << "objective: " << format_double(doc["objective"].get<double>()) << "\n";
        const auto& r = doc["residuals"];
        std::cout << "residuals: primal " << format_double(r["primal"].get<double>()) << ", dual "
                  << format_double(r["dual"].get<double>()) << ", stationarity "
                  << format_double(r["stationarity"].get<double>()) << ", complementarity "
                  << format_double(r["complementarity"].get<double>()) << "\n";
        for (std::size_t e = 0; e < net.links().size(); ++e)
            std::cout << "  r[" << net.links()[e].tail << "->" << net.links()[e].head
                      << "] = " << format_double(state.rates[e]) << "\n";
    }
    if (!ok) {
        std::cerr << "fademac: allocation did not converge\n";
        return kNotConverged;
    }
    return kOk;
}

// ---- curve ------------------------------------------------------------------

struct CurveArgs {
    std::string network;
    std::string sweep = "multicast_rate";
    double lo = 0.0;
    double hi = 0.0;
    double step = 0.0;
    std::vector<std::string> methods{"lower", "upper", "mc"};
    std::string out;
    McFlags mc;
};

int cmd_curve(const CurveArgs& a) {
    const auto net = load_network(a.network);
    CurveRequest req;
    const auto var = parse_sweep_variable(a.sweep);
    if (!var) throw InvalidInput("unknown sweep variable '" + a.sweep + "'");
    req.variable = *var;
    req.lo = a.lo;
    req.hi = a.hi;
    req.step = a.step;
    req.lower = req.upper = req.monte_carlo = false;
    for (const auto& m : a.methods) {
        if (m == "lower") req.lower = true;
        else if (m == "upper") req.upper = true;
        else if (m == "mc") req.monte_carlo = true;
        else throw InvalidInput("unknown curve method '" + m + "' (expected lower, upper or mc)");
    }
    req.mc = a.mc.config();
    req.solver.seed = req.mc.seed;
    (void)req.points();  // validate the range before any solving

    const auto points = compute_curve(net, req);
    std::ostringstream csv;
    write_curve_csv(csv, points);
    if (a.out.empty()) std::cout << csv.str();
    else write_text_file(a.out, csv.str());

    for (const auto& p : points)
        if (!p.converged) {
            std::cerr << "fademac: allocation did not converge at sweep value " << format_double(p.sweep_value) << "\n";
            return kNotConverged;
        }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outage probabilities and rate allocation for fading MAC networks"};
    app.require_subcommand(1);

    OutageArgs oa;
    auto* outage = app.add_subcommand("outage", "network outage of a given rate allocation");
    outage->add_option("network", oa.network, "network JSON file")->required();
    outage->add_option("rates", oa.rates, "rates JSON file")->required();
    outage->add_option("--method", oa.method, "exact, lower, upper, weak or mc")
        ->check(CLI::IsMember({"exact", "lower", "upper", "weak", "mc"}));
    outage->add_flag("--fallback-mc", oa.fallback_mc, "sample receivers that have no closed form");
    outage->add_flag("--json", oa.json, "print JSON");
    oa.mc.add(outage);

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "minimum-cost rate allocation");
    solve->add_option("network", sa.network, "network JSON file")->required();
    solve->add_option("--mode", sa.mode, "centralized or distributed")
        ->check(CLI::IsMember({"centralized", "distributed"}));
    solve->add_option("--out", sa.trace_out, "trace CSV (distributed mode)");
    solve->add_option("--rates-out", sa.rates_out, "write the rates as a rates JSON file");
    solve->add_option("--seed", sa.seed, "step-size seed (default: FADEMAC_SEED, else 1)");
    solve->add_option("--max-rounds", sa.max_rounds, "round cap (distributed mode)")->check(CLI::PositiveNumber);
    solve->add_option("--dual-step", sa.dual_step, "base dual gain (distributed mode)")->check(CLI::PositiveNumber);
    solve->add_option("--primal-ratio", sa.primal_ratio, "primal gain / dual gain")->check(CLI::PositiveNumber);
    solve->add_flag("--json", sa.json, "print JSON");

    CurveArgs ca;
    auto* curve = app.add_subcommand("curve", "outage of the optimal allocation over a sweep");
    curve->add_option("network", ca.network, "network JSON file")->required();
    curve->add_option("--sweep", ca.sweep, "multicast_rate or snr (dB)")
        ->check(CLI::IsMember({"multicast_rate", "rate", "snr"}));
    curve->add_option("--lo", ca.lo, "first sweep value")->required();
    curve->add_option("--hi", ca.hi, "last sweep value")->required();
    curve->add_option("--step", ca.step, "sweep step")->required();
    curve->add_option("--methods", ca.methods, "any of lower, upper, mc")->delimiter(',');
    curve->add_option("--out", ca.out, "curve CSV (default: stdout)");
    ca.mc.add(curve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kInputError;
    }

    try {
        if (outage->parsed()) return cmd_outage(oa);
        if (solve->parsed()) return cmd_solve(sa);
        if (curve->parsed()) return cmd_curve(ca);
    } catch (const InvalidInput& e) {
        std::cerr << "fademac: " << e.what() << "\n";
        return kInputError;
    } catch (const NotComputable& e) {
        std::cerr << "fademac: " << e.what() << "\n";
        return kInputError;
    } catch (const IllConditioned& e) {
        std::cerr << "fademac: " << e.what() << "; use --method mc\n";
        return kInputError;
    }
    return kInputError;
}
