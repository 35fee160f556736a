#ifndef FADEMAC_DISTRIBUTED_HPP
#define FADEMAC_DISTRIBUTED_HPP

// Discrete-time simulation of the primal-dual gradient laws for the
// exponential-constraint allocation problem. One processor per non-source
// node owns the variables of its in-links and its own flow-conservation duals;
// processors only talk to direct neighbors, in synchronous rounds:
//
//   1. exchange: along every link (i, j), j first sends i an upstream report
//      with f^d_{ij} for all d; once those have arrived, i sends j a
//      downstream report with (phi^d_i, mu^d_i, q^d_i) for all d. The source
//      is a stub whose downstream reports carry no duals.
//   2. update: every processor takes one forward-Euler step from its own
//      variables and the reports of this round.
//
// The rate law uses the exact gradient of sum_j l_j 2^{R_j}, i.e.
// ln2 l_j 2^{R_j}, so the equilibrium is the optimum of the base-2 problem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fademac/allocation.hpp"
#include "fademac/error.hpp"

namespace fademac {

/// Per-variable gain constants of the gradient laws plus the Euler step.
/// Index layout follows AllocationState: [link], [destination][link] and
/// [destination][node index].
struct StepSizes {
    std::vector<double> tau;                 // rates
    std::vector<std::vector<double>> kappa;  // flows
    std::vector<std::vector<double>> alpha;  // rho
    std::vector<std::vector<double>> theta;  // w
    std::vector<std::vector<double>> beta;   // phi
    std::vector<std::vector<double>> gamma;  // mu
    double euler_dt = 1.0;

    // Checked on the bundled networks over several seeds. A dual base of 1e-2
    // lets the flow update kappa (w + mu_head + mu_tail) exceed 2 on the
    // butterfly, and the forward Euler step then flips sign every round.
    static constexpr double kDefaultDual = 5e-3;
    static constexpr double kDefaultPrimalRatio = 10.0;

    /// Every gain drawn uniformly from [0.5, 1.5] times its base value; the
    /// primal base is `primal_ratio` times the dual base.
    static StepSizes randomized(const AllocationProblem& p, std::uint64_t seed, double dual = kDefaultDual,
                                double primal_ratio = kDefaultPrimalRatio, double euler_dt = 1.0) {
        detail::require(dual > 0.0 && primal_ratio > 0.0 && euler_dt > 0.0, "step sizes must be positive");
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> spread(0.5, 1.5);
        auto draw = [&](std::size_t rows, std::size_t cols, double base) {
            std::vector<std::vector<double>> v(rows, std::vector<double>(cols));
            for (auto& row : v)
                for (auto& x : row) x = base * spread(gen);
            return v;
        };
        StepSizes s;
        s.euler_dt = euler_dt;
        s.tau.resize(p.links());
        for (auto& x : s.tau) x = dual * primal_ratio * spread(gen);
        s.kappa = draw(p.destinations(), p.links(), dual * primal_ratio);
        s.alpha = draw(p.destinations(), p.links(), dual);
        s.theta = draw(p.destinations(), p.links(), dual);
        s.beta = draw(p.destinations(), p.nodes(), dual);
        s.gamma = draw(p.destinations(), p.nodes(), dual);
        return s;
    }
};

enum class MessageKind : std::uint8_t { flow_report, dual_report };

/// Content of one message. Flow reports fill `values` with f^d for every d;
/// dual reports fill phi, mu, q (left empty by the source stub).
struct Message {
    std::uint64_t round = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    MessageKind kind = MessageKind::flow_report;
    std::size_t link = 0;
    std::vector<double> values;
    std::vector<double> phi;
    std::vector<double> mu;
};

/// Compact record of a delivered message.
struct LogEntry {
    std::uint64_t round;
    NodeId sender;
    NodeId receiver;
    MessageKind kind;
};

/// [x]^+_p: zero when both the candidate derivative and the dual are negative.
inline double project(double x, double p) { return (x < 0.0 && p < 0.0) ? 0.0 : x; }

class NodeProcessor {
public:
    NodeProcessor(const AllocationProblem& p, NodeId id) : id_(id) {
        const auto& net = p.network();
        detail::require(id != net.source(), "the source has no processor");
        index_ = net.node_index(id);
        lambda_ = p.lambda(index_);
        in_ = net.in_links(id);
        out_ = net.out_links(id);
        const std::size_t D = p.destinations();
        r_.assign(in_.size(), 0.0);
        f_.assign(D, std::vector<double>(in_.size(), 0.0));
        rho_ = f_;
        w_ = f_;
        phi_.assign(D, 0.0);
        mu_.assign(D, 0.0);
        psi_.resize(D);
        for (std::size_t k = 0; k < D; ++k) psi_[k] = p.psi(k, index_);
        out_flow_.assign(D, std::vector<double>(out_.size(), 0.0));
        out_stamp_.assign(out_.size(), kNever);
        tail_.assign(in_.size(), {});
        tail_stamp_.assign(in_.size(), kNever);
        for (std::size_t a = 0; a < in_.size(); ++a) {
            tail_node_.push_back(net.links()[in_[a]].tail);
            tail_is_source_.push_back(tail_node_.back() == net.source());
        }
        for (auto e : out_) head_node_.push_back(net.links()[e].head);
    }

    [[nodiscard]] NodeId id() const noexcept { return id_; }
    [[nodiscard]] const std::vector<std::size_t>& in_links() const noexcept { return in_; }
    [[nodiscard]] const std::vector<std::size_t>& out_links() const noexcept { return out_; }

    /// q^d_j from owned in-flows and the cached out-flows.
    [[nodiscard]] std::vector<double> residual() const {
        std::vector<double> q(psi_.size());
        for (std::size_t k = 0; k < q.size(); ++k) {
            double s = -psi_[k];
            for (double f : f_[k]) s += f;
            for (double f : out_flow_[k]) s -= f;
            q[k] = s;
        }
        return q;
    }

    /// Upstream flow reports of `round`, one per in-link.
    void emit_flow_reports(std::uint64_t round, std::vector<Message>& batch) const {
        for (std::size_t a = 0; a < in_.size(); ++a) {
            Message m{round, id_, tail_node_[a], MessageKind::flow_report, in_[a], {}, {}, {}};
            for (const auto& fk : f_) m.values.push_back(fk[a]);
            batch.push_back(std::move(m));
        }
    }

    /// Downstream dual reports of `round`, one per out-link. Sent after this
    /// round's flow reports arrived, so q is current.
    void emit_dual_reports(std::uint64_t round, std::vector<Message>& batch) const {
        const auto q = residual();
        for (std::size_t b = 0; b < out_.size(); ++b)
            batch.push_back({round, id_, head_node_[b], MessageKind::dual_report, out_[b], q, phi_, mu_});
    }

    void receive(const Message& m) {
        if (m.kind == MessageKind::flow_report) {
            const auto b = position(out_, m.link);
            detail::require(m.values.size() == psi_.size(), "flow report has the wrong destination count");
            for (std::size_t k = 0; k < psi_.size(); ++k) out_flow_[k][b] = m.values[k];
            out_stamp_[b] = m.round;
        } else {
            const auto a = position(in_, m.link);
            tail_[a] = {m.phi, m.mu, m.values};
            tail_stamp_[a] = m.round;
        }
    }

    /// One Euler step of all owned variables. Returns the number of duals
    /// clamped back to zero.
    std::uint64_t local_update(std::uint64_t round, const StepSizes& st) {
        for (std::size_t b = 0; b < out_.size(); ++b)
            if (out_stamp_[b] != round)
                throw ProtocolError("node " + std::to_string(id_) + ": no flow report from " +
                                    std::to_string(head_node_[b]) + " in round " + std::to_string(round));
        for (std::size_t a = 0; a < in_.size(); ++a)
            if (tail_stamp_[a] != round)
                throw ProtocolError("node " + std::to_string(id_) + ": no dual report from " +
                                    std::to_string(tail_node_[a]) + " in round " + std::to_string(round));

        const double dt = st.euler_dt;
        const std::size_t D = psi_.size();
        const auto q = residual();
        double rate_sum = 0.0;
        for (double r : r_) rate_sum += r;
        const double marginal = std::numbers::ln2 * lambda_ * std::exp2(rate_sum);

        // derivatives from the current values only
        std::vector<double> dr(in_.size());
        std::vector<std::vector<double>> df(D, std::vector<double>(in_.size()));
        std::vector<std::vector<double>> drho = df;
        std::vector<std::vector<double>> dw = df;
        for (std::size_t a = 0; a < in_.size(); ++a) {
            const auto e = in_[a];
            double pull = 0.0;
            for (std::size_t k = 0; k < D; ++k) {
                const double f = f_[k][a];
                const double slack = std::exp(f - r_[a]);
                pull += w_[k][a] * slack;
                double delta = -phi_[k] * std::exp(q[k]) + mu_[k] * std::exp(-q[k]);
                if (!tail_is_source_[a]) {
                    const auto& t = tail_[a];
                    delta += t.phi[k] * std::exp(t.q[k]) - t.mu[k] * std::exp(-t.q[k]);
                }
                df[k][a] = st.kappa[k][e] * (rho_[k][a] * std::exp(-f) - w_[k][a] * slack + delta);
                drho[k][a] = st.alpha[k][e] * project(std::exp(-f) - 1.0, rho_[k][a]);
                dw[k][a] = st.theta[k][e] * project(slack - 1.0, w_[k][a]);
            }
            dr[a] = st.tau[e] * (-marginal + pull);
        }
        std::vector<double> dphi(D), dmu(D);
        for (std::size_t k = 0; k < D; ++k) {
            dphi[k] = st.beta[k][index_] * project(std::exp(q[k]) - 1.0, phi_[k]);
            dmu[k] = st.gamma[k][index_] * project(std::exp(-q[k]) - 1.0, mu_[k]);
        }

        std::uint64_t clamps = 0;
        auto step_dual = [&](double& v, double d) {
            v += dt * d;
            if (v < 0.0) {
                v = 0.0;
                ++clamps;
            }
        };
        for (std::size_t a = 0; a < in_.size(); ++a) {
            r_[a] += dt * dr[a];
            for (std::size_t k = 0; k < D; ++k) {
                f_[k][a] += dt * df[k][a];
                step_dual(rho_[k][a], drho[k][a]);
                step_dual(w_[k][a], dw[k][a]);
            }
        }
        for (std::size_t k = 0; k < D; ++k) {
            step_dual(phi_[k], dphi[k]);
            step_dual(mu_[k], dmu[k]);
        }
        return clamps;
    }

    /// Copies owned variables into a global state.
    void store(AllocationState& s) const {
        for (std::size_t a = 0; a < in_.size(); ++a) {
            s.rates[in_[a]] = r_[a];
            for (std::size_t k = 0; k < psi_.size(); ++k) {
                s.flows[k][in_[a]] = f_[k][a];
                s.rho[k][in_[a]] = rho_[k][a];
                s.w[k][in_[a]] = w_[k][a];
            }
        }
        for (std::size_t k = 0; k < psi_.size(); ++k) {
            s.phi[k][index_] = phi_[k];
            s.mu[k][index_] = mu_[k];
        }
    }

    /// Takes owned variables from a global state.
    void load(const AllocationState& s) {
        for (std::size_t a = 0; a < in_.size(); ++a) {
            r_[a] = s.rates[in_[a]];
            for (std::size_t k = 0; k < psi_.size(); ++k) {
                f_[k][a] = s.flows[k][in_[a]];
                rho_[k][a] = s.rho[k][in_[a]];
                w_[k][a] = s.w[k][in_[a]];
            }
        }
        for (std::size_t k = 0; k < psi_.size(); ++k) {
            phi_[k] = s.phi[k][index_];
            mu_[k] = s.mu[k][index_];
        }
    }

private:
    struct TailView {
        std::vector<double> phi, mu, q;
    };
    static constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

    static std::size_t position(const std::vector<std::size_t>& v, std::size_t link) {
        const auto it = std::find(v.begin(), v.end(), link);
        if (it == v.end()) throw ProtocolError("message on link " + std::to_string(link) + " that is not incident");
        return static_cast<std::size_t>(it - v.begin());
    }

    NodeId id_;
    std::size_t index_ = 0;
    double lambda_ = 0.0;
    std::vector<std::size_t> in_, out_;
    std::vector<NodeId> tail_node_, head_node_;
    std::vector<bool> tail_is_source_;
    std::vector<double> r_;
    std::vector<std::vector<double>> f_, rho_, w_;
    std::vector<double> phi_, mu_, psi_;
    std::vector<std::vector<double>> out_flow_;
    std::vector<std::uint64_t> out_stamp_;
    std::vector<TailView> tail_;
    std::vector<std::uint64_t> tail_stamp_;
};

/// All processors of a network plus the source stub.
class Simulation {
public:
    explicit Simulation(const AllocationProblem& p) : problem_(&p) {
        for (const auto& n : p.network().nodes())
            if (n.id != p.network().source()) procs_.emplace_back(p, n.id);
        for (std::size_t i = 0; i < procs_.size(); ++i) slot_[procs_[i].id()] = i;
    }

    [[nodiscard]] const std::vector<NodeProcessor>& processors() const noexcept { return procs_; }

    /// Runs the message phase of one round and returns everything sent, in
    /// canonical order: first the upstream flow reports (ascending link id),
    /// which are delivered, then the downstream dual reports (ascending link
    /// id), which are computed from the fresh flows and delivered.
    std::vector<Message> exchange_round(std::uint64_t round) {
        const auto& net = problem_->network();
        auto by_link = [](const Message& a, const Message& b) { return a.link < b.link; };
        std::vector<Message> flows;
        for (const auto& proc : procs_) proc.emit_flow_reports(round, flows);
        std::stable_sort(flows.begin(), flows.end(), by_link);
        deliver(flows);
        std::vector<Message> duals;
        for (const auto& proc : procs_) proc.emit_dual_reports(round, duals);
        for (auto e : net.out_links(net.source()))
            duals.push_back({round, net.source(), net.links()[e].head, MessageKind::dual_report, e, {}, {}, {}});
        std::stable_sort(duals.begin(), duals.end(), by_link);
        deliver(duals);
        flows.insert(flows.end(), std::make_move_iterator(duals.begin()), std::make_move_iterator(duals.end()));
        return flows;
    }

    /// Delivers a batch; every message must travel along the link it names.
    void deliver(const std::vector<Message>& batch) {
        const auto& net = problem_->network();
        for (const auto& m : batch) {
            const auto& l = net.links()[m.link];
            const bool along = (m.kind == MessageKind::dual_report && m.sender == l.tail && m.receiver == l.head) ||
                               (m.kind == MessageKind::flow_report && m.sender == l.head && m.receiver == l.tail);
            if (!along) throw ProtocolError("message is not between the endpoints of its link");
            if (m.receiver == net.source()) continue;  // the stub ignores flow reports
            procs_[slot_.at(m.receiver)].receive(m);
        }
    }

    std::uint64_t update_all(std::uint64_t round, const StepSizes& st) {
        std::uint64_t clamps = 0;
        for (auto& proc : procs_) clamps += proc.local_update(round, st);
        return clamps;
    }

    [[nodiscard]] AllocationState state() const {
        auto s = AllocationState::zeros(*problem_);
        for (const auto& proc : procs_) proc.store(s);
        return s;
    }

    void load(const AllocationState& s) {
        for (auto& proc : procs_) proc.load(s);
    }

private:
    const AllocationProblem* problem_;
    std::vector<NodeProcessor> procs_;
    std::map<NodeId, std::size_t> slot_;
};

struct TraceRow {
    std::uint64_t round;
    double objective;
    double max_flow_violation;
    double max_dual;
    std::uint64_t clamp_events;
};

struct StopCriterion {
    std::uint64_t max_rounds = 100'000;
    std::uint64_t window = 100;
    double relative_change = 1e-6;
    double flow_tolerance = 1e-4;
    double divergence_factor = 1e6;
};

struct RunOptions {
    StopCriterion stop;
    bool record_messages = false;
    /// Start from this state instead of all zeros.
    std::optional<AllocationState> initial;
};

enum class RunStatus { converged, round_cap, diverged };

inline std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::converged: return "converged";
        case RunStatus::round_cap: return "round cap reached";
        case RunStatus::diverged: return "diverged";
    }
    return "?";
}

struct RunResult {
    RunStatus status = RunStatus::round_cap;
    std::uint64_t rounds = 0;
    std::uint64_t messages = 0;
    AllocationState final_state;
    double objective = 0.0;
    std::vector<TraceRow> trace;
    std::vector<LogEntry> log;
};

namespace detail {

inline double max_dual(const AllocationState& s) {
    double m = 0.0;
    for (const auto* group : {&s.rho, &s.w, &s.phi, &s.mu})
        for (const auto& row : *group)
            for (double v : row) m = std::max(m, v);
    return m;
}

inline double max_flow_violation(const AllocationProblem& p, const AllocationState& s) {
    double m = 0.0;
    const auto q = flow_residuals(p, s.flows);
    for (const auto& row : q)
        for (double v : row) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace detail

/// Runs synchronous rounds until the objective has changed by less than
/// `relative_change` over the last `window` rounds and every flow residual is
/// below `flow_tolerance`, the round cap is hit, or the objective diverges.
/// Trace row 0 is the initial state; row m is the state after round m.
inline RunResult run(const AllocationProblem& p, const StepSizes& steps, const RunOptions& opt = {}) {
    Simulation sim(p);
    if (opt.initial) sim.load(*opt.initial);
    RunResult res;
    auto state = sim.state();
    const double initial = objective(p, state.rates);
    res.trace.push_back({0, initial, detail::max_flow_violation(p, state), detail::max_dual(state), 0});
    for (std::uint64_t round = 1; round <= opt.stop.max_rounds; ++round) {
        const auto batch = sim.exchange_round(round);
        res.messages += batch.size();
        if (opt.record_messages)
            for (const auto& m : batch) res.log.push_back({m.round, m.sender, m.receiver, m.kind});
        const auto clamps = sim.update_all(round, steps);
        state = sim.state();
        const double obj = objective(p, state.rates);
        const double viol = detail::max_flow_violation(p, state);
        res.trace.push_back({round, obj, viol, detail::max_dual(state), clamps});
        res.rounds = round;
        if (!std::isfinite(obj) || !std::isfinite(viol) || std::abs(obj) > opt.stop.divergence_factor * initial) {
            res.status = RunStatus::diverged;
            break;
        }
        if (round >= opt.stop.window) {
            const double past = res.trace[round - opt.stop.window].objective;
            if (std::abs(obj - past) <= opt.stop.relative_change * std::abs(obj) && viol < opt.stop.flow_tolerance) {
                res.status = RunStatus::converged;
                break;
            }
        }
    }
    res.final_state = std::move(state);
    res.objective = objective(p, res.final_state.rates);
    return res;
}

}  // namespace fademac

#endif
