#ifndef FADEMAC_ALLOCATION_HPP
#define FADEMAC_ALLOCATION_HPP

// Rate allocation minimizing sum_{j != s} l_j 2^{R_j}, R_j = sum of the rates
// into j, subject to 0 <= f^d <= r on every link and unit-demand flow
// conservation toward every destination d.
//
// The Lagrangian used for certification is the one of the exponential-
// constraint form:
//   L = F(r) + sum rho (e^{-f} - 1) + sum w (e^{f-r} - 1)
//            + sum phi (e^{q} - 1) + sum mu (e^{-q} - 1),
//   q_j^d = sum_{in} f^d - sum_{out} f^d - psi_j^d.
// At a feasible point it has the same KKT conditions as the linear form, with
// the flow-conservation multiplier split as phi - mu.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fademac/error.hpp"
#include "fademac/network.hpp"

namespace fademac {

class AllocationProblem {
public:
    explicit AllocationProblem(NetworkSpec net) : net_(std::move(net)) {
        const auto& links = net_.links();
        const auto reach_s = net_.reachable_from(net_.source());
        usable_.assign(net_.destinations().size(), std::vector<bool>(links.size(), false));
        for (std::size_t k = 0; k < net_.destinations().size(); ++k) {
            const auto reach_d = net_.reaching(net_.destinations()[k]);
            for (std::size_t e = 0; e < links.size(); ++e)
                usable_[k][e] = reach_s[net_.node_index(links[e].tail)] && reach_d[net_.node_index(links[e].head)];
        }
        receiver_of_link_.resize(links.size());
        for (std::size_t e = 0; e < links.size(); ++e) receiver_of_link_[e] = net_.node_index(links[e].head);
        lambda_.assign(net_.nodes().size(), 0.0);
        for (auto j : net_.receivers()) lambda_[net_.node_index(j)] = net_.receiver_lambda(j);
    }

    [[nodiscard]] const NetworkSpec& network() const noexcept { return net_; }
    [[nodiscard]] std::size_t links() const noexcept { return net_.links().size(); }
    [[nodiscard]] std::size_t destinations() const noexcept { return net_.destinations().size(); }
    [[nodiscard]] std::size_t nodes() const noexcept { return net_.nodes().size(); }
    [[nodiscard]] std::size_t source_index() const { return net_.node_index(net_.source()); }
    [[nodiscard]] double demand() const noexcept { return net_.multicast_rate(); }

    /// Whether link e lies on some source-to-destination walk for destination k.
    [[nodiscard]] bool usable(std::size_t k, std::size_t e) const { return usable_[k][e]; }
    [[nodiscard]] bool usable_by_any(std::size_t e) const {
        for (const auto& u : usable_)
            if (u[e]) return true;
        return false;
    }
    [[nodiscard]] std::size_t tail_index(std::size_t e) const { return net_.node_index(net_.links()[e].tail); }
    [[nodiscard]] std::size_t head_index(std::size_t e) const { return receiver_of_link_[e]; }
    /// Receiver rate parameter by node index (0 for nodes without in-links).
    [[nodiscard]] double lambda(std::size_t node) const { return lambda_[node]; }

    /// psi_j^d: the demand at destination k's node, zero elsewhere.
    [[nodiscard]] double psi(std::size_t k, std::size_t node) const {
        return node == net_.node_index(net_.destinations()[k]) ? demand() : 0.0;
    }

    /// R_j = sum of rates into each node, by node index.
    [[nodiscard]] std::vector<double> incoming_rate(std::span<const double> rates) const {
        detail::require(rates.size() == links(), "rate vector length does not match link count");
        std::vector<double> total(nodes(), 0.0);
        for (std::size_t e = 0; e < links(); ++e) total[head_index(e)] += rates[e];
        return total;
    }

private:
    NetworkSpec net_;
    std::vector<std::vector<bool>> usable_;
    std::vector<std::size_t> receiver_of_link_;
    std::vector<double> lambda_;
};

/// Primal and dual variables. Per-destination arrays are indexed
/// [destination][link] or [destination][node index]; source entries of phi,
/// mu are unused and stay zero.
struct AllocationState {
    std::vector<double> rates;
    std::vector<std::vector<double>> flows;
    std::vector<std::vector<double>> rho;
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> phi;
    std::vector<std::vector<double>> mu;

    static AllocationState zeros(const AllocationProblem& p) {
        AllocationState s;
        s.rates.assign(p.links(), 0.0);
        s.flows.assign(p.destinations(), std::vector<double>(p.links(), 0.0));
        s.rho = s.flows;
        s.w = s.flows;
        s.phi.assign(p.destinations(), std::vector<double>(p.nodes(), 0.0));
        s.mu = s.phi;
        return s;
    }
};

/// sum_{j != s} l_j 2^{R_j} over nodes with in-links.
inline double objective(const AllocationProblem& p, std::span<const double> rates) {
    const auto in = p.incoming_rate(rates);
    double total = 0.0;
    for (std::size_t j = 0; j < p.nodes(); ++j)
        if (p.lambda(j) > 0.0) total += p.lambda(j) * std::exp2(in[j]);
    return total;
}

/// q_j^d for every destination and node (zero at the source).
inline std::vector<std::vector<double>> flow_residuals(const AllocationProblem& p,
                                                       const std::vector<std::vector<double>>& flows) {
    std::vector<std::vector<double>> q(p.destinations(), std::vector<double>(p.nodes(), 0.0));
    for (std::size_t k = 0; k < p.destinations(); ++k) {
        for (std::size_t e = 0; e < p.links(); ++e) {
            q[k][p.head_index(e)] += flows[k][e];
            q[k][p.tail_index(e)] -= flows[k][e];
        }
        for (std::size_t j = 0; j < p.nodes(); ++j) q[k][j] -= p.psi(k, j);
        q[k][p.source_index()] = 0.0;
    }
    return q;
}

/// ln2 l_j 2^{R_j}: derivative of the objective with respect to any rate into j.
inline std::vector<double> marginal_cost(const AllocationProblem& p, std::span<const double> rates) {
    const auto in = p.incoming_rate(rates);
    std::vector<double> g(p.nodes(), 0.0);
    for (std::size_t j = 0; j < p.nodes(); ++j) g[j] = std::numbers::ln2 * p.lambda(j) * std::exp2(in[j]);
    return g;
}

/// Delta^d_{ij} = -phi_j e^{q_j} + [i != s] phi_i e^{q_i} + mu_j e^{-q_j} - [i != s] mu_i e^{-q_i}.
inline double flow_coupling(const AllocationProblem& p, const AllocationState& s,
                            const std::vector<std::vector<double>>& q, std::size_t k, std::size_t e) {
    const auto i = p.tail_index(e);
    const auto j = p.head_index(e);
    double delta = -s.phi[k][j] * std::exp(q[k][j]) + s.mu[k][j] * std::exp(-q[k][j]);
    if (i != p.source_index()) delta += s.phi[k][i] * std::exp(q[k][i]) - s.mu[k][i] * std::exp(-q[k][i]);
    return delta;
}

struct KktResiduals {
    double primal = 0.0;           // max of -f, f - r, |q|
    double dual = 0.0;             // max negative dual magnitude
    double stationarity = 0.0;     // max-abs gradient of the Lagrangian in (r, f)
    double complementarity = 0.0;  // max |dual * constraint value|
    std::vector<double> flow_violation;  // max_j |q_j^d| per destination
};

inline KktResiduals kkt_residuals(const AllocationProblem& p, const AllocationState& s) {
    KktResiduals res;
    const auto q = flow_residuals(p, s.flows);
    const auto g = marginal_cost(p, s.rates);
    res.flow_violation.assign(p.destinations(), 0.0);
    for (std::size_t k = 0; k < p.destinations(); ++k) {
        for (std::size_t j = 0; j < p.nodes(); ++j) {
            if (j == p.source_index()) continue;
            res.flow_violation[k] = std::max(res.flow_violation[k], std::abs(q[k][j]));
            res.dual = std::max({res.dual, -s.phi[k][j], -s.mu[k][j]});
            res.complementarity = std::max({res.complementarity, std::abs(s.phi[k][j] * std::expm1(q[k][j])),
                                            std::abs(s.mu[k][j] * std::expm1(-q[k][j]))});
        }
        res.primal = std::max(res.primal, res.flow_violation[k]);
    }
    for (std::size_t e = 0; e < p.links(); ++e) {
        double dr = g[p.head_index(e)];
        for (std::size_t k = 0; k < p.destinations(); ++k) {
            const double f = s.flows[k][e];
            const double slack = std::exp(f - s.rates[e]);
            dr -= s.w[k][e] * slack;
            const double df = -s.rho[k][e] * std::exp(-f) + s.w[k][e] * slack - flow_coupling(p, s, q, k, e);
            res.stationarity = std::max(res.stationarity, std::abs(df));
            res.primal = std::max({res.primal, -f, f - s.rates[e]});
            res.dual = std::max({res.dual, -s.rho[k][e], -s.w[k][e]});
            res.complementarity = std::max({res.complementarity, std::abs(s.rho[k][e] * std::expm1(-f)),
                                            std::abs(s.w[k][e] * std::expm1(f - s.rates[e]))});
        }
        res.stationarity = std::max(res.stationarity, std::abs(dr));
    }
    res.primal = std::max(res.primal, 0.0);
    res.dual = std::max(res.dual, 0.0);
    return res;
}

struct SolverOptions {
    double primal_tol = 1e-6;
    double stationarity_tol = 1e-5;
    double complementarity_tol = 1e-5;
    int max_iterations = 200;
    /// Upper cap on every rate; verified inactive at the optimum.
    double rate_cap = 64.0;
    /// Seeds a random perturbation of the interior starting point.
    std::uint64_t seed = 0;
};

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
    bool rate_cap_active = false;
    KktResiduals residuals;
    std::string message;
};

struct Solution {
    AllocationState state;
    SolveReport report;
};

namespace detail {

/// Given node potentials nu (flow-conservation multipliers) for the nodes that
/// carry flow toward each destination, fill the duals of all remaining
/// variables so that the exponential-form KKT conditions hold: nodes not
/// reachable from the source take the smallest potential in use (counting the
/// source's 0), nodes that cannot reach the destination take the largest, and
/// links that carry no flow for any destination get the marginal cost spread
/// over their w duals. Picking the extreme potentials rather than anything
/// beyond them keeps the duals as small as the conditions allow.
inline void complete_duals(const AllocationProblem& p, AllocationState& s,
                           std::vector<std::vector<double>> nu, const std::vector<std::vector<bool>>& has_row) {
    const auto& net = p.network();
    const auto reach_s = net.reachable_from(net.source());
    const auto g = marginal_cost(p, s.rates);
    for (std::size_t k = 0; k < p.destinations(); ++k) {
        double lo = 0.0;
        double hi = 0.0;
        for (std::size_t j = 0; j < p.nodes(); ++j)
            if (has_row[k][j]) {
                lo = std::min(lo, nu[k][j]);
                hi = std::max(hi, nu[k][j]);
            }
        const auto reach_d = net.reaching(net.destinations()[k]);
        for (std::size_t j = 0; j < p.nodes(); ++j) {
            if (j == p.source_index()) {
                nu[k][j] = 0.0;
            } else if (!has_row[k][j]) {
                nu[k][j] = !reach_s[j] ? lo : (!reach_d[j] ? hi : 0.0);
            }
            s.phi[k][j] = std::max(nu[k][j], 0.0);
            s.mu[k][j] = std::max(-nu[k][j], 0.0);
        }
    }
    const auto q = flow_residuals(p, s.flows);
    for (std::size_t e = 0; e < p.links(); ++e) {
        const bool any = p.usable_by_any(e) && p.demand() > 0.0;
        for (std::size_t k = 0; k < p.destinations(); ++k) {
            if (any && p.usable(k, e)) continue;
            const double delta = flow_coupling(p, s, q, k, e);
            if (any) {
                s.w[k][e] = 0.0;
                s.rho[k][e] = std::max(0.0, -delta);
            } else {
                s.w[k][e] = g[p.head_index(e)] / static_cast<double>(p.destinations());
                s.rho[k][e] = std::max(0.0, s.w[k][e] - delta);
            }
        }
    }
}

}  // namespace detail

/// Centralized reference solver: an infeasible-start primal-dual interior-
/// point method on the linear-constraint form, restricted to the links that
/// can carry flow toward each destination. The returned state is certified by
/// kkt_residuals, independently of the solver's own stopping test.
inline Solution solve_centralized(const AllocationProblem& p, const SolverOptions& opt = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    Solution sol;
    sol.state = AllocationState::zeros(p);
    const std::size_t L = p.links();
    const std::size_t D = p.destinations();
    const std::size_t N = p.nodes();
    const double demand = p.demand();

    std::vector<std::vector<bool>> has_row(D, std::vector<bool>(N, false));
    if (demand == 0.0) {
        detail::complete_duals(p, sol.state, std::vector<std::vector<double>>(D, std::vector<double>(N, 0.0)), has_row);
        sol.report.converged = true;
        sol.report.objective = objective(p, sol.state.rates);
        sol.report.residuals = kkt_residuals(p, sol.state);
        sol.report.message = "zero demand";
        return sol;
    }

    // variable indices
    constexpr std::ptrdiff_t kNone = -1;
    std::vector<std::ptrdiff_t> r_idx(L, kNone);
    std::vector<std::vector<std::ptrdiff_t>> f_idx(D, std::vector<std::ptrdiff_t>(L, kNone));
    std::ptrdiff_t n = 0;
    for (std::size_t e = 0; e < L; ++e)
        if (p.usable_by_any(e)) r_idx[e] = n++;
    const std::ptrdiff_t n_rates = n;
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t e = 0; e < L; ++e)
            if (p.usable(k, e)) f_idx[k][e] = n++;

    // equality rows: flow conservation at non-source nodes touching a usable link
    std::vector<std::vector<std::ptrdiff_t>> row_idx(D, std::vector<std::ptrdiff_t>(N, kNone));
    std::ptrdiff_t m_eq = 0;
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t e = 0; e < L; ++e) {
            if (!p.usable(k, e)) continue;
            for (auto j : {p.tail_index(e), p.head_index(e)})
                if (j != p.source_index() && row_idx[k][j] == kNone) {
                    row_idx[k][j] = m_eq++;
                    has_row[k][j] = true;
                }
        }
    MatrixXd E = MatrixXd::Zero(m_eq, n);
    VectorXd psi = VectorXd::Zero(m_eq);
    for (std::size_t k = 0; k < D; ++k) {
        for (std::size_t e = 0; e < L; ++e) {
            if (f_idx[k][e] == kNone) continue;
            if (auto r = row_idx[k][p.head_index(e)]; r != kNone) E(r, f_idx[k][e]) += 1.0;
            if (auto r = row_idx[k][p.tail_index(e)]; r != kNone) E(r, f_idx[k][e]) -= 1.0;
        }
        for (std::size_t j = 0; j < N; ++j)
            if (row_idx[k][j] != kNone) psi(row_idx[k][j]) = p.psi(k, j);
    }

    // inequalities G x <= h: -f <= 0, f - r <= 0, r <= cap
    const std::ptrdiff_t n_flows = n - n_rates;
    const std::ptrdiff_t m = 2 * n_flows + n_rates;
    MatrixXd G = MatrixXd::Zero(m, n);
    VectorXd h = VectorXd::Zero(m);
    {
        std::ptrdiff_t row = 0;
        for (std::size_t k = 0; k < D; ++k)
            for (std::size_t e = 0; e < L; ++e) {
                if (f_idx[k][e] == kNone) continue;
                G(row++, f_idx[k][e]) = -1.0;
                G(row, f_idx[k][e]) = 1.0;
                G(row++, r_idx[e]) = -1.0;
            }
        for (std::size_t e = 0; e < L; ++e)
            if (r_idx[e] != kNone) {
                G(row, r_idx[e]) = 1.0;
                h(row++) = opt.rate_cap;
            }
    }

    // objective: sum_j l_j exp(ln2 * sum_{e into j} r_e)
    auto node_exponent = [&](const VectorXd& x) {
        std::vector<double> s(N, 0.0);
        for (std::size_t e = 0; e < L; ++e)
            if (r_idx[e] != kNone) s[p.head_index(e)] += x(r_idx[e]);
        return s;
    };
    auto gradient = [&](const VectorXd& x) {
        VectorXd grad = VectorXd::Zero(n);
        const auto s = node_exponent(x);
        for (std::size_t e = 0; e < L; ++e)
            if (r_idx[e] != kNone) {
                const auto j = p.head_index(e);
                grad(r_idx[e]) = std::numbers::ln2 * p.lambda(j) * std::exp2(s[j]);
            }
        return grad;
    };
    auto hessian = [&](const VectorXd& x) {
        MatrixXd H = MatrixXd::Zero(n, n);
        const auto s = node_exponent(x);
        for (std::size_t a = 0; a < L; ++a) {
            if (r_idx[a] == kNone) continue;
            for (std::size_t b = 0; b < L; ++b) {
                if (r_idx[b] == kNone || p.head_index(a) != p.head_index(b)) continue;
                const auto j = p.head_index(a);
                H(r_idx[a], r_idx[b]) = std::numbers::ln2 * std::numbers::ln2 * p.lambda(j) * std::exp2(s[j]);
            }
        }
        return H;
    };

    // strictly interior start
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(0.75, 1.25);
    VectorXd x = VectorXd::Zero(n);
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t e = 0; e < L; ++e)
            if (f_idx[k][e] != kNone) x(f_idx[k][e]) = 0.5 * demand * (opt.seed == 0 ? 1.0 : jitter(rng));
    for (std::size_t e = 0; e < L; ++e) {
        if (r_idx[e] == kNone) continue;
        double top = 0.0;
        for (std::size_t k = 0; k < D; ++k)
            if (f_idx[k][e] != kNone) top = std::max(top, x(f_idx[k][e]));
        x(r_idx[e]) = top + 0.5 * demand * (opt.seed == 0 ? 1.0 : jitter(rng));
    }
    VectorXd lam = VectorXd::Ones(m);
    VectorXd nu = VectorXd::Zero(m_eq);

    constexpr double kMu = 10.0;
    constexpr double kAlpha = 0.01;
    constexpr double kBeta = 0.5;
    auto residual = [&](const VectorXd& xx, const VectorXd& ll, const VectorXd& vv, double t) {
        const VectorXd g = G * xx - h;
        VectorXd r(n + m + m_eq);
        r.head(n) = gradient(xx) + G.transpose() * ll + E.transpose() * vv;
        r.segment(n, m) = -(ll.array() * g.array()).matrix() - VectorXd::Constant(m, 1.0 / t);
        r.tail(m_eq) = E * xx - psi;
        return r;
    };

    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const VectorXd g = G * x - h;
        const double gap = -g.dot(lam);
        const VectorXd grad = gradient(x);
        const VectorXd r_dual = grad + G.transpose() * lam + E.transpose() * nu;
        const VectorXd r_pri = E * x - psi;
        const double scale = std::max(1.0, grad.lpNorm<Eigen::Infinity>());
        if (r_pri.lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, demand) &&
            r_dual.lpNorm<Eigen::Infinity>() <= 1e-11 * scale && gap <= 1e-11 * scale)
            break;

        const double t = kMu * static_cast<double>(m) / gap;
        const VectorXd r_cent = -(lam.array() * g.array()).matrix() - VectorXd::Constant(m, 1.0 / t);
        const VectorXd d = (-lam.array() / g.array()).matrix();  // > 0

        MatrixXd K = MatrixXd::Zero(n + m_eq, n + m_eq);
        K.topLeftCorner(n, n) = hessian(x) + G.transpose() * d.asDiagonal() * G;
        K.topRightCorner(n, m_eq) = E.transpose();
        K.bottomLeftCorner(m_eq, n) = E;
        VectorXd rhs(n + m_eq);
        rhs.head(n) = -r_dual - G.transpose() * (r_cent.array() / g.array()).matrix();
        rhs.tail(m_eq) = -r_pri;
        const VectorXd step = K.partialPivLu().solve(rhs);
        const VectorXd dx = step.head(n);
        const VectorXd dnu = step.tail(m_eq);
        const VectorXd dlam = (d.array() * (G * dx).array() + r_cent.array() / g.array()).matrix();

        double s_max = 1.0;
        for (std::ptrdiff_t i = 0; i < m; ++i)
            if (dlam(i) < 0.0) s_max = std::min(s_max, -lam(i) / dlam(i));
        double s = 0.99 * s_max;
        while (((G * (x + s * dx) - h).array() >= 0.0).any()) s *= kBeta;
        const double r0 = residual(x, lam, nu, t).norm();
        while (residual(x + s * dx, lam + s * dlam, nu + s * dnu, t).norm() > (1.0 - kAlpha * s) * r0 && s > 1e-14)
            s *= kBeta;
        x += s * dx;
        lam += s * dlam;
        nu += s * dnu;
    }

    auto& st = sol.state;
    for (std::size_t e = 0; e < L; ++e)
        if (r_idx[e] != kNone) st.rates[e] = x(r_idx[e]);
    std::ptrdiff_t row = 0;
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t e = 0; e < L; ++e) {
            if (f_idx[k][e] == kNone) continue;
            st.flows[k][e] = x(f_idx[k][e]);
            st.rho[k][e] = lam(row++);
            st.w[k][e] = lam(row++);
        }
    std::vector<std::vector<double>> node_nu(D, std::vector<double>(N, 0.0));
    for (std::size_t k = 0; k < D; ++k)
        for (std::size_t j = 0; j < N; ++j)
            if (row_idx[k][j] != kNone) node_nu[k][j] = nu(row_idx[k][j]);
    detail::complete_duals(p, st, std::move(node_nu), has_row);

    auto& rep = sol.report;
    rep.iterations = it;
    rep.objective = objective(p, st.rates);
    rep.residuals = kkt_residuals(p, st);
    rep.rate_cap_active = std::any_of(st.rates.begin(), st.rates.end(),
                                      [&](double r) { return r > opt.rate_cap - 1e-6; });
    rep.converged = rep.residuals.primal <= opt.primal_tol && rep.residuals.dual == 0.0 &&
                    rep.residuals.stationarity <= opt.stationarity_tol &&
                    rep.residuals.complementarity <= opt.complementarity_tol && !rep.rate_cap_active;
    rep.message = rep.converged ? "KKT certified"
                  : it >= opt.max_iterations ? "iteration cap reached; returning best iterate"
                                             : "KKT residuals above tolerance";
    return sol;
}

}  // namespace fademac

#endif
