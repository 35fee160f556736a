#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "fademac/distributed.hpp"
#include "fixtures.hpp"

using namespace fademac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_change(const AllocationState& a, const AllocationState& b) {
    double m = 0.0;
    for (std::size_t e = 0; e < a.rates.size(); ++e) m = std::max(m, std::abs(a.rates[e] - b.rates[e]));
    auto grid = [&](const auto& x, const auto& y) {
        for (std::size_t k = 0; k < x.size(); ++k)
            for (std::size_t i = 0; i < x[k].size(); ++i) m = std::max(m, std::abs(x[k][i] - y[k][i]));
    };
    grid(a.flows, b.flows);
    grid(a.rho, b.rho);
    grid(a.w, b.w);
    grid(a.phi, b.phi);
    grid(a.mu, b.mu);
    return m;
}

double min_dual(const AllocationState& s) {
    double m = 0.0;
    for (const auto* g : {&s.rho, &s.w, &s.phi, &s.mu})
        for (const auto& row : *g)
            for (double v : row) m = std::min(m, v);
    return m;
}

}  // namespace

TEST_CASE("projection bracket") {
    CHECK(project(-0.5, -1e-3) == 0.0);
    CHECK(project(-0.5, 0.0) == -0.5);
    CHECK(project(0.5, -1.0) == 0.5);
    CHECK(project(-0.5, 2.0) == -0.5);
}

TEST_CASE("one Euler step on a single link from rest") {
    const AllocationProblem p(fixtures::unit_network(2, {{0, 1}}, 0, {1}, 1.0));
    const auto st = StepSizes::randomized(p, 7);
    Simulation sim(p);
    sim.exchange_round(1);
    const auto clamps = sim.update_all(1, st);
    const auto s = sim.state();
    const std::size_t d = p.network().node_index(1);
    // f' = k (rho - w + Delta) = 0 with zero duals
    CHECK(s.flows[0][0] == 0.0);
    // r' = tau (-ln2 l 2^0 + 0)
    CHECK_THAT(s.rates[0], WithinRel(-st.tau[0] * std::numbers::ln2 * 1.0, 1e-15));
    // q = -1: phi' = beta (e^{-1} - 1) < 0 is clamped, mu' = gamma (e - 1)
    CHECK(s.phi[0][d] == 0.0);
    CHECK_THAT(s.mu[0][d], WithinRel(st.gamma[0][d] * (std::exp(1.0) - 1.0), 1e-15));
    // rho' = alpha (e^0 - 1) = 0, w' = theta (e^0 - 1) = 0
    CHECK(s.rho[0][0] == 0.0);
    CHECK(s.w[0][0] == 0.0);
    CHECK(clamps == 1);
}

TEST_CASE("updates need this round's reports") {
    const AllocationProblem p(fixtures::diamond());
    const auto st = StepSizes::randomized(p, 1);
    Simulation sim(p);
    CHECK_THROWS_AS(sim.update_all(1, st), ProtocolError);
    sim.exchange_round(1);
    CHECK_NOTHROW(sim.update_all(1, st));
    CHECK_THROWS_AS(sim.update_all(2, st), ProtocolError);
}

TEST_CASE("message pattern") {
    SECTION("two nodes: the sink reports flow, the source stub sends no duals") {
        const AllocationProblem p(fixtures::unit_network(2, {{0, 1}}, 0, {1}, 1.0));
        Simulation sim(p);
        const auto batch = sim.exchange_round(1);
        REQUIRE(batch.size() == 2);
        CHECK(batch[0].kind == MessageKind::flow_report);
        CHECK(batch[0].sender == 1);
        CHECK(batch[0].receiver == 0);
        CHECK(batch[0].values.size() == 1);
        CHECK(batch[1].kind == MessageKind::dual_report);
        CHECK(batch[1].sender == 0);
        CHECK(batch[1].phi.empty());
        CHECK(batch[1].mu.empty());
    }
    SECTION("a node without in-links only reports along its out-links") {
        const AllocationProblem p(fixtures::unit_network(3, {{0, 2}, {1, 2}}, 0, {2}, 1.0));
        Simulation sim(p);
        for (const auto& m : sim.exchange_round(1))
            if (m.sender == 1) {
                CHECK(m.kind == MessageKind::dual_report);
                CHECK(m.receiver == 2);
            }
    }
    SECTION("diamond: 2|E| messages per round, all along links") {
        const AllocationProblem p(fixtures::diamond());
        RunOptions opt;
        opt.stop.max_rounds = 3;
        opt.record_messages = true;
        const auto res = run(p, StepSizes::randomized(p, 1), opt);
        CHECK(res.log.size() == 2 * 4 * 3);
        CHECK(res.messages == 24);
    }
}

TEST_CASE("the centralized optimum is a fixed point") {
    for (const auto& net : {fixtures::single_path(), fixtures::diamond(), fixtures::butterfly()}) {
        const AllocationProblem p(net);
        const auto opt = solve_centralized(p);
        REQUIRE(opt.report.converged);
        const auto st = StepSizes::randomized(p, 3);
        Simulation sim(p);
        sim.load(opt.state);
        auto prev = sim.state();
        double worst = 0.0;
        for (std::uint64_t round = 1; round <= 1000; ++round) {
            sim.exchange_round(round);
            sim.update_all(round, st);
            auto now = sim.state();
            worst = std::max(worst, max_change(prev, now));
            prev = std::move(now);
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("distributed runs agree with the centralized solver") {
    for (const auto& net : {fixtures::single_path(), fixtures::diamond(), fixtures::butterfly(),
                            fixtures::twelve_node_reconstruction()}) {
        const AllocationProblem p(net);
        const auto central = solve_centralized(p);
        REQUIRE(central.report.converged);
        RunOptions opt;
        opt.record_messages = true;
        const auto res = run(p, StepSizes::randomized(p, 1), opt);
        CHECK(res.status == RunStatus::converged);
        CHECK_THAT(res.objective, WithinRel(central.report.objective, 1e-3));
        std::set<std::pair<NodeId, NodeId>> edges;
        for (const auto& l : net.links()) edges.insert({l.tail, l.head});
        std::size_t off_edge = 0;
        for (const auto& m : res.log) {
            const bool down = edges.count({m.sender, m.receiver}) != 0;
            const bool up = edges.count({m.receiver, m.sender}) != 0;
            if (!(m.kind == MessageKind::dual_report ? down : up)) ++off_edge;
        }
        CHECK(off_edge == 0);
        CHECK(res.log.size() == 2 * net.links().size() * res.rounds);
    }
}

TEST_CASE("duals stay nonnegative every round") {
    const AllocationProblem p(fixtures::butterfly());
    const auto st = StepSizes::randomized(p, 9);
    Simulation sim(p);
    for (std::uint64_t round = 1; round <= 3000; ++round) {
        sim.exchange_round(round);
        sim.update_all(round, st);
        REQUIRE(min_dual(sim.state()) >= 0.0);
    }
}

TEST_CASE("fixed seed gives identical traces") {
    const AllocationProblem p(fixtures::diamond());
    RunOptions opt;
    opt.stop.max_rounds = 2000;
    const auto a = run(p, StepSizes::randomized(p, 5), opt);
    const auto b = run(p, StepSizes::randomized(p, 5), opt);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].objective == b.trace[i].objective);
        CHECK(a.trace[i].max_flow_violation == b.trace[i].max_flow_violation);
        CHECK(a.trace[i].max_dual == b.trace[i].max_dual);
        CHECK(a.trace[i].clamp_events == b.trace[i].clamp_events);
    }
}

TEST_CASE("stop conditions") {
    const AllocationProblem p(fixtures::diamond());
    RunOptions once;
    once.stop.max_rounds = 1;
    const auto capped = run(p, StepSizes::randomized(p, 1), once);
    CHECK(capped.status == RunStatus::round_cap);
    CHECK(capped.trace.size() == 2);

    const auto wild = run(p, StepSizes::randomized(p, 1, 50.0, 10.0, 1.0));
    CHECK(wild.status == RunStatus::diverged);
}
