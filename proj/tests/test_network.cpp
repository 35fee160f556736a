#include <catch_amalgamated.hpp>

#include <cmath>

#include "fademac/network_outage.hpp"
#include "fixtures.hpp"

using namespace fademac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("mac_of follows ascending in-neighbor order") {
    const auto net = fixtures::twelve_node_reconstruction();
    auto tails = [&](NodeId j) {
        std::vector<NodeId> t;
        for (auto e : net.in_links(j)) t.push_back(net.links()[e].tail);
        return t;
    };
    CHECK(tails(1) == std::vector<NodeId>{2, 3, 6});
    CHECK(tails(4) == std::vector<NodeId>{1, 6, 7});
    CHECK(mac_of(net, 1).size() == 3);
    CHECK(mac_of(net, 4).size() == 3);
    CHECK(mac_of(net, 1).iid());
    CHECK_THAT(mac_of(net, 1).lambda(0), WithinRel(0.5, 1e-15));
    CHECK_THROWS_AS(mac_of(net, 5), InvalidInput);
}

TEST_CASE("network validation") {
    using fixtures::unit_network;
    CHECK_THROWS_AS(unit_network(3, {{0, 1}, {1, 0}}, 0, {1}, 1.0), InvalidInput);   // in-link at source
    CHECK_THROWS_AS(unit_network(3, {{0, 1}}, 0, {2}, 1.0), InvalidInput);           // unreachable sink
    CHECK_THROWS_AS(unit_network(3, {{0, 1}, {1, 1}}, 0, {1}, 1.0), InvalidInput);   // self-loop
    CHECK_THROWS_AS(unit_network(3, {{0, 1}, {0, 1}}, 0, {1}, 1.0), InvalidInput);   // duplicate link
    CHECK_THROWS_AS(unit_network(3, {{0, 1}}, 0, {}, 1.0), InvalidInput);            // no sinks
    CHECK_THROWS_AS(unit_network(3, {{0, 1}}, 0, {0}, 1.0), InvalidInput);           // sink is source
    CHECK_THROWS_AS(unit_network(3, {{0, 1}}, 0, {1}, -1.0), InvalidInput);          // negative demand
    SECTION("links into one receiver must share a rate parameter") {
        std::vector<Node> n{{0, 1.0}, {1, 1.0}, {2, 1.0}};
        std::vector<LinkStat> l{{0, 1, 1.0, 1.0}, {0, 2, 1.0, 1.0}, {1, 2, 1.0, 2.0}};
        CHECK_THROWS_AS(NetworkSpec(n, l, 0, {2}, 1.0), InvalidInput);
        l[2].variance = 0.5;  // variance * power restored
        CHECK_NOTHROW(NetworkSpec(n, l, 0, {2}, 1.0));
    }
}

TEST_CASE("network_outage combines receivers by the product formula") {
    const auto net = fixtures::two_receivers(-std::log(0.9), -std::log(0.8));
    const std::vector<double> rates{1.0, 1.0};
    const auto out = network_outage(net, rates, OutageMethod::exact);
    CHECK_THAT(out.total.value, WithinRel(0.28, 1e-12));
    CHECK(out.total.method == Method::exact);
    REQUIRE(out.receivers.size() == 2);
    CHECK_THAT(out.receivers[0].estimate.value, WithinRel(0.1, 1e-12));

    for (auto m : {OutageMethod::exact, OutageMethod::lower, OutageMethod::upper, OutageMethod::weak})
        CHECK(network_outage(fixtures::twelve_node_reconstruction(), std::vector<double>(19, 0.0), m).total.value == 0.0);

    SECTION("a one-receiver network equals the MAC value") {
        const auto path = fixtures::unit_network(2, {{0, 1}}, 0, {1}, 1.0);
        const std::vector<double> r{1.3};
        CHECK(network_outage(path, r, OutageMethod::exact).total.value ==
              outage_exact(mac_of(path, 1), local_rates(path, 1, r))->value);
    }
    SECTION("receivers with three in-links need bounds or sampling") {
        const auto net12 = fixtures::twelve_node_reconstruction();
        const std::vector<double> r(19, 0.5);
        CHECK_THROWS_AS(network_outage(net12, r, OutageMethod::exact), NotComputable);
        const auto lower = network_outage(net12, r, OutageMethod::lower);
        const auto upper = network_outage(net12, r, OutageMethod::upper);
        CHECK(lower.total.method == Method::lower);
        CHECK(upper.total.method == Method::upper);
        CHECK(lower.total.value <= upper.total.value);
        for (const auto& rx : lower.receivers)
            CHECK(rx.estimate.method == (rx.links <= 2 ? Method::exact : Method::lower));

        NetworkOutageOptions opt;
        opt.mc = McConfig{200'000, 5, 1};
        opt.fallback_to_mc = true;
        const auto fallback = network_outage(net12, r, OutageMethod::exact, opt);
        CHECK(fallback.total.method == Method::monte_carlo);
        CHECK(fallback.total.value >= lower.total.value - 4.0 * fallback.total.std_error());
        CHECK(fallback.total.value <= upper.total.value + 4.0 * fallback.total.std_error());
    }
    SECTION("mixing bound directions is rejected") {
        std::vector<OutageEstimate> parts{{0.1, Method::lower}, {0.2, Method::upper}};
        CHECK_THROWS_AS(combine_receiver_outages(parts), InvalidInput);
    }
}

TEST_CASE("network_outage is monotone in each link rate") {
    const auto net = fixtures::diamond();
    const std::vector<double> base{0.5, 0.7, 0.4, 0.9};
    for (auto m : {OutageMethod::exact, OutageMethod::lower, OutageMethod::upper, OutageMethod::weak}) {
        const double p0 = network_outage(net, base, m).total.value;
        for (std::size_t e = 0; e < base.size(); ++e) {
            auto up = base;
            up[e] += 0.3;
            CHECK(network_outage(net, up, m).total.value >= p0);
        }
    }
}

TEST_CASE("feasible_multicast") {
    const auto bf = fixtures::butterfly(2.0);
    const auto rep = feasible_multicast(bf, std::vector<double>(9, 1.0));
    CHECK(rep.feasible);
    CHECK(rep.max_flows == std::vector<double>{2.0, 2.0});

    CHECK(feasible_multicast(fixtures::butterfly(0.0), std::vector<double>(9, 0.0)).feasible);
    const auto path = fixtures::single_path(2.0);
    const auto bad = feasible_multicast(path, std::vector<double>{1.0, 1.0});
    CHECK_FALSE(bad.feasible);
    CHECK_THAT(bad.max_flows[0], WithinAbs(1.0, 1e-15));

    SECTION("removing the bottleneck edge breaks feasibility") {
        std::vector<double> cap(9, 1.0);
        // link order is (tail, head): 0->1, 0->2, 1->3, 1->5, 2->3, 2->6, 3->4, 4->5, 4->6
        cap[6] = 0.0;
        CHECK_FALSE(feasible_multicast(bf, cap).feasible);
    }
}
