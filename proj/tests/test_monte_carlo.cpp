#include <catch_amalgamated.hpp>

#include <cmath>

#include "fademac/monte_carlo.hpp"
#include "fixtures.hpp"

using namespace fademac;

namespace {

double combined_sigma(const OutageEstimate& a, const OutageEstimate& b) {
    return std::hypot(a.std_error(), b.std_error());
}

}  // namespace

TEST_CASE("mc_mac_outage covers the closed forms") {
    const auto one = mc_mac_outage(MacSpec::iid(1, 1.0), RateVector({1.0}), {1'000'000, 1, 1});
    CHECK(one.method == Method::monte_carlo);
    CHECK(std::abs(one.value - (1.0 - std::exp(-1.0))) <= one.half_width);
    CHECK(one.half_width < 0.002);

    const auto two = mc_mac_outage(MacSpec::iid(2, 1.0), RateVector({1.0, 1.0}), {10'000'000, 2, 1});
    CHECK(std::abs(two.value - 0.9004258632642721) < 3.0 * two.std_error());

    const auto zero = mc_mac_outage(MacSpec::iid(3, 1.0), RateVector({0, 0, 0}), {1000, 3, 1});
    CHECK(zero.value == 0.0);
    CHECK(zero.half_width == 0.0);
}

TEST_CASE("estimates are deterministic and the estimand does not depend on workers") {
    const MacSpec mac = MacSpec::iid(3, 0.3);
    const RateVector r({0.5, 1.0, 0.7});
    const McConfig one{400'000, 42, 1};
    const McConfig four{400'000, 42, 4};
    const auto a = mc_mac_outage(mac, r, one);
    const auto b = mc_mac_outage(mac, r, one);
    CHECK(a.value == b.value);
    CHECK(a.half_width == b.half_width);
    const auto c = mc_mac_outage(mac, r, four);
    const auto d = mc_mac_outage(mac, r, four);
    CHECK(c.value == d.value);
    CHECK(std::abs(a.value - c.value) <= 4.0 * combined_sigma(a, c));
}

TEST_CASE("low-confidence flag for rare events") {
    const auto rare = mc_mac_outage(MacSpec::iid(1, 1e-6), RateVector({0.1}), {10'000, 5, 1});
    CHECK(rare.low_confidence);
    const auto common = mc_mac_outage(MacSpec::iid(1, 1.0), RateVector({1.0}), {10'000, 5, 1});
    CHECK_FALSE(common.low_confidence);
}

TEST_CASE("mc_network_outage") {
    SECTION("two independent receivers with outages 0.1 and 0.2") {
        // 1 - exp(-l) = p  =>  l = -log(1 - p) at rate 1
        const auto net = fixtures::two_receivers(-std::log(0.9), -std::log(0.8));
        const std::vector<double> rates{1.0, 1.0};
        const auto est = mc_network_outage(net, rates, {2'000'000, 9, 2});
        CHECK(std::abs(est.value - 0.28) < 4.0 * est.std_error());

        const auto p1 = mc_mac_outage(mac_of(net, 1), local_rates(net, 1, rates), {2'000'000, 10, 1});
        const auto p2 = mc_mac_outage(mac_of(net, 2), local_rates(net, 2, rates), {2'000'000, 11, 1});
        const double product = 1.0 - (1.0 - p1.value) * (1.0 - p2.value);
        const double sigma_product = std::hypot((1.0 - p2.value) * p1.std_error(), (1.0 - p1.value) * p2.std_error());
        CHECK(std::abs(est.value - product) < 4.0 * std::hypot(est.std_error(), sigma_product));
    }
    SECTION("zero rates never outage") {
        const auto net = fixtures::diamond();
        CHECK(mc_network_outage(net, std::vector<double>(4, 0.0), {10'000, 1, 1}).value == 0.0);
    }
    SECTION("a single receiver matches the per-MAC estimator") {
        const auto net = fixtures::unit_network(3, {{0, 2}, {1, 2}}, 0, {2}, 1.0);
        // node 1 has no in-links and node 2 is the only receiver
        const std::vector<double> rates{0.8, 0.4};
        const auto whole = mc_network_outage(net, rates, {1'000'000, 21, 1});
        const auto mac = mc_mac_outage(mac_of(net, 2), local_rates(net, 2, rates), {1'000'000, 22, 1});
        CHECK(std::abs(whole.value - mac.value) < 4.0 * combined_sigma(whole, mac));
    }
}

TEST_CASE("mc_conjunction_probability") {
    const auto sys = ConjunctionSystem::from_rows({{1, 0.5}}, {1});
    const auto est = mc_conjunction_probability(sys, {1'000'000, 3, 1});
    CHECK(std::abs(est.value - 0.600423599106272) < 4.0 * est.std_error());
    CHECK_THROWS_AS(mc_conjunction_probability(sys, {0, 3, 1}), InvalidInput);
}
