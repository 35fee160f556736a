#ifndef FADEMAC_TEST_FIXTURES_HPP
#define FADEMAC_TEST_FIXTURES_HPP

// In-code copies of the bundled example networks. Every link uses variance 1
// and power 1, and noise 2 at every node, so each rate parameter is 1 unless a
// builder says otherwise.

#include <utility>
#include <vector>

#include "fademac/network.hpp"

namespace fixtures {

using fademac::LinkStat;
using fademac::NetworkSpec;
using fademac::Node;
using fademac::NodeId;

inline NetworkSpec unit_network(int nodes, const std::vector<std::pair<NodeId, NodeId>>& edges, NodeId source,
                                std::vector<NodeId> sinks, double demand, double noise = 2.0, int first_id = 0) {
    std::vector<Node> n;
    for (int i = 0; i < nodes; ++i) n.push_back({first_id + i, noise});
    std::vector<LinkStat> l;
    for (auto [t, h] : edges) l.push_back({t, h, 1.0, 1.0});
    return NetworkSpec(std::move(n), std::move(l), source, std::move(sinks), demand);
}

/// s=0 -> a=1 -> d=2
inline NetworkSpec single_path(double demand = 2.0) { return unit_network(3, {{0, 1}, {1, 2}}, 0, {2}, demand); }

/// s=0 -> {a=1, b=2} -> d=3
inline NetworkSpec diamond(double demand = 2.0) {
    return unit_network(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}}, 0, {3}, demand);
}

/// Butterfly: s=0, a=1, b=2, coding node c=3, relay e=4, sinks t1=5, t2=6.
inline NetworkSpec butterfly(double demand = 2.0) {
    return unit_network(7, {{0, 1}, {0, 2}, {1, 5}, {1, 3}, {2, 3}, {2, 6}, {3, 4}, {4, 5}, {4, 6}}, 0, {5, 6},
                        demand);
}

/// Source 0 feeding two receivers with different rate parameters.
inline NetworkSpec two_receivers(double lambda1, double lambda2) {
    std::vector<Node> n{{0, 1.0}, {1, 2.0 * lambda1}, {2, 2.0 * lambda2}};
    std::vector<LinkStat> l{{0, 1, 1.0, 1.0}, {0, 2, 1.0, 1.0}};
    return NetworkSpec(std::move(n), std::move(l), 0, {1, 2}, 1.0);
}

/// Twelve-node reconstruction with I(1) = {2,3,6}, I(4) = {1,6,7}, source 5
/// and sinks {1,4,8,10}. Noise 1, so every rate parameter is 1/2.
inline NetworkSpec twelve_node_reconstruction(double demand = 1.0) {
    return unit_network(12,
                        {{5, 2}, {5, 3}, {5, 6}, {5, 7}, {2, 1}, {3, 1}, {6, 1}, {1, 4}, {6, 4}, {7, 4},
                         {4, 8}, {9, 8}, {11, 8}, {3, 9}, {7, 11}, {8, 10}, {12, 10}, {9, 12}, {11, 12}},
                        5, {1, 4, 8, 10}, demand, 1.0, 1);
}

}  // namespace fixtures

#endif
