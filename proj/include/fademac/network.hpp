#ifndef FADEMAC_NETWORK_HPP
#define FADEMAC_NETWORK_HPP

// The MAC network model: a digraph in which every receiver decodes all of its
// in-neighbors jointly over an independent Rayleigh-fading multiple-access
// channel, with no interference between different receivers.

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fademac/error.hpp"
#include "fademac/mac_outage.hpp"

namespace fademac {

using NodeId = int;

struct Node {
    NodeId id = 0;
    double noise_var = 1.0;

    friend bool operator==(const Node&, const Node&) = default;
};

/// Statistics of one directed link; the gain is h ~ CN(0, variance).
struct LinkStat {
    NodeId tail = 0;
    NodeId head = 0;
    double variance = 1.0;
    double power = 1.0;

    friend bool operator==(const LinkStat&, const LinkStat&) = default;
};

/// Relative tolerance used when checking that all links into a receiver
/// share one rate parameter.
inline constexpr double kIidRelativeTolerance = 1e-12;

class NetworkSpec {
public:
    NetworkSpec(std::vector<Node> nodes, std::vector<LinkStat> links, NodeId source,
                std::vector<NodeId> destinations, double multicast_rate)
        : nodes_(std::move(nodes)),
          links_(std::move(links)),
          source_(source),
          destinations_(std::move(destinations)),
          multicast_rate_(multicast_rate) {
        std::sort(nodes_.begin(), nodes_.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
        std::sort(links_.begin(), links_.end(), [](const LinkStat& a, const LinkStat& b) {
            return a.tail != b.tail ? a.tail < b.tail : a.head < b.head;
        });
        std::sort(destinations_.begin(), destinations_.end());
        validate();
        build_indices();
    }

    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
    /// Links in canonical (tail, head) order; a link's position is its link id.
    [[nodiscard]] const std::vector<LinkStat>& links() const noexcept { return links_; }
    [[nodiscard]] NodeId source() const noexcept { return source_; }
    [[nodiscard]] const std::vector<NodeId>& destinations() const noexcept { return destinations_; }
    [[nodiscard]] double multicast_rate() const noexcept { return multicast_rate_; }

    [[nodiscard]] std::size_t node_index(NodeId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw InvalidInput("unknown node id " + std::to_string(id));
        return it->second;
    }
    [[nodiscard]] bool has_node(NodeId id) const { return index_.count(id) != 0; }

    /// Link ids into node j, ascending tail id.
    [[nodiscard]] const std::vector<std::size_t>& in_links(NodeId j) const { return in_[node_index(j)]; }
    /// Link ids out of node j, ascending head id.
    [[nodiscard]] const std::vector<std::size_t>& out_links(NodeId j) const { return out_[node_index(j)]; }

    [[nodiscard]] double noise_var(NodeId j) const { return nodes_[node_index(j)].noise_var; }

    /// noise_head / (2 variance power)
    [[nodiscard]] double link_lambda(std::size_t link) const {
        const auto& l = links_[link];
        return MacSpec::rate_parameter(noise_var(l.head), l.variance, l.power);
    }

    /// Common rate parameter of the links into receiver j.
    [[nodiscard]] double receiver_lambda(NodeId j) const {
        const auto& in = in_links(j);
        detail::require(!in.empty(), "node " + std::to_string(j) + " has no in-links");
        return link_lambda(in.front());
    }

    /// Nodes other than the source that have at least one in-link, ascending id.
    [[nodiscard]] std::vector<NodeId> receivers() const {
        std::vector<NodeId> out;
        for (const auto& n : nodes_)
            if (n.id != source_ && !in_[node_index(n.id)].empty()) out.push_back(n.id);
        return out;
    }

    [[nodiscard]] NetworkSpec with_multicast_rate(double rate) const {
        return NetworkSpec(nodes_, links_, source_, destinations_, rate);
    }

    /// Copy with every transmit power multiplied by `factor`.
    [[nodiscard]] NetworkSpec with_power_scale(double factor) const {
        detail::require(factor > 0.0 && std::isfinite(factor), "power scale must be positive");
        auto links = links_;
        for (auto& l : links) l.power *= factor;
        return NetworkSpec(nodes_, std::move(links), source_, destinations_, multicast_rate_);
    }

    /// Nodes reachable from `from` along directed links (including `from`).
    [[nodiscard]] std::vector<bool> reachable_from(NodeId from) const {
        std::vector<bool> seen(nodes_.size(), false);
        std::queue<std::size_t> q;
        seen[node_index(from)] = true;
        q.push(node_index(from));
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (auto e : out_[u]) {
                const auto v = node_index(links_[e].head);
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
            }
        }
        return seen;
    }

    /// Nodes from which `to` is reachable (including `to`).
    [[nodiscard]] std::vector<bool> reaching(NodeId to) const {
        std::vector<bool> seen(nodes_.size(), false);
        std::queue<std::size_t> q;
        seen[node_index(to)] = true;
        q.push(node_index(to));
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (auto e : in_[u]) {
                const auto v = node_index(links_[e].tail);
                if (!seen[v]) {
                    seen[v] = true;
                    q.push(v);
                }
            }
        }
        return seen;
    }

    friend bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
        return a.nodes_ == b.nodes_ && a.links_ == b.links_ && a.source_ == b.source_ &&
               a.destinations_ == b.destinations_ && a.multicast_rate_ == b.multicast_rate_;
    }

private:
    std::vector<Node> nodes_;
    std::vector<LinkStat> links_;
    NodeId source_;
    std::vector<NodeId> destinations_;
    double multicast_rate_;
    std::map<NodeId, std::size_t> index_;
    std::vector<std::vector<std::size_t>> in_;
    std::vector<std::vector<std::size_t>> out_;

    void validate() {
        detail::require(!nodes_.empty(), "network has no nodes");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (i > 0 && nodes_[i].id == nodes_[i - 1].id)
                throw InvalidInput("duplicate node id " + std::to_string(nodes_[i].id));
            if (!(nodes_[i].noise_var > 0.0) || !std::isfinite(nodes_[i].noise_var))
                throw InvalidInput("node " + std::to_string(nodes_[i].id) + ": noise_var must be positive");
            index_[nodes_[i].id] = i;
        }
        for (std::size_t e = 0; e < links_.size(); ++e) {
            const auto& l = links_[e];
            const std::string name = "link " + std::to_string(l.tail) + "->" + std::to_string(l.head);
            detail::require(has_node(l.tail) && has_node(l.head), name + ": endpoint is not a declared node");
            detail::require(l.tail != l.head, name + ": self-loop");
            detail::require(l.variance > 0.0 && std::isfinite(l.variance), name + ": variance must be positive");
            detail::require(l.power > 0.0 && std::isfinite(l.power), name + ": power must be positive");
            if (e > 0 && l.tail == links_[e - 1].tail && l.head == links_[e - 1].head)
                throw InvalidInput(name + ": duplicate link");
        }
        detail::require(has_node(source_), "source " + std::to_string(source_) + " is not a declared node");
        detail::require(!destinations_.empty(), "destination set is empty");
        for (std::size_t k = 0; k < destinations_.size(); ++k) {
            const auto d = destinations_[k];
            detail::require(has_node(d), "destination " + std::to_string(d) + " is not a declared node");
            detail::require(d != source_, "destination set must not contain the source");
            if (k > 0 && d == destinations_[k - 1]) throw InvalidInput("duplicate destination " + std::to_string(d));
        }
        detail::require(multicast_rate_ >= 0.0 && std::isfinite(multicast_rate_),
                        "multicast_rate must be finite and >= 0");
    }

    void build_indices() {
        in_.assign(nodes_.size(), {});
        out_.assign(nodes_.size(), {});
        for (std::size_t e = 0; e < links_.size(); ++e) {
            out_[index_.at(links_[e].tail)].push_back(e);
            in_[index_.at(links_[e].head)].push_back(e);
        }
        for (auto& v : in_)
            std::sort(v.begin(), v.end(), [&](std::size_t a, std::size_t b) { return links_[a].tail < links_[b].tail; });

        detail::require(in_[index_.at(source_)].empty(), "source " + std::to_string(source_) + " must have no in-links");
        const auto seen = reachable_from(source_);
        for (auto d : destinations_)
            detail::require(seen[index_.at(d)],
                            "destination " + std::to_string(d) + " is not reachable from the source");
        for (const auto& n : nodes_) {
            const auto& in = in_[index_.at(n.id)];
            if (in.empty()) continue;
            const double l0 = link_lambda(in.front());
            for (auto e : in) {
                if (std::abs(link_lambda(e) - l0) > kIidRelativeTolerance * l0)
                    throw InvalidInput("receiver " + std::to_string(n.id) +
                                       ": in-links must share one rate parameter (noise / (2 variance power))");
            }
        }
    }
};

/// The fading MAC seen by receiver j: its in-links in ascending tail order,
/// all with the receiver's common rate parameter.
inline MacSpec mac_of(const NetworkSpec& net, NodeId j) {
    detail::require(j != net.source(), "mac_of: the source has no in-links");
    const auto& in = net.in_links(j);
    detail::require(!in.empty(), "mac_of: node " + std::to_string(j) + " has no in-links");
    return MacSpec::iid(in.size(), net.receiver_lambda(j));
}

/// Receiver j's local rate vector taken from a full per-link rate vector.
inline RateVector local_rates(const NetworkSpec& net, NodeId j, std::span<const double> rates) {
    detail::require(rates.size() == net.links().size(), "rate vector length does not match link count");
    std::vector<double> r;
    for (auto e : net.in_links(j)) r.push_back(rates[e]);
    return RateVector(std::move(r));
}

/// Edmonds-Karp max-flow from s to t with real capacities.
inline double max_flow(const NetworkSpec& net, std::span<const double> capacity, NodeId s, NodeId t) {
    const std::size_t n = net.nodes().size();
    // residual graph as adjacency over arcs: forward arc 2e, backward 2e+1
    const auto& links = net.links();
    std::vector<double> residual(2 * links.size());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t e = 0; e < links.size(); ++e) {
        residual[2 * e] = capacity[e];
        residual[2 * e + 1] = 0.0;
        adj[net.node_index(links[e].tail)].push_back(2 * e);
        adj[net.node_index(links[e].head)].push_back(2 * e + 1);
    }
    auto arc_head = [&](std::size_t a) {
        const auto& l = links[a / 2];
        return net.node_index(a % 2 == 0 ? l.head : l.tail);
    };
    const auto src = net.node_index(s);
    const auto dst = net.node_index(t);
    constexpr double kEps = 1e-15;
    double total = 0.0;
    for (;;) {
        std::vector<std::ptrdiff_t> via(n, -1);
        std::vector<bool> seen(n, false);
        std::queue<std::size_t> q;
        q.push(src);
        seen[src] = true;
        while (!q.empty() && !seen[dst]) {
            const auto u = q.front();
            q.pop();
            for (auto a : adj[u]) {
                const auto v = arc_head(a);
                if (!seen[v] && residual[a] > kEps) {
                    seen[v] = true;
                    via[v] = static_cast<std::ptrdiff_t>(a);
                    q.push(v);
                }
            }
        }
        if (!seen[dst]) break;
        double push = INFINITY;
        for (auto v = dst; v != src;) {
            const auto a = static_cast<std::size_t>(via[v]);
            push = std::min(push, residual[a]);
            v = arc_head(a ^ 1U);
        }
        for (auto v = dst; v != src;) {
            const auto a = static_cast<std::size_t>(via[v]);
            residual[a] -= push;
            residual[a ^ 1U] += push;
            v = arc_head(a ^ 1U);
        }
        total += push;
    }
    return total;
}

struct FeasibilityReport {
    bool feasible = false;
    std::vector<double> max_flows;  // one per destination, in destination order
};

/// Whether every destination's s-d max-flow under capacities `rates` reaches
/// the multicast demand (network-coding multicast theorem), with 1e-9 slack.
inline FeasibilityReport feasible_multicast(const NetworkSpec& net, std::span<const double> rates) {
    detail::require(rates.size() == net.links().size(), "rate vector length does not match link count");
    FeasibilityReport rep;
    rep.feasible = true;
    for (auto d : net.destinations()) {
        const double f = max_flow(net, rates, net.source(), d);
        rep.max_flows.push_back(f);
        if (f < net.multicast_rate() - 1e-9) rep.feasible = false;
    }
    return rep;
}

}  // namespace fademac

#endif
