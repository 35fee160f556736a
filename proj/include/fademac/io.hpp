#ifndef FADEMAC_IO_HPP
#define FADEMAC_IO_HPP

// File formats: network descriptions and rate vectors as JSON, traces as CSV.
// Numbers are written with std::to_chars so output never depends on the
// process locale and every double round-trips exactly.

#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fademac/distributed.hpp"
#include "fademac/error.hpp"
#include "fademac/network.hpp"

namespace fademac {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to exactly `x`.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
    if (!obj.is_object()) throw InvalidInput(path + ": expected an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (auto k : known) ok |= item.key() == k;
        if (!ok) throw InvalidInput(path + "." + item.key() + ": unknown field");
    }
}

inline const Json& field(const Json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) throw InvalidInput(path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw InvalidInput(path + "." + key + ": missing field");
    return *it;
}

inline double number_at(const Json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_number()) throw InvalidInput(path + "." + key + ": expected a number");
    return v.get<double>();
}

inline int id_at(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw InvalidInput(path + ": expected an integer node id");
    const auto id = v.get<long long>();
    if (id < INT_MIN || id > INT_MAX) throw InvalidInput(path + ": node id out of range");
    return static_cast<int>(id);
}

inline const Json& array_at(const Json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_array()) throw InvalidInput(path + "." + key + ": expected an array");
    return v;
}

inline Json parse_json_text(std::string_view text, const std::string& origin) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // The library message carries the line and column of the problem.
        throw InvalidInput(origin + ": " + e.what());
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

/// Builds a network from its JSON description. Every problem is reported
/// with the path of the offending field, e.g. "links[3].power".
inline NetworkSpec network_from_json(const Json& doc) {
    const std::string root = "$";
    if (!doc.is_object()) throw InvalidInput(root + ": expected an object");
    detail::reject_unknown(doc, root, {"description", "nodes", "links", "source", "destinations", "multicast_rate"});
    if (auto it = doc.find("description"); it != doc.end() && !it->is_string())
        throw InvalidInput(root + ".description: expected a string");

    std::vector<Node> nodes;
    const auto& jn = detail::array_at(doc, root, "nodes");
    for (std::size_t i = 0; i < jn.size(); ++i) {
        const auto path = root + ".nodes[" + std::to_string(i) + "]";
        detail::reject_unknown(jn[i], path, {"id", "noise_var"});
        nodes.push_back({detail::id_at(detail::field(jn[i], path, "id"), path + ".id"),
                         detail::number_at(jn[i], path, "noise_var")});
    }

    std::vector<LinkStat> links;
    const auto& jl = detail::array_at(doc, root, "links");
    for (std::size_t i = 0; i < jl.size(); ++i) {
        const auto path = root + ".links[" + std::to_string(i) + "]";
        detail::reject_unknown(jl[i], path, {"tail", "head", "variance", "power"});
        links.push_back({detail::id_at(detail::field(jl[i], path, "tail"), path + ".tail"),
                         detail::id_at(detail::field(jl[i], path, "head"), path + ".head"),
                         detail::number_at(jl[i], path, "variance"), detail::number_at(jl[i], path, "power")});
    }

    std::vector<NodeId> dests;
    const auto& jd = detail::array_at(doc, root, "destinations");
    for (std::size_t i = 0; i < jd.size(); ++i)
        dests.push_back(detail::id_at(jd[i], root + ".destinations[" + std::to_string(i) + "]"));

    const auto source = detail::id_at(detail::field(doc, root, "source"), root + ".source");
    const auto rate = detail::number_at(doc, root, "multicast_rate");
    try {
        return NetworkSpec(std::move(nodes), std::move(links), source, std::move(dests), rate);
    } catch (const InvalidInput& e) {
        throw InvalidInput(root + ": " + e.what());
    }
}

inline NetworkSpec parse_network(std::string_view text, const std::string& origin = "<network>") {
    try {
        return network_from_json(detail::parse_json_text(text, origin));
    } catch (const InvalidInput& e) {
        const std::string msg = e.what();
        if (msg.rfind(origin, 0) == 0) throw;
        throw InvalidInput(origin + ": " + msg);
    }
}

inline NetworkSpec load_network(const std::string& path) { return parse_network(detail::read_file(path), path); }

/// JSON description in canonical order (nodes by id, links by (tail, head)).
inline Json network_to_json(const NetworkSpec& net) {
    Json doc;
    doc["nodes"] = Json::array();
    for (const auto& n : net.nodes()) doc["nodes"].push_back({{"id", n.id}, {"noise_var", n.noise_var}});
    doc["links"] = Json::array();
    for (const auto& l : net.links())
        doc["links"].push_back({{"tail", l.tail}, {"head", l.head}, {"variance", l.variance}, {"power", l.power}});
    doc["source"] = net.source();
    doc["destinations"] = net.destinations();
    doc["multicast_rate"] = net.multicast_rate();
    return doc;
}

inline std::string serialize_network(const NetworkSpec& net) { return network_to_json(net).dump(2) + "\n"; }

/// Rates file: {"links": [{"tail", "head", "rate"}]}. Every link of the
/// network must appear exactly once; order is free.
inline std::vector<double> rates_from_json(const Json& doc, const NetworkSpec& net) {
    const std::string root = "$";
    if (!doc.is_object()) throw InvalidInput(root + ": expected an object");
    detail::reject_unknown(doc, root, {"links"});
    const auto& jl = detail::array_at(doc, root, "links");
    std::vector<double> rates(net.links().size(), 0.0);
    std::vector<bool> seen(rates.size(), false);
    for (std::size_t i = 0; i < jl.size(); ++i) {
        const auto path = root + ".links[" + std::to_string(i) + "]";
        detail::reject_unknown(jl[i], path, {"tail", "head", "rate"});
        const auto tail = detail::id_at(detail::field(jl[i], path, "tail"), path + ".tail");
        const auto head = detail::id_at(detail::field(jl[i], path, "head"), path + ".head");
        const auto rate = detail::number_at(jl[i], path, "rate");
        std::size_t e = 0;
        while (e < net.links().size() && !(net.links()[e].tail == tail && net.links()[e].head == head)) ++e;
        if (e == net.links().size())
            throw InvalidInput(path + ": no link " + std::to_string(tail) + "->" + std::to_string(head));
        if (seen[e]) throw InvalidInput(path + ": duplicate entry for this link");
        if (!(rate >= 0.0) || !std::isfinite(rate)) throw InvalidInput(path + ".rate: must be finite and >= 0");
        seen[e] = true;
        rates[e] = rate;
    }
    for (std::size_t e = 0; e < seen.size(); ++e)
        if (!seen[e])
            throw InvalidInput(root + ".links: missing link " + std::to_string(net.links()[e].tail) + "->" +
                               std::to_string(net.links()[e].head));
    return rates;
}

inline std::vector<double> parse_rates(std::string_view text, const NetworkSpec& net,
                                       const std::string& origin = "<rates>") {
    try {
        return rates_from_json(detail::parse_json_text(text, origin), net);
    } catch (const InvalidInput& e) {
        const std::string msg = e.what();
        if (msg.rfind(origin, 0) == 0) throw;
        throw InvalidInput(origin + ": " + msg);
    }
}

inline std::vector<double> load_rates(const std::string& path, const NetworkSpec& net) {
    return parse_rates(detail::read_file(path), net, path);
}

inline Json rates_to_json(const NetworkSpec& net, const std::vector<double>& rates) {
    detail::require(rates.size() == net.links().size(), "rate vector length does not match link count");
    Json doc;
    doc["links"] = Json::array();
    for (std::size_t e = 0; e < rates.size(); ++e)
        doc["links"].push_back({{"tail", net.links()[e].tail}, {"head", net.links()[e].head}, {"rate", rates[e]}});
    return doc;
}

/// One row per recorded round of a distributed run.
inline void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
    out << "round,objective,max_flow_violation,max_dual,clamp_events\n";
    for (const auto& t : trace)
        out << t.round << ',' << format_double(t.objective) << ',' << format_double(t.max_flow_violation) << ','
            << format_double(t.max_dual) << ',' << t.clamp_events << '\n';
}

}  // namespace fademac

#endif
