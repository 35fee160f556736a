#ifndef FADEMAC_MONTE_CARLO_HPP
#define FADEMAC_MONTE_CARLO_HPP

// Sampling estimators. Every trial owns an independent counter-based stream
// keyed by (seed, trial index), so an estimate depends only on (seed,
// trials) and splitting the trials across worker threads does not change it.

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <thread>
#include <vector>

#include "fademac/estimate.hpp"
#include "fademac/exp_linear.hpp"
#include "fademac/mac_outage.hpp"
#include "fademac/network.hpp"

namespace fademac {

struct McConfig {
    std::uint64_t trials = 1'000'000;
    std::uint64_t seed = 0x5eedULL;
    unsigned workers = 1;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Per-trial generator: splitmix64 sequence started from hash(seed, trial).
class TrialStream {
public:
    TrialStream(std::uint64_t seed, std::uint64_t trial) noexcept
        : state_(splitmix64(seed ^ splitmix64(trial + 0x632be59bd9b4e019ULL))) {}

    /// Uniform on (0, 1].
    double uniform() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return static_cast<double>((z >> 11) + 1) * 0x1.0p-53;
    }

    double exponential() noexcept { return -std::log(uniform()); }

private:
    std::uint64_t state_;
};

/// Runs `trial(stream)` for every trial index; returns how many returned true.
/// Trials are split into contiguous chunks, one per worker, and the chunk
/// counts are summed in chunk order.
template <typename Trial>
std::uint64_t count_events(const McConfig& cfg, Trial&& make_trial) {
    require(cfg.trials >= 1, "McConfig: trials must be >= 1");
    require(cfg.workers >= 1, "McConfig: workers must be >= 1");
    const std::uint64_t workers = std::min<std::uint64_t>(cfg.workers, cfg.trials);
    std::vector<std::uint64_t> counts(workers, 0);
    auto run_chunk = [&](std::uint64_t w) {
        const std::uint64_t begin = cfg.trials * w / workers;
        const std::uint64_t end = cfg.trials * (w + 1) / workers;
        auto trial = make_trial();  // per-worker scratch
        std::uint64_t c = 0;
        for (std::uint64_t t = begin; t < end; ++t) {
            TrialStream stream(cfg.seed, t);
            if (trial(stream)) ++c;
        }
        counts[w] = c;
    };
    if (workers == 1) {
        run_chunk(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
        for (auto& t : pool) t.join();
    }
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    return total;
}

inline OutageEstimate to_estimate(std::uint64_t events, std::uint64_t trials) {
    const double p = static_cast<double>(events) / static_cast<double>(trials);
    OutageEstimate est;
    est.value = p;
    est.method = Method::monte_carlo;
    est.half_width = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    est.low_confidence = events < 10;
    return est;
}

/// Checks every nonempty subset M: sum_{i in M} g_i >= 2^{r(M)} - 1, where the
/// thresholds are precomputed per subset mask. Subset sums are built
/// incrementally from the mask with its lowest bit cleared.
class SubsetChecker {
public:
    explicit SubsetChecker(const RateVector& r) : n_(r.size()) {
        const std::size_t masks = std::size_t{1} << n_;
        thresholds_.assign(masks, 0.0);
        sums_.assign(masks, 0.0);
        for (std::size_t m = 1; m < masks; ++m) {
            double rate = 0.0;
            for (std::size_t i = 0; i < n_; ++i)
                if (m & (std::size_t{1} << i)) rate += r[i];
            thresholds_[m] = pow2m1(rate);
        }
    }

    /// `gains` are the normalized channel gains z_i / l_i.
    bool decodable(std::span<const double> gains) {
        const std::size_t masks = std::size_t{1} << n_;
        for (std::size_t m = 1; m < masks; ++m) {
            const auto low = static_cast<std::size_t>(std::countr_zero(m));
            sums_[m] = sums_[m & (m - 1)] + gains[low];
            if (sums_[m] < thresholds_[m]) return false;
        }
        return true;
    }

private:
    std::size_t n_;
    std::vector<double> thresholds_;
    std::vector<double> sums_;
};

}  // namespace detail

/// Sampled common outage of one MAC: outage iff some subset constraint fails.
inline OutageEstimate mc_mac_outage(const MacSpec& mac, const RateVector& r, const McConfig& cfg) {
    detail::check_pair(mac, r);
    if (r.all_zero()) {
        detail::require(cfg.trials >= 1, "McConfig: trials must be >= 1");
        return detail::to_estimate(0, cfg.trials);
    }
    const auto events = detail::count_events(cfg, [&] {
        return [&, checker = detail::SubsetChecker(r), gains = std::vector<double>(mac.size())](
                   detail::TrialStream& s) mutable {
            for (std::size_t i = 0; i < gains.size(); ++i) gains[i] = s.exponential() / mac.lambda(i);
            return !checker.decodable(gains);
        };
    });
    return detail::to_estimate(events, cfg.trials);
}

/// Sampled Pr(A z >= b) for unit-rate exponentials z; used to validate the
/// elimination recursions.
inline OutageEstimate mc_conjunction_probability(const ConjunctionSystem& sys, const McConfig& cfg) {
    const auto events = detail::count_events(cfg, [&] {
        return [&, z = std::vector<double>(sys.columns())](detail::TrialStream& s) mutable {
            for (auto& v : z) v = s.exponential();
            return sys.satisfied_by(z);
        };
    });
    return detail::to_estimate(events, cfg.trials);
}

/// Sampled outage of the whole network: every link gain is drawn
/// independently each trial (in link-id order) and the network is in outage
/// iff some receiver cannot decode its local rate vector.
inline OutageEstimate mc_network_outage(const NetworkSpec& net, std::span<const double> rates, const McConfig& cfg) {
    detail::require(rates.size() == net.links().size(), "rate vector length does not match link count");
    struct Receiver {
        std::vector<std::size_t> links;
        detail::SubsetChecker checker;
    };
    std::vector<Receiver> receivers;
    for (auto j : net.receivers()) {
        auto r = local_rates(net, j, rates);
        if (r.all_zero()) continue;
        receivers.push_back({net.in_links(j), detail::SubsetChecker(r)});
    }
    std::vector<double> lambdas(net.links().size());
    for (std::size_t e = 0; e < lambdas.size(); ++e) lambdas[e] = net.link_lambda(e);

    const auto events = detail::count_events(cfg, [&] {
        return [&, local = receivers, gains = std::vector<double>(lambdas.size()),
                scratch = std::vector<double>()](detail::TrialStream& s) mutable {
            for (std::size_t e = 0; e < gains.size(); ++e) gains[e] = s.exponential() / lambdas[e];
            for (auto& rx : local) {
                scratch.clear();
                for (auto e : rx.links) scratch.push_back(gains[e]);
                if (!rx.checker.decodable(scratch)) return true;
            }
            return false;
        };
    });
    return detail::to_estimate(events, cfg.trials);
}

}  // namespace fademac

#endif
