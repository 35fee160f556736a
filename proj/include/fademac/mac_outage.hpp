#ifndef FADEMAC_MAC_OUTAGE_HPP
#define FADEMAC_MAC_OUTAGE_HPP

// Common-outage probability of a slow Rayleigh-fading multiple-access
// channel with n transmitters. Link i has normalized gain z_i / l_i where
// z_i ~ Exp(1) and l_i = noise / (2 * variance_i * power_i). A rate vector r
// is decodable iff for every nonempty subset M of links
//     sum_{i in M} z_i / l_i >= 2^{sum_{i in M} r_i} - 1.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "fademac/error.hpp"
#include "fademac/estimate.hpp"
#include "fademac/exp_linear.hpp"

namespace fademac {

/// Largest row count of the subset matrix (n <= 20).
inline constexpr int kMaxMacLinks = 20;

/// Above this total rate the success probability underflows and outage is
/// reported as exactly 1.
inline constexpr double kMaxLogDomainRate = 60.0;

/// 2^x - 1 without cancellation for small x.
inline double pow2m1(double x) { return std::expm1(x * std::numbers::ln2); }

class MacSpec {
public:
    explicit MacSpec(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
        detail::require(!lambdas_.empty(), "MacSpec: need at least one link");
        detail::require(lambdas_.size() <= static_cast<std::size_t>(kMaxMacLinks),
                        "MacSpec: at most 20 links are supported");
        for (std::size_t i = 0; i < lambdas_.size(); ++i)
            if (!(lambdas_[i] > 0.0) || !std::isfinite(lambdas_[i]))
                throw InvalidInput("MacSpec: rate parameter " + std::to_string(i) + " must be positive");
        iid_ = std::all_of(lambdas_.begin(), lambdas_.end(), [&](double l) { return l == lambdas_.front(); });
    }

    static MacSpec iid(std::size_t n, double lambda) { return MacSpec(std::vector<double>(n, lambda)); }

    /// Builds the rate parameter noise / (2 variance power) for each link.
    static double rate_parameter(double noise_var, double variance, double power) {
        return noise_var / (2.0 * variance * power);
    }

    [[nodiscard]] std::size_t size() const noexcept { return lambdas_.size(); }
    [[nodiscard]] double lambda(std::size_t i) const { return lambdas_[i]; }
    [[nodiscard]] const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    [[nodiscard]] bool iid() const noexcept { return iid_; }

private:
    std::vector<double> lambdas_;
    bool iid_ = false;
};

/// Per-link transmission rates in bits/s/Hz.
class RateVector {
public:
    RateVector() = default;
    explicit RateVector(std::vector<double> rates) : rates_(std::move(rates)) {
        for (std::size_t i = 0; i < rates_.size(); ++i)
            if (!(rates_[i] >= 0.0) || !std::isfinite(rates_[i]))
                throw InvalidInput("RateVector: rate " + std::to_string(i) + " must be finite and >= 0");
    }

    [[nodiscard]] std::size_t size() const noexcept { return rates_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return rates_[i]; }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return rates_; }

    /// R_n = sum r_i
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double r : rates_) s += r;
        return s;
    }
    /// S_n = sum (2^{r_i} - 1)
    [[nodiscard]] double excess_sum() const {
        double s = 0.0;
        for (double r : rates_) s += pow2m1(r);
        return s;
    }
    /// alpha_n = prod (2^{r_i} - 1)
    [[nodiscard]] double excess_product() const {
        double p = 1.0;
        for (double r : rates_) p *= pow2m1(r);
        return p;
    }
    /// beta_n = 2^{R_n} - 1 - S_n; nonnegative for nonnegative rates.
    [[nodiscard]] double joint_slack() const { return std::max(0.0, pow2m1(total()) - excess_sum()); }

    [[nodiscard]] bool all_zero() const {
        return std::all_of(rates_.begin(), rates_.end(), [](double r) { return r == 0.0; });
    }

private:
    std::vector<double> rates_;
};

/// Truncated exponential series sum_{k<n} x^k/k! (G-tilde).
inline double exp_series(int n, double x) {
    double term = 1.0;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        if (k > 0) term *= x / k;
        sum += term;
    }
    return sum;
}

/// G(x) = x^2/2 + x + 1.
inline double quadratic_series(double x) { return 0.5 * x * x + x + 1.0; }

/// (2^n - 1) x n matrix whose k-th row (1-based) is k in binary, MSB first.
inline std::vector<std::vector<int>> build_conjunction_matrix(int n) {
    detail::require(n >= 1 && n <= kMaxMacLinks, "build_conjunction_matrix: n must be in [1, 20]");
    const std::size_t rows = (std::size_t{1} << n) - 1;
    std::vector<std::vector<int>> a(rows, std::vector<int>(static_cast<std::size_t>(n), 0));
    for (std::size_t k = 1; k <= rows; ++k)
        for (int c = 0; c < n; ++c) a[k - 1][static_cast<std::size_t>(c)] = static_cast<int>((k >> (n - 1 - c)) & 1U);
    return a;
}

/// Entrywise 2^{A r} - 1.
inline std::vector<double> rate_thresholds(const std::vector<std::vector<int>>& a, const RateVector& r) {
    std::vector<double> b;
    b.reserve(a.size());
    for (const auto& row : a) {
        detail::require(row.size() == r.size(), "rate_thresholds: column count does not match rate vector length");
        double s = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) s += row[i] * r[i];
        b.push_back(pow2m1(s));
    }
    return b;
}

/// The success event as {A_n D_n z >= b_n}, columns scaled by 1/l_i.
inline ConjunctionSystem success_system(const MacSpec& mac, const RateVector& r) {
    detail::require(mac.size() == r.size(), "success_system: rate vector length does not match MAC size");
    const int n = static_cast<int>(mac.size());
    const auto a = build_conjunction_matrix(n);
    auto b = rate_thresholds(a, r);
    std::vector<double> coeff;
    coeff.reserve(a.size() * mac.size());
    for (const auto& row : a)
        for (std::size_t i = 0; i < row.size(); ++i) coeff.push_back(row[i] / mac.lambda(i));
    return ConjunctionSystem(mac.size(), std::move(coeff), std::move(b));
}

namespace detail {

inline void check_pair(const MacSpec& mac, const RateVector& r) {
    require(mac.size() == r.size(), "rate vector length " + std::to_string(r.size()) +
                                        " does not match MAC size " + std::to_string(mac.size()));
}

inline void require_iid(const MacSpec& mac, const char* what) {
    require(mac.iid(), std::string(what) + ": requires identically distributed links");
}

// 1 - exp(log_success), with the large-rate guard.
inline double outage_from_log_success(double total_rate, double log_success) {
    if (total_rate > kMaxLogDomainRate) return 1.0;
    return std::clamp(-std::expm1(log_success), 0.0, 1.0);
}

}  // namespace detail

/// Exact outage when available: closed forms for one link and for two i.i.d.
/// links, otherwise the elimination recursion on the success system. Returns
/// nullopt when the recursion cannot resolve the system; callers then use
/// bounds or sampling.
inline std::optional<OutageEstimate> outage_exact(const MacSpec& mac, const RateVector& r) {
    detail::check_pair(mac, r);
    if (r.all_zero()) return OutageEstimate{0.0, Method::exact};
    const double total = r.total();
    if (mac.size() == 1) {
        const double l = mac.lambda(0);
        return OutageEstimate{detail::outage_from_log_success(total, -l * pow2m1(r[0])), Method::exact};
    }
    if (mac.size() == 2 && mac.iid()) {
        const double l = mac.lambda(0);
        const double log_success = -l * pow2m1(total) + std::log1p(l * pow2m1(r[0]) * pow2m1(r[1]));
        return OutageEstimate{detail::outage_from_log_success(total, log_success), Method::exact};
    }
    if (total > kMaxLogDomainRate) return OutageEstimate{1.0, Method::exact};
    const auto res = evaluate(success_system(mac, r));
    if (!res.resolved) return std::nullopt;
    return OutageEstimate{std::clamp(1.0 - res.value, 0.0, 1.0), Method::exact};
}

/// Lower bound for i.i.d. links: 1 - e^{-l(2^R - 1)} G~(l beta_n), evaluated
/// as 1 - e^{-l S_n} Pr(Erlang(n,1) > l beta_n).
inline OutageEstimate outage_lower_iid(const MacSpec& mac, const RateVector& r) {
    detail::check_pair(mac, r);
    detail::require_iid(mac, "outage_lower_iid");
    const double l = mac.lambda(0);
    const int n = static_cast<int>(mac.size());
    const double surv = erlang_survival(n, l * r.joint_slack());
    const double log_success = -l * r.excess_sum() + (surv > 0.0 ? std::log(surv) : -INFINITY);
    return {detail::outage_from_log_success(r.total(), log_success), Method::lower};
}

/// Lower bound for pairwise distinct rate parameters:
/// 1 - sum_i gamma_i exp(-beta - l_i (2^R - S - 1)), beta = sum_i l_i (2^{r_i} - 1).
inline OutageEstimate outage_lower_distinct(const MacSpec& mac, const RateVector& r) {
    detail::check_pair(mac, r);
    check_distinct_rates(mac.lambdas());
    if (r.total() > kMaxLogDomainRate) return {1.0, Method::lower};
    double beta = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) beta += mac.lambda(i) * pow2m1(r[i]);
    const double x = r.joint_slack();
    const auto gamma = hypoexponential_weights(mac.lambdas());
    double success = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) success += gamma[i] * std::exp(-beta - mac.lambda(i) * x);
    return {std::clamp(1.0 - success, 0.0, 1.0), Method::lower};
}

/// Upper bound for i.i.d. links, n >= 3: 1 - e^{-l(2^R - 1)} G(l alpha_n) with
/// G(x) = x^2/2 + x + 1. For n <= 2 the exact value is returned (tagged exact).
inline OutageEstimate outage_upper_iid(const MacSpec& mac, const RateVector& r) {
    detail::check_pair(mac, r);
    detail::require_iid(mac, "outage_upper_iid");
    if (mac.size() <= 2) return *outage_exact(mac, r);
    const double l = mac.lambda(0);
    const double log_success = -l * pow2m1(r.total()) + std::log(quadratic_series(l * r.excess_product()));
    return {detail::outage_from_log_success(r.total(), log_success), Method::upper};
}

/// The weaker upper bound 1 - e^{-l(2^R - 1)} that the allocation objective is built from.
inline OutageEstimate outage_upper_weak(const MacSpec& mac, const RateVector& r) {
    detail::check_pair(mac, r);
    detail::require_iid(mac, "outage_upper_weak");
    const double l = mac.lambda(0);
    return {detail::outage_from_log_success(r.total(), -l * pow2m1(r.total())), Method::upper};
}

}  // namespace fademac

#endif
