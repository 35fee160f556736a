#ifndef FADEMAC_ESTIMATE_HPP
#define FADEMAC_ESTIMATE_HPP

#include <string_view>

namespace fademac {

enum class Method { exact, lower, upper, monte_carlo };

constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::exact: return "exact";
        case Method::lower: return "lower";
        case Method::upper: return "upper";
        case Method::monte_carlo: return "monte-carlo";
    }
    return "unknown";
}

/// An outage probability together with how it was obtained. For sampled
/// values `half_width` is the 95% normal-approximation half-width and
/// `low_confidence` is set when fewer than 10 outage events were observed.
struct OutageEstimate {
    double value = 0.0;
    Method method = Method::exact;
    double half_width = 0.0;
    bool low_confidence = false;

    /// One standard error (half_width / 1.96); zero for analytic values.
    [[nodiscard]] double std_error() const noexcept { return half_width / 1.96; }
};

}  // namespace fademac

#endif
