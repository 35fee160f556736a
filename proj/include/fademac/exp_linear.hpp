#ifndef FADEMAC_EXP_LINEAR_HPP
#define FADEMAC_EXP_LINEAR_HPP

// Joint tail probabilities of nonnegative linear combinations of i.i.d.
// unit-rate exponential variables. A ConjunctionSystem (A, b) stands for the
// event {A z >= b}; strict and non-strict inequalities are interchangeable
// because every boundary has probability zero.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fademac/error.hpp"

namespace fademac {

class ConjunctionSystem {
public:
    /// Empty conjunction over `columns` variables (holds almost surely).
    explicit ConjunctionSystem(std::size_t columns) : columns_(columns) {
        detail::require(columns >= 1, "ConjunctionSystem: column count must be >= 1");
    }

    /// `coefficients` is row-major with `thresholds.size()` rows.
    ConjunctionSystem(std::size_t columns, std::vector<double> coefficients,
                      std::vector<double> thresholds)
        : columns_(columns), coeff_(std::move(coefficients)), thresholds_(std::move(thresholds)) {
        detail::require(columns_ >= 1, "ConjunctionSystem: column count must be >= 1");
        detail::require(coeff_.size() == columns_ * thresholds_.size(),
                        "ConjunctionSystem: coefficient count does not match rows x columns");
        for (std::size_t k = 0; k < coeff_.size(); ++k) {
            if (!(coeff_[k] >= 0.0) || !std::isfinite(coeff_[k]))
                throw InvalidInput("ConjunctionSystem: entry (" + std::to_string(k / columns_) + "," +
                                   std::to_string(k % columns_) + ") must be finite and >= 0");
        }
        for (std::size_t r = 0; r < thresholds_.size(); ++r) {
            if (!std::isfinite(thresholds_[r]))
                throw InvalidInput("ConjunctionSystem: threshold " + std::to_string(r) + " is not finite");
        }
    }

    static ConjunctionSystem from_rows(const std::vector<std::vector<double>>& rows,
                                       std::vector<double> thresholds) {
        detail::require(!rows.empty(), "ConjunctionSystem::from_rows: need at least one row");
        detail::require(rows.size() == thresholds.size(),
                        "ConjunctionSystem::from_rows: thresholds length must equal row count");
        const std::size_t cols = rows.front().size();
        std::vector<double> flat;
        flat.reserve(rows.size() * cols);
        for (const auto& row : rows) {
            detail::require(row.size() == cols, "ConjunctionSystem::from_rows: ragged rows");
            flat.insert(flat.end(), row.begin(), row.end());
        }
        return ConjunctionSystem(cols, std::move(flat), std::move(thresholds));
    }

    [[nodiscard]] std::size_t rows() const noexcept { return thresholds_.size(); }
    [[nodiscard]] std::size_t columns() const noexcept { return columns_; }
    [[nodiscard]] double coefficient(std::size_t r, std::size_t c) const { return coeff_[r * columns_ + c]; }
    [[nodiscard]] double threshold(std::size_t r) const { return thresholds_[r]; }
    [[nodiscard]] const std::vector<double>& thresholds() const noexcept { return thresholds_; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const {
        return {coeff_.data() + r * columns_, columns_};
    }

    /// True when every inequality a_r . z >= b_r holds for the sample z.
    [[nodiscard]] bool satisfied_by(std::span<const double> z) const {
        for (std::size_t r = 0; r < rows(); ++r) {
            const auto a = row(r);
            double lhs = 0.0;
            for (std::size_t c = 0; c < columns_; ++c) lhs += a[c] * z[c];
            if (lhs < thresholds_[r]) return false;
        }
        return true;
    }

    [[nodiscard]] bool columns_identical(std::size_t c1, std::size_t c2) const {
        for (std::size_t r = 0; r < rows(); ++r)
            if (coefficient(r, c1) != coefficient(r, c2)) return false;
        return true;
    }

    /// Indices of the strictly positive entries of row r, ascending.
    [[nodiscard]] std::vector<std::size_t> support(std::size_t r) const {
        std::vector<std::size_t> out;
        for (std::size_t c = 0; c < columns_; ++c)
            if (coefficient(r, c) > 0.0) out.push_back(c);
        return out;
    }

    friend bool operator==(const ConjunctionSystem&, const ConjunctionSystem&) = default;

private:
    std::size_t columns_;
    std::vector<double> coeff_;
    std::vector<double> thresholds_;
};

// ---------------------------------------------------------------------------
// Leaf distributions
// ---------------------------------------------------------------------------

/// Minimum relative gap min_{i!=j} |l_i - l_j| / max(l) accepted by the
/// hypoexponential closed form.
inline constexpr double kMinRelativeRateGap = 1e-6;

/// Pr(Erlang(n,1) > x) = e^{-x} sum_{k<n} x^k/k!, and 1 for x < 0.
inline double erlang_survival(int n, double x) {
    detail::require(n >= 1, "erlang_survival: shape must be >= 1");
    if (!(x > 0.0)) return 1.0;
    // Terms are accumulated as exp(k log x - x - log k!) so large x does not overflow.
    double sum = 0.0;
    double log_term = -x;  // k = 0
    const double log_x = std::log(x);
    for (int k = 0; k < n; ++k) {
        if (k > 0) log_term += log_x - std::log(static_cast<double>(k));
        sum += std::exp(log_term);
    }
    return std::clamp(sum, 0.0, 1.0);
}

/// Throws IllConditioned if two rates are closer than kMinRelativeRateGap
/// relative to the largest rate.
inline void check_distinct_rates(std::span<const double> rates, double min_gap = kMinRelativeRateGap) {
    double largest = 0.0;
    for (double l : rates) {
        detail::require(l > 0.0 && std::isfinite(l), "exponential rates must be positive and finite");
        largest = std::max(largest, l);
    }
    for (std::size_t i = 0; i < rates.size(); ++i)
        for (std::size_t j = i + 1; j < rates.size(); ++j)
            if (std::abs(rates[i] - rates[j]) < min_gap * largest)
                throw IllConditioned("rates " + std::to_string(i) + " and " + std::to_string(j) +
                                     " are too close for the distinct-rate closed form");
}

/// Weights gamma_i = prod_{j!=i} l_j / (l_j - l_i) of the hypoexponential survival.
inline std::vector<double> hypoexponential_weights(std::span<const double> rates) {
    std::vector<double> gamma(rates.size(), 1.0);
    for (std::size_t i = 0; i < rates.size(); ++i)
        for (std::size_t j = 0; j < rates.size(); ++j)
            if (j != i) gamma[i] *= rates[j] / (rates[j] - rates[i]);
    return gamma;
}

/// Pr(sum_i z_i / l_i > x) for distinct rates l_i.
inline double hypoexponential_survival(std::span<const double> rates, double x,
                                       double min_gap = kMinRelativeRateGap) {
    detail::require(!rates.empty(), "hypoexponential_survival: need at least one rate");
    check_distinct_rates(rates, min_gap);
    if (!(x > 0.0)) return 1.0;
    const auto gamma = hypoexponential_weights(rates);
    double sum = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) sum += gamma[i] * std::exp(-rates[i] * x);
    return std::clamp(sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Elimination steps
// ---------------------------------------------------------------------------

/// Removes rows whose threshold is <= 0; they hold almost surely.
inline ConjunctionSystem drop_vacuous_rows(const ConjunctionSystem& sys) {
    std::vector<double> coeff;
    std::vector<double> b;
    for (std::size_t r = 0; r < sys.rows(); ++r) {
        if (sys.threshold(r) <= 0.0) continue;
        const auto a = sys.row(r);
        coeff.insert(coeff.end(), a.begin(), a.end());
        b.push_back(sys.threshold(r));
    }
    return ConjunctionSystem(sys.columns(), std::move(coeff), std::move(b));
}

struct SingletonElimination {
    double multiplier;
    ConjunctionSystem reduced;
};

struct WeightedSystem {
    double weight;
    ConjunctionSystem reduced;
};

namespace detail {

// Rows other than `skip`, with thresholds shifted by -delta * column `col`,
// and with the columns in `drop` removed.
inline ConjunctionSystem shift_and_remove(const ConjunctionSystem& sys, std::size_t skip, std::size_t col,
                                          double delta, std::span<const std::size_t> drop) {
    std::vector<bool> dropped(sys.columns(), false);
    for (std::size_t c : drop) dropped[c] = true;
    const std::size_t kept_cols = sys.columns() - drop.size();
    std::vector<double> coeff;
    std::vector<double> b;
    coeff.reserve((sys.rows() - 1) * kept_cols);
    for (std::size_t r = 0; r < sys.rows(); ++r) {
        if (r == skip) continue;
        for (std::size_t c = 0; c < sys.columns(); ++c)
            if (!dropped[c]) coeff.push_back(sys.coefficient(r, c));
        b.push_back(sys.threshold(r) - delta * sys.coefficient(r, col));
    }
    return ConjunctionSystem(kept_cols, std::move(coeff), std::move(b));
}

}  // namespace detail

/// Row `row` constrains a single variable z_i: a_{r,i} z_i >= b_r. By
/// memorylessness Pr(A z >= b) = exp(-b_r/a_{r,i}) Pr(A' z >= b') where the
/// row is deleted and the other thresholds are shifted along column i.
inline SingletonElimination eliminate_singleton_row(const ConjunctionSystem& sys, std::size_t row) {
    detail::require(row < sys.rows(), "eliminate_singleton_row: row index out of range");
    const auto support = sys.support(row);
    if (support.size() != 1) {
        std::string msg = "eliminate_singleton_row: row " + std::to_string(row) + " has " +
                          std::to_string(support.size()) + " positive entries";
        if (support.size() > 1) msg += " (second at column " + std::to_string(support[1]) + ")";
        throw InvalidInput(msg);
    }
    detail::require(sys.threshold(row) >= 0.0,
                    "eliminate_singleton_row: threshold of row " + std::to_string(row) + " is negative");
    const std::size_t col = support.front();
    const double delta = sys.threshold(row) / sys.coefficient(row, col);
    return {std::exp(-delta), detail::shift_and_remove(sys, row, col, delta, {})};
}

/// Generalisation to a row supported on k pairwise identical columns
/// i_1 < ... < i_k. Conditioning on how many of the k variables are needed to
/// cross delta = b_r / a_{r,i_1} gives k terms; term m carries the Poisson
/// weight delta^m e^{-delta} / m! and drops the first m columns.
inline std::vector<WeightedSystem> eliminate_identical_columns_row(const ConjunctionSystem& sys, std::size_t row,
                                                                   std::vector<std::size_t> cols) {
    detail::require(row < sys.rows(), "eliminate_identical_columns_row: row index out of range");
    detail::require(!cols.empty(), "eliminate_identical_columns_row: column set is empty");
    std::sort(cols.begin(), cols.end());
    detail::require(std::adjacent_find(cols.begin(), cols.end()) == cols.end(),
                    "eliminate_identical_columns_row: duplicate column index");
    detail::require(cols.back() < sys.columns(), "eliminate_identical_columns_row: column index out of range");
    if (sys.support(row) != cols)
        throw InvalidInput("eliminate_identical_columns_row: row " + std::to_string(row) +
                           " is not positive exactly on the given columns");
    for (std::size_t k = 1; k < cols.size(); ++k)
        if (!sys.columns_identical(cols.front(), cols[k]))
            throw InvalidInput("eliminate_identical_columns_row: columns " + std::to_string(cols.front()) +
                               " and " + std::to_string(cols[k]) + " differ");
    detail::require(sys.threshold(row) >= 0.0,
                    "eliminate_identical_columns_row: threshold of row " + std::to_string(row) + " is negative");

    const std::size_t lead = cols.front();
    const double delta = sys.threshold(row) / sys.coefficient(row, lead);
    std::vector<WeightedSystem> terms;
    terms.reserve(cols.size());
    double log_weight = -delta;
    for (std::size_t m = 0; m < cols.size(); ++m) {
        if (m > 0) log_weight += std::log(delta) - std::log(static_cast<double>(m));
        const double weight = delta > 0.0 ? std::exp(log_weight) : (m == 0 ? 1.0 : 0.0);
        const std::span<const std::size_t> drop(cols.data(), m);
        terms.push_back({weight, detail::shift_and_remove(sys, row, lead, delta, drop)});
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

enum class StepKind { singleton_row, identical_columns, leaf_empty, leaf_impossible, leaf_erlang, leaf_hypoexponential };

struct TraceStep {
    StepKind kind;
    std::size_t row = 0;         // row index for elimination steps
    std::size_t multiplicity = 0;  // k for identical-columns / erlang, column count for hypoexponential

    friend bool operator==(const TraceStep&, const TraceStep&) = default;
};

inline std::string to_string(const TraceStep& s) {
    switch (s.kind) {
        case StepKind::singleton_row: return "singleton-row[" + std::to_string(s.row) + "]";
        case StepKind::identical_columns:
            return "identical-columns[" + std::to_string(s.row) + ",k=" + std::to_string(s.multiplicity) + "]";
        case StepKind::leaf_empty: return "leaf:empty";
        case StepKind::leaf_impossible: return "leaf:impossible";
        case StepKind::leaf_erlang: return "leaf:erlang(" + std::to_string(s.multiplicity) + ")";
        case StepKind::leaf_hypoexponential: return "leaf:hypoexponential(" + std::to_string(s.multiplicity) + ")";
    }
    return "?";
}

struct RecursionResult {
    double value = 0.0;
    std::vector<TraceStep> method_trace;
    bool resolved = false;
};

/// Upper bound on the number of subproblems spawned by weighted-sum branching.
inline constexpr std::size_t kMaxBranchSubproblems = 32;

namespace detail {

class Evaluator {
public:
    std::vector<TraceStep> trace;

    std::optional<double> run(ConjunctionSystem sys) {
        double multiplier = 1.0;
        for (;;) {
            sys = drop_vacuous_rows(sys);
            if (auto leaf = try_leaf(sys)) return multiplier * *leaf;
            if (failed_) return std::nullopt;

            if (auto r = find_singleton(sys)) {
                auto step = eliminate_singleton_row(sys, *r);
                trace.push_back({StepKind::singleton_row, *r, 1});
                multiplier *= step.multiplier;
                sys = std::move(step.reduced);
                continue;
            }
            if (auto r = find_identical_block(sys)) {
                const auto cols = sys.support(*r);
                trace.push_back({StepKind::identical_columns, *r, cols.size()});
                auto terms = eliminate_identical_columns_row(sys, *r, cols);
                subproblems_ += terms.size();
                if (subproblems_ > kMaxBranchSubproblems) return std::nullopt;
                double total = 0.0;
                for (auto& term : terms) {
                    if (term.weight == 0.0) continue;
                    auto v = run(std::move(term.reduced));
                    if (!v) return std::nullopt;
                    total += term.weight * *v;
                }
                return multiplier * total;
            }
            return std::nullopt;
        }
    }

private:
    std::size_t subproblems_ = 0;
    bool failed_ = false;

    std::optional<double> try_leaf(const ConjunctionSystem& sys) {
        if (sys.rows() == 0) {
            trace.push_back({StepKind::leaf_empty, 0, 0});
            return 1.0;
        }
        for (std::size_t r = 0; r < sys.rows(); ++r) {
            if (sys.support(r).empty()) {  // 0 >= b with b > 0
                trace.push_back({StepKind::leaf_impossible, r, 0});
                return 0.0;
            }
        }
        if (sys.rows() != 1) return std::nullopt;

        const auto cols = sys.support(0);
        std::vector<double> a;
        for (std::size_t c : cols) a.push_back(sys.coefficient(0, c));
        const double b = sys.threshold(0);
        if (std::all_of(a.begin(), a.end(), [&](double v) { return v == a.front(); })) {
            trace.push_back({StepKind::leaf_erlang, 0, cols.size()});
            return erlang_survival(static_cast<int>(cols.size()), b / a.front());
        }
        // sum a_i z_i >= b  <=>  sum z_i / l_i >= b with l_i = 1 / a_i
        std::vector<double> rates;
        for (double v : a) rates.push_back(1.0 / v);
        try {
            const double p = hypoexponential_survival(rates, b);
            trace.push_back({StepKind::leaf_hypoexponential, 0, cols.size()});
            return p;
        } catch (const IllConditioned&) {
            failed_ = true;
            return std::nullopt;
        }
    }

    static std::optional<std::size_t> find_singleton(const ConjunctionSystem& sys) {
        for (std::size_t r = 0; r < sys.rows(); ++r)
            if (sys.support(r).size() == 1) return r;
        return std::nullopt;
    }

    static std::optional<std::size_t> find_identical_block(const ConjunctionSystem& sys) {
        for (std::size_t r = 0; r < sys.rows(); ++r) {
            const auto cols = sys.support(r);
            if (cols.size() < 2) continue;
            bool identical = true;
            for (std::size_t k = 1; k < cols.size() && identical; ++k)
                identical = sys.columns_identical(cols.front(), cols[k]);
            if (identical) return r;
        }
        return std::nullopt;
    }
};

}  // namespace detail

/// Probability of {A z >= b} by repeated elimination. Returns resolved=false
/// when no rule applies to some residual system or the branching budget is
/// exhausted; the partial trace is kept for diagnostics.
inline RecursionResult evaluate(const ConjunctionSystem& sys) {
    detail::Evaluator ev;
    auto value = ev.run(sys);
    RecursionResult out;
    out.method_trace = std::move(ev.trace);
    if (value) {
        out.value = std::clamp(*value, 0.0, 1.0);
        out.resolved = true;
    }
    return out;
}

}  // namespace fademac

#endif
