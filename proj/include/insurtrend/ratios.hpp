#ifndef INSURTREND_RATIOS_HPP
#define INSURTREND_RATIOS_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/ingest.hpp"
#include "insurtrend/table.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace insurtrend {

enum class Ratio : std::size_t {
    market_share = 0,
    claims_paid_ratio,
    loss_ratio,
    underwriting_profit_ratio,
    expense_ratio,
    combined_ratio,
    claims_payout_ratio,
};

inline constexpr std::size_t kRatioCount = 7;

inline constexpr std::array<std::string_view, kRatioCount> kRatioNames{
    "market_share",  "claims_paid_ratio", "loss_ratio",          "underwriting_profit_ratio",
    "expense_ratio", "combined_ratio",    "claims_payout_ratio",
};

/// Operating expenses implied by premium, incurred claims and underwriting result.
inline constexpr double compute_expenses(double gross_premium, double claims_incurred, double underwriting_profit) {
    return gross_premium - (claims_incurred + underwriting_profit);
}

/// N x J x F grid of per-company, per-quarter features.
struct RatioTensor {
    std::vector<std::string> companies;
    std::vector<QuarterId> periods;
    std::vector<double> values;  // (i * J + j) * F + f
    std::size_t features = kRatioCount;

    RatioTensor() = default;
    RatioTensor(std::vector<std::string> c, std::vector<QuarterId> p, std::size_t f = kRatioCount)
        : companies(std::move(c)), periods(std::move(p)), values(companies.size() * periods.size() * f, 0.0),
          features(f) {}

    std::size_t num_companies() const { return companies.size(); }
    std::size_t num_periods() const { return periods.size(); }

    double& at(std::size_t i, std::size_t j, std::size_t f) { return values[(i * periods.size() + j) * features + f]; }
    double at(std::size_t i, std::size_t j, std::size_t f) const {
        return values[(i * periods.size() + j) * features + f];
    }
    double at(std::size_t i, std::size_t j, Ratio r) const { return at(i, j, static_cast<std::size_t>(r)); }

    bool operator==(const RatioTensor&) const = default;
};

namespace detail {
inline double percent_of(double num, double den) { return den == 0.0 ? 0.0 : num / den * 100.0; }
}  // namespace detail

/// Seven ratios per cell, in percent. Zero denominators yield 0.
inline RatioTensor compute_ratios(const CompanyPanel& panel) {
    const std::size_t n = panel.num_companies(), jn = panel.num_periods();
    RatioTensor out(panel.companies(), panel.periods());
    for (std::size_t j = 0; j < jn; ++j) {
        double market = 0.0;
        for (std::size_t i = 0; i < n; ++i) market += panel.value(i, j, RawField::gross_premium_income);
        for (std::size_t i = 0; i < n; ++i) {
            const double gpi = panel.value(i, j, RawField::gross_premium_income);
            const double paid = panel.value(i, j, RawField::claims_paid);
            const double incurred = panel.value(i, j, RawField::claims_incurred);
            const double uw = panel.value(i, j, RawField::underwriting_profit);
            const double loss = detail::percent_of(incurred, gpi);
            const double expense = detail::percent_of(compute_expenses(gpi, incurred, uw), gpi);
            out.at(i, j, 0) = detail::percent_of(gpi, market);
            out.at(i, j, 1) = detail::percent_of(paid, gpi);
            out.at(i, j, 2) = loss;
            out.at(i, j, 3) = detail::percent_of(uw, gpi);
            out.at(i, j, 4) = expense;
            out.at(i, j, 5) = loss + expense;
            out.at(i, j, 6) = detail::percent_of(paid, incurred);
        }
    }
    return out;
}

enum class ScalingMode { within_company, global };

inline std::string_view to_string(ScalingMode m) { return m == ScalingMode::within_company ? "within_company" : "global"; }

inline ScalingMode parse_scaling_mode(std::string_view s) {
    if (s == "within_company") return ScalingMode::within_company;
    if (s == "global") return ScalingMode::global;
    throw Error("unknown scaling mode '" + std::string(s) + "' (expected within_company or global)");
}

/// Fitted standardization parameters. Within-company mode holds one row per
/// company; global mode holds a single row.
struct ScalingSpec {
    ScalingMode mode = ScalingMode::within_company;
    std::vector<std::string> companies;
    std::size_t periods = 0;
    std::size_t features = kRatioCount;
    std::vector<double> means;  // row * features + f
    std::vector<double> stds;

    std::size_t row_for(std::size_t company) const { return mode == ScalingMode::within_company ? company : 0; }
    double mean(std::size_t company, std::size_t f) const { return means[row_for(company) * features + f]; }
    double stddev(std::size_t company, std::size_t f) const { return stds[row_for(company) * features + f]; }

    bool operator==(const ScalingSpec&) const = default;
};

/// Population mean/std per feature, either per company over time or over all cells.
inline ScalingSpec fit_scaling(const RatioTensor& t, ScalingMode mode) {
    ScalingSpec s;
    s.mode = mode;
    s.companies = t.companies;
    s.periods = t.num_periods();
    s.features = t.features;
    const std::size_t rows = mode == ScalingMode::within_company ? t.num_companies() : 1;
    s.means.assign(rows * t.features, 0.0);
    s.stds.assign(rows * t.features, 0.0);

    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i0 = mode == ScalingMode::within_company ? r : 0;
        const std::size_t i1 = mode == ScalingMode::within_company ? r + 1 : t.num_companies();
        const double count = static_cast<double>((i1 - i0) * t.num_periods());
        if (count == 0.0) continue;
        for (std::size_t f = 0; f < t.features; ++f) {
            double sum = 0.0;
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = 0; j < t.num_periods(); ++j) sum += t.at(i, j, f);
            const double mean = sum / count;
            double ss = 0.0;
            for (std::size_t i = i0; i < i1; ++i)
                for (std::size_t j = 0; j < t.num_periods(); ++j) {
                    const double d = t.at(i, j, f) - mean;
                    ss += d * d;
                }
            s.means[r * t.features + f] = mean;
            s.stds[r * t.features + f] = std::sqrt(ss / count);
        }
    }
    return s;
}

namespace detail {
inline void check_scaling_shape(const RatioTensor& t, const ScalingSpec& s) {
    if (t.features != s.features || t.num_periods() != s.periods || t.companies != s.companies) {
        throw Error("scaling spec does not match tensor shape or company order");
    }
}
}  // namespace detail

/// (value - mean) / std; features with zero spread map to 0.
inline RatioTensor apply_scaling(const RatioTensor& t, const ScalingSpec& s) {
    detail::check_scaling_shape(t, s);
    RatioTensor out = t;
    for (std::size_t i = 0; i < t.num_companies(); ++i)
        for (std::size_t j = 0; j < t.num_periods(); ++j)
            for (std::size_t f = 0; f < t.features; ++f) {
                const double sd = s.stddev(i, f);
                out.at(i, j, f) = sd > 0.0 ? (t.at(i, j, f) - s.mean(i, f)) / sd : 0.0;
            }
    return out;
}

inline RatioTensor invert_scaling(const RatioTensor& t, const ScalingSpec& s) {
    detail::check_scaling_shape(t, s);
    RatioTensor out = t;
    for (std::size_t i = 0; i < t.num_companies(); ++i)
        for (std::size_t j = 0; j < t.num_periods(); ++j)
            for (std::size_t f = 0; f < t.features; ++f)
                out.at(i, j, f) = t.at(i, j, f) * s.stddev(i, f) + s.mean(i, f);
    return out;
}

// --- export -----------------------------------------------------------------

inline Table ratios_to_table(const RatioTensor& t) {
    Table out({"company", "period", "feature", "value"}, {false, false, false, true});
    for (std::size_t i = 0; i < t.num_companies(); ++i)
        for (std::size_t j = 0; j < t.num_periods(); ++j)
            for (std::size_t f = 0; f < t.features; ++f)
                out.rows.push_back({t.companies[i], t.periods[j].to_string(), std::string(kRatioNames[f]),
                                    format_double(t.at(i, j, f))});
    return out;
}

inline RatioTensor ratios_from_table(const Table& tab) {
    const auto cc = tab.column("company"), pc = tab.column("period"), fc = tab.column("feature"),
               vc = tab.column("value");
    std::vector<std::string> companies;
    std::map<std::string, std::size_t> ci;
    long lo = 0, hi = 0;
    bool first = true;
    for (const auto& row : tab.rows) {
        if (ci.emplace(row.at(cc), companies.size()).second) companies.push_back(row.at(cc));
        const auto p = QuarterId::parse(row.at(pc));
        if (!p) throw Error("ratio table: bad period '" + row.at(pc) + "'");
        lo = first ? p->index() : std::min(lo, p->index());
        hi = first ? p->index() : std::max(hi, p->index());
        first = false;
    }
    std::vector<QuarterId> periods;
    if (!first)
        for (long p = lo; p <= hi; ++p) periods.push_back(QuarterId::from_index(p));
    RatioTensor t(std::move(companies), std::move(periods));
    if (tab.rows.size() != t.values.size()) throw Error("ratio table is not a complete N x J x F grid");
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
        const auto& row = tab.rows[r];
        const auto fit = std::find(kRatioNames.begin(), kRatioNames.end(), row.at(fc));
        if (fit == kRatioNames.end()) throw Error("ratio table: unknown feature '" + row.at(fc) + "'");
        const auto j = static_cast<std::size_t>(QuarterId::parse(row.at(pc))->index() - lo);
        t.at(ci.at(row.at(cc)), j, static_cast<std::size_t>(fit - kRatioNames.begin())) = tab.number(r, vc);
    }
    return t;
}

inline Table scaling_to_table(const ScalingSpec& s) {
    Table out({"company", "feature", "mean", "std"}, {false, false, true, true});
    out.meta["scaling_mode"] = std::string(to_string(s.mode));
    out.meta["periods"] = std::to_string(s.periods);
    const std::size_t rows = s.mode == ScalingMode::within_company ? s.companies.size() : 1;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t f = 0; f < s.features; ++f)
            out.rows.push_back({s.mode == ScalingMode::within_company ? s.companies[r] : "*",
                                std::string(kRatioNames[f]), format_double(s.means[r * s.features + f]),
                                format_double(s.stds[r * s.features + f])});
    return out;
}

}  // namespace insurtrend

#endif
