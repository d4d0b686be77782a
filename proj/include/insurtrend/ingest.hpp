#ifndef INSURTREND_INGEST_HPP
#define INSURTREND_INGEST_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/table.hpp"

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace insurtrend {

/// Calendar quarter. Totally ordered; `index()` is contiguous across year ends.
struct QuarterId {
    int year = 0;
    int quarter = 1;

    constexpr auto operator<=>(const QuarterId&) const = default;

    constexpr long index() const { return static_cast<long>(year) * 4 + (quarter - 1); }

    static constexpr QuarterId from_index(long idx) {
        const long y = idx >= 0 ? idx / 4 : (idx - 3) / 4;
        return QuarterId{static_cast<int>(y), static_cast<int>(idx - y * 4) + 1};
    }

    constexpr QuarterId next() const { return from_index(index() + 1); }

    std::string to_string() const { return std::to_string(year) + "Q" + std::to_string(quarter); }

    /// Accepts "2013Q1", "2013-Q1" and "2013 Q1" (case-insensitive Q).
    static std::optional<QuarterId> parse(std::string_view s) {
        const auto q = s.find_first_of("Qq");
        if (q == std::string_view::npos) return std::nullopt;
        auto ys = s.substr(0, q);
        while (!ys.empty() && (ys.back() == '-' || ys.back() == ' ')) ys.remove_suffix(1);
        long long y = 0, qq = 0;
        if (!parse_int(ys, y) || !parse_int(s.substr(q + 1), qq)) return std::nullopt;
        if (qq < 1 || qq > 4) return std::nullopt;
        return QuarterId{static_cast<int>(y), static_cast<int>(qq)};
    }
};

/// Raw metrics in fixed storage order.
enum class RawField : std::size_t {
    gross_premium_income = 0,
    claims_paid,
    claims_incurred,
    underwriting_profit,
    net_earned_premium,
    new_policies,
    total_policies,
};

inline constexpr std::size_t kRawFieldCount = 7;
inline constexpr std::size_t kCoreFieldCount = 4;

inline constexpr std::array<std::string_view, kRawFieldCount> kRawFieldNames{
    "gross_premium_income", "claims_paid",   "claims_incurred", "underwriting_profit",
    "net_earned_premium",   "new_policies",  "total_policies",
};

// Fields that may not be negative when reported.
inline constexpr std::array<bool, kRawFieldCount> kNonNegativeField{true, true, false, false, false, true, true};

/// One row of the source table; absent fields are std::nullopt.
struct RawRecord {
    std::string company;
    QuarterId period;
    std::array<std::optional<double>, kRawFieldCount> fields{};
};

/// Maps source column names onto the panel's fields.
struct PanelSchema {
    std::string company = "company";
    std::string year = "year";
    std::string quarter = "quarter";
    /// When non-empty, a single "2013Q1"-style column replaces year/quarter.
    std::string period;
    std::array<std::string, kRawFieldCount> fields{
        std::string(kRawFieldNames[0]), std::string(kRawFieldNames[1]), std::string(kRawFieldNames[2]),
        std::string(kRawFieldNames[3]), std::string(kRawFieldNames[4]), std::string(kRawFieldNames[5]),
        std::string(kRawFieldNames[6]),
    };
    char delimiter = ',';
};

/// Company x quarter grid of raw metrics. Cells with no source data hold
/// zeros and observed == false.
class CompanyPanel {
  public:
    CompanyPanel() = default;
    CompanyPanel(std::vector<std::string> companies, std::vector<QuarterId> periods)
        : companies_(std::move(companies)),
          periods_(std::move(periods)),
          values_(companies_.size() * periods_.size() * kRawFieldCount, 0.0),
          observed_(companies_.size() * periods_.size(), 0) {
        for (std::size_t j = 1; j < periods_.size(); ++j) {
            if (periods_[j].index() != periods_[j - 1].index() + 1) {
                throw Error("panel periods must be consecutive quarters");
            }
        }
    }

    std::size_t num_companies() const { return companies_.size(); }
    std::size_t num_periods() const { return periods_.size(); }
    const std::vector<std::string>& companies() const { return companies_; }
    const std::vector<QuarterId>& periods() const { return periods_; }

    double value(std::size_t i, std::size_t j, RawField f) const {
        return values_[(i * periods_.size() + j) * kRawFieldCount + static_cast<std::size_t>(f)];
    }
    void set_value(std::size_t i, std::size_t j, RawField f, double v) {
        values_[(i * periods_.size() + j) * kRawFieldCount + static_cast<std::size_t>(f)] = v;
    }
    bool observed(std::size_t i, std::size_t j) const { return observed_[i * periods_.size() + j] != 0; }
    void set_observed(std::size_t i, std::size_t j, bool o) { observed_[i * periods_.size() + j] = o ? 1 : 0; }

    bool operator==(const CompanyPanel&) const = default;

  private:
    std::vector<std::string> companies_;
    std::vector<QuarterId> periods_;
    std::vector<double> values_;
    std::vector<std::uint8_t> observed_;
};

namespace detail {

inline bool is_missing_token(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s.empty() || s == "NA" || s == "N/A" || s == "na" || s == "NaN" || s == "nan" || s == "-" ||
           s == "null";
}

inline std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name) {
    if (name.empty()) return std::nullopt;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

/// Parses source rows into records. `line` numbers in errors are 1-based
/// file lines (the header is line 1).
inline std::vector<RawRecord> read_raw_records(std::istream& in, const PanelSchema& schema) {
    std::string line;
    std::vector<std::string> header;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        header = split_delimited(line, schema.delimiter);
        break;
    }
    if (header.empty()) throw Error("panel source is empty (no header row)");

    auto require = [&](const std::string& name, const char* role) {
        const auto c = detail::find_column(header, name);
        if (!c) throw Error(std::string("schema column '") + name + "' (" + role + ") not found in header");
        return *c;
    };
    const std::size_t company_col = require(schema.company, "company");
    std::optional<std::size_t> period_col, year_col, quarter_col;
    if (!schema.period.empty()) {
        period_col = require(schema.period, "period");
    } else {
        year_col = require(schema.year, "year");
        quarter_col = require(schema.quarter, "quarter");
    }
    std::array<std::optional<std::size_t>, kRawFieldCount> field_cols{};
    for (std::size_t f = 0; f < kRawFieldCount; ++f) {
        if (f < kCoreFieldCount) field_cols[f] = require(schema.fields[f], kRawFieldNames[f].data());
        else field_cols[f] = detail::find_column(header, schema.fields[f]);
    }

    std::vector<RawRecord> records;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split_delimited(line, schema.delimiter);
        auto cell = [&](std::size_t c) -> std::string_view {
            return c < cells.size() ? std::string_view(cells[c]) : std::string_view{};
        };
        const auto where = "row " + std::to_string(lineno);

        RawRecord rec;
        rec.company = std::string(cell(company_col));
        if (rec.company.empty()) throw Error(where + ": empty company identifier");
        if (period_col) {
            const auto p = QuarterId::parse(cell(*period_col));
            if (!p) throw Error(where + ": unparseable period '" + std::string(cell(*period_col)) + "'");
            rec.period = *p;
        } else {
            long long y = 0, q = 0;
            if (!parse_int(cell(*year_col), y)) {
                throw Error(where + ": unparseable year '" + std::string(cell(*year_col)) + "'");
            }
            auto qs = cell(*quarter_col);
            if (!qs.empty() && (qs.front() == 'Q' || qs.front() == 'q')) qs.remove_prefix(1);
            if (!parse_int(qs, q) || q < 1 || q > 4) {
                throw Error(where + ": unparseable quarter '" + std::string(cell(*quarter_col)) + "'");
            }
            rec.period = QuarterId{static_cast<int>(y), static_cast<int>(q)};
        }
        for (std::size_t f = 0; f < kRawFieldCount; ++f) {
            if (!field_cols[f]) continue;
            const auto s = cell(*field_cols[f]);
            if (detail::is_missing_token(s)) continue;
            double v = 0.0;
            if (!parse_double(s, v)) {
                throw Error(where + ": unparseable number '" + std::string(s) + "' in column '" +
                            schema.fields[f] + "'");
            }
            if (kNonNegativeField[f] && v < 0.0) {
                throw Error(where + ": negative value " + std::string(s) + " in column '" + schema.fields[f] + "'");
            }
            rec.fields[f] = v;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

/// Aligns records onto the rectangular grid spanning the global min..max
/// quarter. Company order is first appearance.
inline CompanyPanel assemble_panel(const std::vector<RawRecord>& records) {
    if (records.empty()) throw Error("panel source has no data rows");
    std::vector<std::string> companies;
    std::map<std::string, std::size_t> company_index;
    long lo = records.front().period.index(), hi = lo;
    for (const auto& r : records) {
        if (company_index.emplace(r.company, companies.size()).second) companies.push_back(r.company);
        lo = std::min(lo, r.period.index());
        hi = std::max(hi, r.period.index());
    }
    std::vector<QuarterId> periods;
    for (long p = lo; p <= hi; ++p) periods.push_back(QuarterId::from_index(p));

    CompanyPanel panel(std::move(companies), std::move(periods));
    std::vector<std::uint8_t> seen(panel.num_companies() * panel.num_periods(), 0);
    for (const auto& r : records) {
        const std::size_t i = company_index.at(r.company);
        const auto j = static_cast<std::size_t>(r.period.index() - lo);
        auto& s = seen[i * panel.num_periods() + j];
        if (s) throw Error("duplicate record for (" + r.company + ", " + r.period.to_string() + ")");
        s = 1;
        bool any = false;
        for (std::size_t f = 0; f < kRawFieldCount; ++f) {
            if (r.fields[f]) {
                panel.set_value(i, j, static_cast<RawField>(f), *r.fields[f]);
                any = true;
            }
        }
        panel.set_observed(i, j, any);
    }
    return panel;
}

inline CompanyPanel load_panel(const std::filesystem::path& source, const PanelSchema& schema) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw Error("cannot open panel source '" + source.string() + "'");
    return assemble_panel(read_raw_records(in, schema));
}

struct PanelSummary {
    std::vector<std::string> companies;
    std::vector<std::size_t> observed_quarters;
    QuarterId first;
    QuarterId last;
    std::size_t total_observed = 0;
};

inline PanelSummary panel_summary(const CompanyPanel& panel) {
    PanelSummary s;
    s.companies = panel.companies();
    if (panel.num_periods() > 0) {
        s.first = panel.periods().front();
        s.last = panel.periods().back();
    }
    for (std::size_t i = 0; i < panel.num_companies(); ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < panel.num_periods(); ++j) count += panel.observed(i, j) ? 1 : 0;
        s.observed_quarters.push_back(count);
        s.total_observed += count;
    }
    return s;
}

/// Canonical one-row-per-cell export consumed by every later stage.
inline Table panel_to_table(const CompanyPanel& panel) {
    std::vector<std::string> cols{"company", "period", "observed"};
    std::vector<bool> numeric{false, false, true};
    for (auto n : kRawFieldNames) {
        cols.emplace_back(n);
        numeric.push_back(true);
    }
    Table t(std::move(cols), std::move(numeric));
    for (std::size_t i = 0; i < panel.num_companies(); ++i) {
        for (std::size_t j = 0; j < panel.num_periods(); ++j) {
            std::vector<std::string> row{panel.companies()[i], panel.periods()[j].to_string(),
                                         panel.observed(i, j) ? "1" : "0"};
            for (std::size_t f = 0; f < kRawFieldCount; ++f) {
                row.push_back(format_double(panel.value(i, j, static_cast<RawField>(f))));
            }
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

inline CompanyPanel panel_from_table(const Table& t) {
    const auto cc = t.column("company"), pc = t.column("period"), oc = t.column("observed");
    std::array<std::size_t, kRawFieldCount> fc{};
    for (std::size_t f = 0; f < kRawFieldCount; ++f) fc[f] = t.column(kRawFieldNames[f]);

    std::vector<RawRecord> records;
    std::vector<bool> obs;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        RawRecord rec;
        rec.company = t.rows[r].at(cc);
        const auto p = QuarterId::parse(t.rows[r].at(pc));
        if (!p) throw Error("panel table row " + std::to_string(r + 1) + ": bad period");
        rec.period = *p;
        for (std::size_t f = 0; f < kRawFieldCount; ++f) rec.fields[f] = t.number(r, fc[f]);
        records.push_back(std::move(rec));
        obs.push_back(t.number(r, oc) != 0.0);
    }
    CompanyPanel panel = assemble_panel(records);
    // Mask comes from the file, not from value presence: an observed cell may hold all zeros.
    const long lo = panel.periods().empty() ? 0 : panel.periods().front().index();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < panel.num_companies(); ++i) index[panel.companies()[i]] = i;
    for (std::size_t r = 0; r < records.size(); ++r) {
        panel.set_observed(index[records[r].company], static_cast<std::size_t>(records[r].period.index() - lo), obs[r]);
    }
    return panel;
}

}  // namespace insurtrend

#endif
