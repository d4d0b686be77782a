#ifndef INSURTREND_SYNTHETIC_HPP
#define INSURTREND_SYNTHETIC_HPP

#include "insurtrend/ingest.hpp"
#include "insurtrend/rng.hpp"
#include "insurtrend/table.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace insurtrend {

struct SyntheticPanelOptions {
    std::size_t companies = 28;
    std::size_t quarters = 41;
    QuarterId start{2013, 1};
    std::uint64_t seed = 7;
};

/// Quarterly source rows for a made-up medical insurance market with four
/// behaviour profiles: steady leaders, cyclical mid-size firms, loss-making
/// decliners and irregular reporters (skipped quarters, blank fields).
inline std::vector<RawRecord> synthetic_records(const SyntheticPanelOptions& opt) {
    Rng rng(opt.seed, "synthetic-panel");
    std::vector<RawRecord> out;
    for (std::size_t i = 0; i < opt.companies; ++i) {
        const std::size_t profile = i % 4;
        const double scale = std::exp(rng.uniform(std::log(2e8), std::log(4e9)));
        const double phase = rng.uniform(0.0, 6.283185307179586);
        const double growth = rng.uniform(-0.004, 0.02);
        char name[32];
        std::snprintf(name, sizeof name, "Insurer %02zu", i + 1);
        double policies = scale / 2.5e4;
        QuarterId q = opt.start;
        for (std::size_t j = 0; j < opt.quarters; ++j, q = q.next()) {
            const double t = static_cast<double>(j);
            if (profile == 3 && rng.uniform() < 0.3) continue;
            double gpi = scale * std::exp(growth * t) * (1.0 + 0.05 * rng.normal());
            double loss = 0.65 + 0.03 * rng.normal();
            double uw = 0.08 + 0.02 * rng.normal();
            switch (profile) {
                case 1:
                    loss += 0.15 * std::sin(0.5 * t + phase);
                    uw -= 0.08 * std::sin(0.5 * t + phase);
                    break;
                case 2:
                    gpi *= std::exp(-0.025 * t);
                    loss += 0.006 * t;
                    uw -= 0.005 * t;
                    break;
                case 3:
                    gpi *= 1.0 + 0.4 * rng.normal();
                    loss += 0.2 * rng.normal();
                    break;
                default:
                    break;
            }
            gpi = std::max(gpi, 0.0);
            const double incurred = loss * gpi;
            const double paid = std::max(0.0, incurred * (0.85 + 0.1 * rng.normal()));
            policies *= 1.0 + 0.01 * rng.normal() + growth;
            const double fresh = std::max(0.0, std::round(policies * (0.08 + 0.02 * rng.uniform())));

            RawRecord r;
            r.company = name;
            r.period = q;
            r.fields[0] = std::round(gpi);
            r.fields[1] = std::round(paid);
            r.fields[2] = std::round(incurred);
            r.fields[3] = std::round(uw * gpi);
            r.fields[4] = std::round(gpi * (0.88 + 0.04 * rng.uniform()));
            r.fields[5] = fresh;
            r.fields[6] = std::round(std::max(policies, 0.0));
            if (profile == 3 && rng.uniform() < 0.15) r.fields[4 + rng.below(3)].reset();
            out.push_back(std::move(r));
        }
    }
    return out;
}

/// Renders records in the default source layout (company, year, quarter, fields).
inline std::string records_to_csv(const std::vector<RawRecord>& records) {
    std::vector<std::string> cols{"company", "year", "quarter"};
    for (auto n : kRawFieldNames) cols.emplace_back(n);
    Table t(std::move(cols), std::vector<bool>(3 + kRawFieldCount, true));
    t.numeric[0] = false;
    for (const auto& r : records) {
        std::vector<std::string> row{r.company, std::to_string(r.period.year), std::to_string(r.period.quarter)};
        for (const auto& f : r.fields) row.push_back(f ? format_double(*f) : std::string{});
        t.rows.push_back(std::move(row));
    }
    return to_csv(t);
}

}  // namespace insurtrend

#endif
