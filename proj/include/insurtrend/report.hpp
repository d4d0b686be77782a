#ifndef INSURTREND_REPORT_HPP
#define INSURTREND_REPORT_HPP

#include "insurtrend/cluster.hpp"
#include "insurtrend/common.hpp"
#include "insurtrend/ingest.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/ratios.hpp"
#include "insurtrend/table.hpp"

#include <nlohmann/json.hpp>

#include <sstream>
#include <string>
#include <vector>

namespace insurtrend {

/// Long-format (entity, period, metric, value) data behind the heatmaps.
inline Table export_heatmap_tables(const CompanyPanel& panel, const RatioTensor& ratios, const LatentSeries& latent) {
    if (ratios.companies != panel.companies() || latent.companies != panel.companies() ||
        ratios.periods != panel.periods() || latent.periods != panel.periods()) {
        throw Error("heatmap export: panel, ratios and latent series are not aligned");
    }
    Table t({"entity", "period", "metric", "value"}, {false, false, false, true});
    const std::size_t n = panel.num_companies(), jn = panel.num_periods();
    auto emit = [&](const char* metric, auto&& value) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < jn; ++j)
                t.rows.push_back({panel.companies()[i], panel.periods()[j].to_string(), metric, format_double(value(i, j))});
    };
    emit("market_share", [&](std::size_t i, std::size_t j) { return ratios.at(i, j, Ratio::market_share); });
    emit("net_earned_premium", [&](std::size_t i, std::size_t j) { return panel.value(i, j, RawField::net_earned_premium); });
    emit("underwriting_profit", [&](std::size_t i, std::size_t j) { return panel.value(i, j, RawField::underwriting_profit); });
    emit("new_policies", [&](std::size_t i, std::size_t j) { return panel.value(i, j, RawField::new_policies); });
    emit("total_policies", [&](std::size_t i, std::size_t j) { return panel.value(i, j, RawField::total_policies); });
    emit("latent_z", [&](std::size_t i, std::size_t j) { return latent.z[i][j]; });
    return t;
}

/// Side-by-side labels per company for every method (one column per method).
inline Table cluster_table(const std::vector<std::string>& companies, const std::vector<ClusterAssignment>& assignments) {
    std::vector<std::string> cols{"company"};
    std::vector<bool> numeric{false};
    for (const auto& a : assignments) {
        cols.emplace_back(to_string(a.method));
        numeric.push_back(true);
    }
    Table t(std::move(cols), std::move(numeric));
    for (std::size_t i = 0; i < companies.size(); ++i) {
        std::vector<std::string> row{companies[i]};
        for (const auto& a : assignments) row.push_back(std::to_string(a.labels.at(i)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

namespace detail {
inline void render_json(std::ostringstream& os, const nlohmann::ordered_json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (const auto& [k, v] : j.items()) {
            os << (first ? "" : ",\n") << inner << nlohmann::json(k).dump() << ": ";
            render_json(os, v, indent + 1);
            first = false;
        }
        os << '\n' << pad << '}';
    } else if (j.is_array()) {
        os << '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) os << ", ";
            render_json(os, j[k], indent + 1);
        }
        os << ']';
    } else if (j.is_number_float()) {
        os << format_double(j.get<double>());
    } else {
        os << j.dump();
    }
}
}  // namespace detail

/// JSON text with every floating-point value rendered at 17 significant digits.
inline std::string render_json(const nlohmann::ordered_json& j) {
    std::ostringstream os;
    detail::render_json(os, j, 0);
    os << '\n';
    return os.str();
}

}  // namespace insurtrend

#endif
