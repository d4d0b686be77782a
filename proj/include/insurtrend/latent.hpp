#ifndef INSURTREND_LATENT_HPP
#define INSURTREND_LATENT_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/ingest.hpp"
#include "insurtrend/table.hpp"

#include <map>
#include <string>
#include <vector>

namespace insurtrend {

/// One fused scalar trajectory per company (N x J x 1).
struct LatentSeries {
    std::vector<std::string> companies;
    std::vector<QuarterId> periods;
    std::vector<std::vector<double>> z;  // z[company][period]

    std::size_t num_companies() const { return companies.size(); }
    std::size_t num_periods() const { return periods.size(); }

    bool operator==(const LatentSeries&) const = default;
};

inline Table latent_to_table(const LatentSeries& l) {
    Table t({"company", "period", "z"}, {false, false, true});
    for (std::size_t i = 0; i < l.num_companies(); ++i)
        for (std::size_t j = 0; j < l.num_periods(); ++j)
            t.rows.push_back({l.companies[i], l.periods[j].to_string(), format_double(l.z[i][j])});
    return t;
}

inline LatentSeries latent_from_table(const Table& t) {
    const auto cc = t.column("company"), pc = t.column("period"), zc = t.column("z");
    LatentSeries l;
    std::map<std::string, std::size_t> ci;
    std::map<long, std::size_t> pi;
    for (const auto& row : t.rows) {
        if (ci.emplace(row.at(cc), l.companies.size()).second) l.companies.push_back(row.at(cc));
        const auto p = QuarterId::parse(row.at(pc));
        if (!p) throw Error("latent table: bad period '" + row.at(pc) + "'");
        pi.emplace(p->index(), 0);
    }
    for (auto& [idx, pos] : pi) {
        pos = l.periods.size();
        l.periods.push_back(QuarterId::from_index(idx));
    }
    if (t.rows.size() != l.companies.size() * l.periods.size()) {
        throw Error("latent table is not a complete company x period grid");
    }
    l.z.assign(l.companies.size(), std::vector<double>(l.periods.size(), 0.0));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        l.z[ci.at(t.rows[r][cc])][pi.at(QuarterId::parse(t.rows[r][pc])->index())] = t.number(r, zc);
    }
    return l;
}

}  // namespace insurtrend

#endif
