#ifndef INSURTREND_DTW_HPP
#define INSURTREND_DTW_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/table.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace insurtrend {

inline constexpr double local_cost(double a, double b) { return (a - b) * (a - b); }

/// Index pairs, 0-based internally; exports render them 1-based.
using WarpingPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
    double cumulative = 0.0;  // optimal un-normalized cost, Gamma(J_A, J_B)
    double normalized = 0.0;  // cumulative / path length
    WarpingPath path;

    double distance(bool normalize) const { return normalize ? normalized : cumulative; }
};

/// Checks boundary, continuity and monotonicity of a path for series of
/// lengths `la` and `lb`.
inline bool is_valid_warping_path(const WarpingPath& path, std::size_t la, std::size_t lb) {
    if (path.empty() || path.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
    if (path.back() != std::pair<std::size_t, std::size_t>{la - 1, lb - 1}) return false;
    for (std::size_t s = 1; s < path.size(); ++s) {
        const auto dk = path[s].first - path[s - 1].first;
        const auto dl = path[s].second - path[s - 1].second;
        if (path[s].first < path[s - 1].first || path[s].second < path[s - 1].second) return false;
        if (dk > 1 || dl > 1 || dk + dl == 0) return false;
    }
    return true;
}

/// Optimal cumulative alignment cost via the three-predecessor recursion,
/// plus the backtracked path. Backtracking prefers the diagonal, then
/// (k-1, l), then (k, l-1).
inline DtwResult dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw Error("dtw: series must be non-empty");
    const std::size_t n = a.size(), m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> gamma(n * m, inf);
    auto G = [&](std::size_t k, std::size_t l) -> double& { return gamma[k * m + l]; };

    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < m; ++l) {
            const double d = local_cost(a[k], b[l]);
            if (k == 0 && l == 0) {
                G(k, l) = d;
                continue;
            }
            double best = inf;
            if (k > 0 && l > 0) best = G(k - 1, l - 1);
            if (k > 0) best = std::min(best, G(k - 1, l));
            if (l > 0) best = std::min(best, G(k, l - 1));
            G(k, l) = d + best;
        }
    }

    DtwResult r;
    r.cumulative = G(n - 1, m - 1);
    std::size_t k = n - 1, l = m - 1;
    r.path.emplace_back(k, l);
    while (k > 0 || l > 0) {
        if (k > 0 && l > 0) {
            const double diag = G(k - 1, l - 1), up = G(k - 1, l), left = G(k, l - 1);
            if (diag <= up && diag <= left) {
                --k, --l;
            } else if (up <= left) {
                --k;
            } else {
                --l;
            }
        } else if (k > 0) {
            --k;
        } else {
            --l;
        }
        r.path.emplace_back(k, l);
    }
    std::reverse(r.path.begin(), r.path.end());

    double along = 0.0;
    for (const auto& [pk, pl] : r.path) along += local_cost(a[pk], b[pl]);
    r.normalized = along / static_cast<double>(r.path.size());
    return r;
}

/// Symmetric company x company distance matrix with an optional leaf order.
struct DistanceMatrix {
    std::vector<std::string> labels;
    std::vector<double> d;  // row-major N x N
    std::optional<std::vector<std::size_t>> ordering;
    bool normalized = true;

    std::size_t size() const { return labels.size(); }
    double operator()(std::size_t i, std::size_t j) const { return d[i * labels.size() + j]; }
    double& operator()(std::size_t i, std::size_t j) { return d[i * labels.size() + j]; }

    /// Throws unless square, symmetric, zero-diagonal, non-negative and finite.
    void validate() const {
        const std::size_t n = size();
        if (d.size() != n * n) throw Error("distance matrix is not square");
        for (std::size_t i = 0; i < n; ++i) {
            if ((*this)(i, i) != 0.0) throw Error("distance matrix has a non-zero diagonal at " + labels[i]);
            for (std::size_t j = 0; j < n; ++j) {
                const double v = (*this)(i, j);
                if (!std::isfinite(v) || v < 0.0) throw Error("distance matrix has a negative or non-finite entry");
                if (v != (*this)(j, i)) throw Error("distance matrix is not symmetric");
            }
        }
    }
};

/// DTW distance for every unordered company pair, computed once and
/// mirrored. Work is spread across threads; each pair writes a fixed slot.
inline DistanceMatrix pairwise_matrix(const LatentSeries& latent, bool normalize = true, unsigned threads = 0) {
    const std::size_t n = latent.num_companies();
    if (n < 2) throw Error("pairwise_matrix needs at least two companies");
    DistanceMatrix out{latent.companies, std::vector<double>(n * n, 0.0), std::nullopt, normalize};

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, pairs.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < pairs.size();) {
            const auto [i, j] = pairs[k];
            const double v = dtw_distance(latent.z[i], latent.z[j]).distance(normalize);
            out(i, j) = v;
            out(j, i) = v;
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    return out;
}

inline Table distance_matrix_to_table(const DistanceMatrix& m) {
    std::vector<std::string> cols{"company"};
    cols.insert(cols.end(), m.labels.begin(), m.labels.end());
    std::vector<bool> numeric(cols.size(), true);
    numeric[0] = false;
    Table t(std::move(cols), std::move(numeric));
    t.meta["dtw_normalized"] = m.normalized ? "true" : "false";
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::vector<std::string> row{m.labels[i]};
        for (std::size_t j = 0; j < m.size(); ++j) row.push_back(format_double(m(i, j)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Same matrix with rows and columns permuted into `order`.
inline DistanceMatrix reorder(const DistanceMatrix& m, const std::vector<std::size_t>& order) {
    if (order.size() != m.size()) throw Error("reorder: permutation length does not match matrix");
    DistanceMatrix out{{}, std::vector<double>(m.d.size(), 0.0), std::nullopt, m.normalized};
    for (const std::size_t i : order) out.labels.push_back(m.labels.at(i));
    for (std::size_t a = 0; a < order.size(); ++a)
        for (std::size_t b = 0; b < order.size(); ++b) out(a, b) = m(order[a], order[b]);
    return out;
}

inline DistanceMatrix distance_matrix_from_table(const Table& t) {
    DistanceMatrix m;
    m.labels.assign(t.columns.begin() + 1, t.columns.end());
    const std::size_t n = m.labels.size();
    if (t.rows.size() != n) throw Error("distance table is not square");
    m.d.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (t.rows[i].at(0) != m.labels[i]) throw Error("distance table row labels do not match header");
        for (std::size_t j = 0; j < n; ++j) m(i, j) = t.number(i, j + 1);
    }
    const auto it = t.meta.find("dtw_normalized");
    m.normalized = it == t.meta.end() || it->second != "false";
    m.validate();
    return m;
}

}  // namespace insurtrend

#endif
