#ifndef INSURTREND_CLUSTER_HPP
#define INSURTREND_CLUSTER_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/dtw.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/rng.hpp"
#include "insurtrend/table.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace insurtrend {

enum class ClusterMethod { kmeans_dtw, hierarchical_complete };

inline std::string_view to_string(ClusterMethod m) {
    return m == ClusterMethod::kmeans_dtw ? "kmeans_dtw" : "hierarchical_complete";
}

inline ClusterMethod parse_cluster_method(std::string_view s) {
    if (s == "kmeans_dtw") return ClusterMethod::kmeans_dtw;
    if (s == "hierarchical_complete") return ClusterMethod::hierarchical_complete;
    throw Error("unknown clustering method '" + std::string(s) + "'");
}

struct ClusterAssignment {
    std::size_t m = 0;
    std::vector<std::size_t> labels;
    ClusterMethod method = ClusterMethod::kmeans_dtw;
    std::optional<std::uint64_t> seed;
    std::vector<double> inertia_history;  // k-means only
};

using Series = std::vector<double>;

// --- DTW barycenter averaging -------------------------------------------------

inline double dtw_cost(std::span<const double> a, std::span<const double> b) {
    return dtw_distance(a, b).cumulative;
}

/// Refines `init` by repeatedly aligning every member to it and replacing
/// each coordinate with the mean of the member values aligned to it.
inline Series dba_barycenter(std::span<const Series> members, Series init, std::size_t iters) {
    if (members.empty()) throw Error("dba_barycenter: no members");
    if (init.empty()) throw Error("dba_barycenter: empty initial series");
    for (std::size_t it = 0; it < iters; ++it) {
        std::vector<double> sum(init.size(), 0.0);
        std::vector<std::size_t> count(init.size(), 0);
        for (const auto& s : members) {
            for (const auto& [k, l] : dtw_distance(init, s).path) {
                sum[k] += s[l];
                ++count[k];
            }
        }
        for (std::size_t k = 0; k < init.size(); ++k) init[k] = sum[k] / static_cast<double>(count[k]);
    }
    return init;
}

/// Member with the smallest total DTW cost to the others (lowest index on ties).
inline std::size_t medoid_index(std::span<const Series> members) {
    std::size_t best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < members.size(); ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < members.size(); ++b)
            if (a != b) s += dtw_cost(members[a], members[b]);
        if (s < best_sum) {
            best_sum = s;
            best = a;
        }
    }
    return best;
}

/// Barycenter of a cluster: DBA started from the cluster medoid.
inline Series cluster_barycenter(std::span<const Series> members, std::size_t iters) {
    return dba_barycenter(members, members[medoid_index(members)], iters);
}

// --- k-means under DTW --------------------------------------------------------

struct KMeansOptions {
    std::size_t m = 4;
    std::uint64_t seed = 0;
    std::size_t max_iter = 50;
    std::size_t barycenter_iters = 10;
};

struct KMeansResult {
    ClusterAssignment assignment;
    std::vector<Series> centers;
};

/// Seeded, distance-weighted choice of `m` distinct companies. The first is
/// uniform; each next one is drawn with probability proportional to its
/// cost to the nearest chosen company.
inline std::vector<std::size_t> kmeans_init(std::span<const Series> series, std::size_t m, Rng& rng) {
    const std::size_t n = series.size();
    std::vector<std::size_t> chosen{static_cast<std::size_t>(rng.below(n))};
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (chosen.size() < m) {
        const std::size_t last = chosen.back();
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dtw_cost(series[i], series[last]));
        for (const std::size_t c : chosen) nearest[c] = 0.0;
        const double total = std::accumulate(nearest.begin(), nearest.end(), 0.0);
        std::size_t pick = n;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                pick = i;
                if (u < nearest[i]) break;
                u -= nearest[i];
            }
        } else {
            for (std::size_t i = 0; i < n && pick == n; ++i)
                if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) pick = i;
        }
        chosen.push_back(pick);
    }
    return chosen;
}

/// Lloyd iterations with DTW assignment and DBA centers. Costs are
/// un-normalized DTW alignment costs.
inline KMeansResult kmeans_dtw(const LatentSeries& latent, const KMeansOptions& opt) {
    const std::size_t n = latent.num_companies();
    if (opt.m < 2 || opt.m > n) {
        throw Error("kmeans_dtw: cluster count " + std::to_string(opt.m) + " outside [2, " + std::to_string(n) + "]");
    }
    const std::span<const Series> series(latent.z);
    Rng rng(opt.seed);

    KMeansResult out;
    out.assignment.m = opt.m;
    out.assignment.method = ClusterMethod::kmeans_dtw;
    out.assignment.seed = opt.seed;
    for (const std::size_t c : kmeans_init(series, opt.m, rng)) out.centers.push_back(series[c]);

    std::vector<std::size_t> labels(n, 0), prev;
    std::vector<double> cost(n, 0.0);
    for (std::size_t iter = 0; iter < std::max<std::size_t>(opt.max_iter, 1); ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < opt.m; ++c) {
                const double d = dtw_cost(series[i], out.centers[c]);
                if (d < best) {
                    best = d;
                    labels[i] = c;
                }
            }
            cost[i] = best;
        }
        // Empty cluster: take the worst-fit company from a cluster that can spare one.
        for (std::size_t c = 0; c < opt.m; ++c) {
            std::vector<std::size_t> size(opt.m, 0);
            for (const auto l : labels) ++size[l];
            if (size[c] > 0) continue;
            std::size_t far = n;
            for (std::size_t i = 0; i < n; ++i)
                if (size[labels[i]] > 1 && (far == n || cost[i] > cost[far])) far = i;
            labels[far] = c;
            cost[far] = 0.0;
            out.centers[c] = series[far];
        }
        const double inertia = std::accumulate(cost.begin(), cost.end(), 0.0);
        out.assignment.inertia_history.push_back(inertia);
        if (labels == prev || iter + 1 >= opt.max_iter) break;
        prev = labels;

        std::vector<Series> next = out.centers;
        for (std::size_t c = 0; c < opt.m; ++c) {
            std::vector<Series> members;
            double old_cost = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (labels[i] == c) {
                    members.push_back(series[i]);
                    old_cost += cost[i];
                }
            Series cand = cluster_barycenter(members, opt.barycenter_iters);
            double cand_cost = 0.0;
            for (const auto& s : members) cand_cost += dtw_cost(s, cand);
            if (cand_cost <= old_cost) next[c] = std::move(cand);
        }
        double moved = 0.0;
        for (std::size_t i = 0; i < n; ++i) moved += dtw_cost(series[i], next[labels[i]]);
        if (moved <= inertia) out.centers = std::move(next);
    }
    out.assignment.labels = labels;
    return out;
}

// --- complete-linkage agglomeration -------------------------------------------

/// One agglomeration step. Leaves are nodes 0..N-1; merge k creates node N+k.
/// `left` is the child containing the lower-indexed company.
struct Merge {
    std::size_t left = 0;
    std::size_t right = 0;
    double height = 0.0;
    std::size_t size = 0;

    bool operator==(const Merge&) const = default;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;
    std::vector<std::size_t> leaf_order;
};

/// In-order traversal of the merge tree, left child first.
inline std::vector<std::size_t> leaf_ordering(const Dendrogram& dend) {
    std::vector<std::size_t> order;
    if (dend.leaves == 0) return order;
    std::vector<std::size_t> stack{dend.leaves == 1 ? 0 : dend.leaves + dend.merges.size() - 1};
    while (!stack.empty()) {
        const std::size_t node = stack.back();
        stack.pop_back();
        if (node < dend.leaves) {
            order.push_back(node);
        } else {
            const Merge& mg = dend.merges.at(node - dend.leaves);
            stack.push_back(mg.right);
            stack.push_back(mg.left);
        }
    }
    return order;
}

/// Agglomerates clusters, always merging the pair whose largest member-to-member
/// distance is smallest. Ties go to the pair with the lowest (min company index)
/// labels, compared lexicographically.
inline Dendrogram hierarchical_complete(const DistanceMatrix& matrix) {
    matrix.validate();
    const std::size_t n = matrix.size();
    struct Active {
        std::size_t node;
        std::size_t min_member;
        std::size_t size;
    };
    std::vector<Active> active;
    for (std::size_t i = 0; i < n; ++i) active.push_back({i, i, 1});
    // Linkage between active slots, updated with max() on every merge.
    std::vector<std::vector<double>> link(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) link[i][j] = matrix(i, j);

    Dendrogram dend;
    dend.leaves = n;
    while (active.size() > 1) {
        std::size_t ba = 0, bb = 1;
        auto key = [&](std::size_t a, std::size_t b) {
            const auto lo = std::min(active[a].min_member, active[b].min_member);
            const auto hi = std::max(active[a].min_member, active[b].min_member);
            return std::make_tuple(link[a][b], lo, hi);
        };
        for (std::size_t a = 0; a < active.size(); ++a)
            for (std::size_t b = a + 1; b < active.size(); ++b)
                if (key(a, b) < key(ba, bb)) ba = a, bb = b;
        if (active[bb].min_member < active[ba].min_member) std::swap(ba, bb);

        const double h = link[ba][bb];
        const Active merged{n + dend.merges.size(), active[ba].min_member, active[ba].size + active[bb].size};
        dend.merges.push_back({active[ba].node, active[bb].node, h, merged.size});
        for (std::size_t c = 0; c < active.size(); ++c) {
            link[ba][c] = link[c][ba] = std::max(link[ba][c], link[bb][c]);
        }
        link[ba][ba] = 0.0;
        active[ba] = merged;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bb));
        link.erase(link.begin() + static_cast<std::ptrdiff_t>(bb));
        for (auto& row : link) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bb));
    }
    dend.leaf_order = leaf_ordering(dend);
    return dend;
}

/// Flat clustering with `m` groups: undo the last m-1 merges. Labels are
/// numbered in leaf order of first appearance.
inline ClusterAssignment cut_dendrogram(const Dendrogram& dend, std::size_t m) {
    const std::size_t n = dend.leaves;
    if (m < 1 || m > n) throw Error("cut_dendrogram: m=" + std::to_string(m) + " outside [1, " + std::to_string(n) + "]");
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    // Representative leaf of each node, so merges can refer to internal nodes.
    std::vector<std::size_t> rep(n + dend.merges.size());
    std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    for (std::size_t k = 0; k < dend.merges.size(); ++k) rep[n + k] = rep[dend.merges[k].left];
    for (std::size_t k = 0; k + m < n; ++k) {
        parent[find(rep[dend.merges[k].right])] = find(rep[dend.merges[k].left]);
    }

    ClusterAssignment a;
    a.m = m;
    a.method = ClusterMethod::hierarchical_complete;
    a.labels.assign(n, 0);
    std::vector<std::size_t> label_of_root(n, n);
    std::size_t next = 0;
    const auto order = dend.leaf_order.empty() ? leaf_ordering(dend) : dend.leaf_order;
    for (const std::size_t leaf : order) {
        auto& l = label_of_root[find(leaf)];
        if (l == n) l = next++;
        a.labels[leaf] = l;
    }
    return a;
}

// --- export -------------------------------------------------------------------

inline Table assignments_to_table(const std::vector<std::string>& companies,
                                  const std::vector<ClusterAssignment>& assignments) {
    Table t({"company", "method", "m", "label"}, {false, false, true, true});
    for (const auto& a : assignments)
        for (std::size_t i = 0; i < companies.size(); ++i)
            t.rows.push_back({companies[i], std::string(to_string(a.method)), std::to_string(a.m),
                              std::to_string(a.labels.at(i))});
    return t;
}

inline Table dendrogram_to_table(const Dendrogram& d) {
    Table t({"step", "left", "right", "height", "size"}, {true, true, true, true, true});
    t.meta["leaves"] = std::to_string(d.leaves);
    for (std::size_t k = 0; k < d.merges.size(); ++k) {
        const auto& mg = d.merges[k];
        t.rows.push_back({std::to_string(k + 1), std::to_string(mg.left), std::to_string(mg.right),
                          format_double(mg.height), std::to_string(mg.size)});
    }
    return t;
}

inline Table leaf_order_to_table(const std::vector<std::string>& companies, const std::vector<std::size_t>& order) {
    Table t({"position", "company", "index"}, {true, false, true});
    for (std::size_t p = 0; p < order.size(); ++p)
        t.rows.push_back({std::to_string(p + 1), companies.at(order[p]), std::to_string(order[p] + 1)});
    return t;
}

inline Table centers_to_table(const std::vector<Series>& centers, const std::vector<QuarterId>& periods) {
    Table t({"cluster", "period", "value"}, {true, false, true});
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t j = 0; j < centers[c].size(); ++j)
            t.rows.push_back({std::to_string(c), periods.at(j).to_string(), format_double(centers[c][j])});
    return t;
}

}  // namespace insurtrend

#endif
