#ifndef INSURTREND_EVAL_HPP
#define INSURTREND_EVAL_HPP

#include "insurtrend/cluster.hpp"
#include "insurtrend/common.hpp"
#include "insurtrend/dtw.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace insurtrend {

/// Per-company silhouette over a precomputed distance matrix. Companies in
/// singleton clusters score 0.
inline std::vector<double> silhouette_samples(const DistanceMatrix& matrix, std::span<const std::size_t> labels) {
    const std::size_t n = matrix.size();
    if (labels.size() != n) throw Error("silhouette: label count does not match matrix size");
    const std::size_t m = n == 0 ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::size_t> size(m, 0);
    for (const auto l : labels) ++size[l];
    const auto populated = std::count_if(size.begin(), size.end(), [](std::size_t s) { return s > 0; });
    if (populated < 2) throw Error("silhouette is undefined for fewer than two clusters");

    std::vector<double> s(n, 0.0);
    std::vector<double> sums(m);
    for (std::size_t i = 0; i < n; ++i) {
        if (size[labels[i]] == 1) continue;
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) sums[labels[j]] += matrix(i, j);
        const double a = sums[labels[i]] / static_cast<double>(size[labels[i]] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m; ++c)
            if (c != labels[i] && size[c] > 0) b = std::min(b, sums[c] / static_cast<double>(size[c]));
        const double denom = std::max(a, b);
        s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return s;
}

inline double silhouette_mean(const DistanceMatrix& matrix, std::span<const std::size_t> labels) {
    const auto s = silhouette_samples(matrix, labels);
    double total = 0.0;
    for (double v : s) total += v;
    return s.empty() ? 0.0 : total / static_cast<double>(s.size());
}

/// Within-cluster squared deviation of every latent point from its cluster
/// center at the same period.
inline double elbow_distortion(const LatentSeries& latent, std::span<const std::size_t> labels,
                               std::span<const Series> centers) {
    if (labels.size() != latent.num_companies()) throw Error("distortion: label count mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= centers.size()) throw Error("distortion: label without a center");
        const auto& c = centers[labels[i]];
        if (c.size() != latent.z[i].size()) throw Error("distortion: center length differs from series length");
        for (std::size_t j = 0; j < c.size(); ++j) {
            const double d = latent.z[i][j] - c[j];
            v += d * d;
        }
    }
    return v;
}

/// DBA barycenter of every cluster of a flat assignment.
inline std::vector<Series> assignment_centers(const LatentSeries& latent, std::span<const std::size_t> labels,
                                              std::size_t m, std::size_t barycenter_iters) {
    std::vector<Series> centers;
    for (std::size_t c = 0; c < m; ++c) {
        std::vector<Series> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(latent.z[i]);
        if (members.empty()) throw Error("cluster " + std::to_string(c) + " has no members");
        centers.push_back(cluster_barycenter(members, barycenter_iters));
    }
    return centers;
}

struct SweepOptions {
    std::uint64_t seed = 0;
    std::size_t max_iter = 50;
    std::size_t barycenter_iters = 10;
};

struct ValidationCurve {
    ClusterMethod method = ClusterMethod::kmeans_dtw;
    std::vector<std::size_t> ms;
    std::vector<double> silhouette;
    std::vector<double> distortion;
};

inline ValidationCurve validation_sweep(const LatentSeries& latent, const DistanceMatrix& matrix,
                                        std::span<const std::size_t> m_range, ClusterMethod method,
                                        const SweepOptions& opt) {
    const std::size_t n = latent.num_companies();
    if (matrix.size() != n) throw Error("validation_sweep: matrix and latent series disagree on N");
    for (const auto m : m_range)
        if (m < 2 || m > n) throw Error("validation_sweep: m=" + std::to_string(m) + " outside [2, " + std::to_string(n) + "]");

    ValidationCurve curve;
    curve.method = method;
    std::optional<Dendrogram> dend;
    if (method == ClusterMethod::hierarchical_complete) dend = hierarchical_complete(matrix);
    for (const auto m : m_range) {
        std::vector<std::size_t> labels;
        std::vector<Series> centers;
        if (method == ClusterMethod::kmeans_dtw) {
            auto km = kmeans_dtw(latent, {m, opt.seed, opt.max_iter, opt.barycenter_iters});
            labels = std::move(km.assignment.labels);
            centers = std::move(km.centers);
        } else {
            labels = cut_dendrogram(*dend, m).labels;
            centers = assignment_centers(latent, labels, m, opt.barycenter_iters);
        }
        curve.ms.push_back(m);
        curve.silhouette.push_back(silhouette_mean(matrix, labels));
        curve.distortion.push_back(elbow_distortion(latent, labels, centers));
    }
    return curve;
}

struct SelectionRule {
    double elbow_fraction = 0.1;       // successive decrease below this share of the first one
    double silhouette_fraction = 0.9;  // candidates within this share of the best silhouette
};

struct Selection {
    std::size_t chosen = 0;
    std::size_t elbow = 0;
    std::size_t best_silhouette = 0;
    double best_silhouette_value = 0.0;
    std::vector<std::size_t> candidates;
};

/// Picks the largest m up to the elbow whose silhouette is near the best.
/// The elbow is the first m after which distortion drops by less than
/// `elbow_fraction` of the first drop. Falls back to the silhouette argmax.
inline Selection select_m(const ValidationCurve& curve, const SelectionRule& rule = {}) {
    Selection sel;
    if (curve.ms.empty()) throw Error("select_m: empty validation curve");
    std::size_t best = 0;
    for (std::size_t k = 1; k < curve.ms.size(); ++k)
        if (curve.silhouette[k] > curve.silhouette[best]) best = k;
    sel.best_silhouette = curve.ms[best];
    sel.best_silhouette_value = curve.silhouette[best];

    sel.elbow = curve.ms.back();
    if (curve.ms.size() >= 2) {
        const double first = curve.distortion[0] - curve.distortion[1];
        for (std::size_t k = 0; k + 1 < curve.ms.size(); ++k) {
            if (curve.distortion[k] - curve.distortion[k + 1] < rule.elbow_fraction * first) {
                sel.elbow = curve.ms[k];
                break;
            }
        }
    }
    const double floor = rule.silhouette_fraction * sel.best_silhouette_value;
    for (std::size_t k = 0; k < curve.ms.size(); ++k)
        if (curve.ms[k] <= sel.elbow && curve.silhouette[k] >= floor) sel.candidates.push_back(curve.ms[k]);
    sel.chosen = sel.candidates.empty() ? sel.best_silhouette : sel.candidates.back();
    return sel;
}

/// Chance-corrected agreement between two partitions of the same items.
inline double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw Error("adjusted_rand_index: partitions differ in length");
    const double n = static_cast<double>(a.size());
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [k, v] : joint) sum_joint += pairs(v);
    for (const auto& [k, v] : ra) sum_a += pairs(v);
    for (const auto& [k, v] : rb) sum_b += pairs(v);
    const double expected = n > 1.0 ? sum_a * sum_b / pairs(n) : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (sum_joint - expected) / (max_index - expected);
}

inline Table validation_to_table(const std::vector<ValidationCurve>& curves) {
    Table t({"method", "m", "silhouette", "distortion"}, {false, true, true, true});
    for (const auto& c : curves)
        for (std::size_t k = 0; k < c.ms.size(); ++k)
            t.rows.push_back({std::string(to_string(c.method)), std::to_string(c.ms[k]), format_double(c.silhouette[k]),
                              format_double(c.distortion[k])});
    return t;
}

}  // namespace insurtrend

#endif
