#include "fixtures.hpp"
#include "insurtrend/cluster.hpp"
#include "insurtrend/eval.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace insurtrend;

namespace {

DistanceMatrix matrix_of(std::size_t n, const std::vector<double>& upper) {
    DistanceMatrix m{fixtures::names(n), std::vector<double>(n * n, 0.0), std::nullopt, true};
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = upper.at(k++);
    return m;
}

DistanceMatrix random_matrix(Rng& rng, std::size_t n, bool ties) {
    std::vector<double> upper;
    for (std::size_t k = 0; k < n * (n - 1) / 2; ++k)
        upper.push_back(ties ? static_cast<double>(1 + rng.below(3)) : rng.uniform(0.1, 10.0));
    return matrix_of(n, upper);
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return adjusted_rand_index(a, b) == 1.0;
}

}  // namespace

TEST(Dba, SingleMemberIsReturned) {
    const std::vector<Series> members{{1, 3, 2, 5}};
    EXPECT_EQ(dba_barycenter(members, {0, 0, 0, 0}, 1), members[0]);
}

TEST(Dba, IdenticalMembers) {
    const std::vector<Series> members{{1, 2, 4}, {1, 2, 4}};
    EXPECT_EQ(dba_barycenter(members, {1, 2, 4}, 5), members[0]);
}

TEST(Dba, SymmetricPairFixedPoint) {
    const std::vector<Series> members{{0, 0}, {2, 2}};
    EXPECT_EQ(dba_barycenter(members, {1, 1}, 10), (Series{1, 1}));
}

TEST(Dba, RejectsEmptyMembers) {
    const std::vector<Series> none;
    EXPECT_THROW(dba_barycenter(none, {1}, 1), Error);
}

TEST(Dba, NeverRaisesTotalCostFromMedoid) {
    const auto l = fixtures::random_walks(41, 8, 10);
    const auto mi = medoid_index(l.z);
    double medoid_cost = 0, dba_cost = 0;
    const auto center = cluster_barycenter(l.z, 1);
    for (const auto& s : l.z) medoid_cost += dtw_cost(s, l.z[mi]), dba_cost += dtw_cost(s, center);
    EXPECT_LE(dba_cost, medoid_cost + 1e-12);
}

TEST(KMeans, SeparatedPairs) {
    LatentSeries l{fixtures::names(4), fixtures::quarters(3), {{0, 0, 0}, {10, 10, 10}, {0.01, 0, 0}, {10, 10.01, 10}}};
    const auto r = kmeans_dtw(l, {.m = 2, .seed = 3});
    EXPECT_EQ(r.assignment.labels[0], r.assignment.labels[2]);
    EXPECT_EQ(r.assignment.labels[1], r.assignment.labels[3]);
    EXPECT_NE(r.assignment.labels[0], r.assignment.labels[1]);
    EXPECT_LT(r.assignment.inertia_history.back(), 1e-3);
}

TEST(KMeans, MEqualsNGivesSingletons) {
    const auto l = fixtures::random_walks(42, 6, 5);
    const auto r = kmeans_dtw(l, {.m = 6, .seed = 1});
    EXPECT_EQ(std::set<std::size_t>(r.assignment.labels.begin(), r.assignment.labels.end()).size(), 6u);
    EXPECT_EQ(r.assignment.inertia_history.back(), 0.0);
}

TEST(KMeans, DeterministicAndRecordsSeed) {
    const auto l = fixtures::random_walks(43, 12, 8);
    const auto a = kmeans_dtw(l, {.m = 3, .seed = 17}), b = kmeans_dtw(l, {.m = 3, .seed = 17});
    EXPECT_EQ(a.assignment.labels, b.assignment.labels);
    EXPECT_EQ(a.assignment.inertia_history, b.assignment.inertia_history);
    EXPECT_EQ(a.centers, b.centers);
    EXPECT_EQ(a.assignment.seed, std::optional<std::uint64_t>(17));
}

TEST(KMeans, InertiaNeverIncreasesAndEveryClusterIsUsed) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto l = fixtures::random_walks(100 + seed, 15, 12);
        for (std::size_t m : {2u, 4u, 7u}) {
            const auto r = kmeans_dtw(l, {.m = m, .seed = seed});
            const auto& h = r.assignment.inertia_history;
            for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k], h[k - 1]) << "seed " << seed << " m " << m;
            EXPECT_EQ(std::set<std::size_t>(r.assignment.labels.begin(), r.assignment.labels.end()).size(), m);
            ASSERT_EQ(r.centers.size(), m);
        }
    }
}

TEST(KMeans, RejectsBadClusterCount) {
    const auto l = fixtures::random_walks(44, 5, 4);
    EXPECT_THROW(kmeans_dtw(l, {.m = 1}), Error);
    EXPECT_THROW(kmeans_dtw(l, {.m = 6}), Error);
}

TEST(KMeans, InitPicksDistinctCompanies) {
    const auto l = fixtures::random_walks(45, 9, 5);
    Rng rng(2);
    const auto c = kmeans_init(l.z, 9, rng);
    EXPECT_EQ(std::set<std::size_t>(c.begin(), c.end()).size(), 9u);
    // All-identical series: weights vanish, picks must still be distinct.
    LatentSeries same{fixtures::names(4), fixtures::quarters(2), {{1, 1}, {1, 1}, {1, 1}, {1, 1}}};
    const auto d = kmeans_init(same.z, 4, rng);
    EXPECT_EQ(std::set<std::size_t>(d.begin(), d.end()).size(), 4u);
}

TEST(Hierarchical, ThreeCompanyHandExample) {
    const auto d = hierarchical_complete(matrix_of(3, {1, 5, 4}));
    ASSERT_EQ(d.merges.size(), 2u);
    EXPECT_EQ(d.merges[0], (Merge{0, 1, 1.0, 2}));
    EXPECT_EQ(d.merges[1], (Merge{3, 2, 5.0, 3}));
    EXPECT_EQ(d.leaf_order, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(cut_dendrogram(d, 2).labels, (std::vector<std::size_t>{0, 0, 1}));
}

TEST(Hierarchical, TwoCompanies) {
    const auto d = hierarchical_complete(matrix_of(2, {2.5}));
    ASSERT_EQ(d.merges.size(), 1u);
    EXPECT_EQ(d.merges[0], (Merge{0, 1, 2.5, 2}));
    EXPECT_EQ(d.leaf_order, (std::vector<std::size_t>{0, 1}));
}

TEST(Hierarchical, LeafOrderKeepsFirstMergedPairAdjacent) {
    // A and C merge first, which pushes B to the end of the leaf order.
    const auto d = hierarchical_complete(matrix_of(3, {9, 1, 8}));  // d(A,B)=9 d(A,C)=1 d(B,C)=8
    EXPECT_EQ(d.merges[0], (Merge{0, 2, 1.0, 2}));
    EXPECT_EQ(d.leaf_order, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Hierarchical, RejectsInvalidMatrix) {
    auto m = matrix_of(3, {1, 2, 3});
    m(0, 1) = 7;
    EXPECT_THROW(hierarchical_complete(m), Error);
    m = matrix_of(3, {1, 2, 3});
    m(2, 2) = 1;
    EXPECT_THROW(hierarchical_complete(m), Error);
}

TEST(Hierarchical, MatchesBruteForceIncludingTies) {
    Rng rng(51);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        const auto m = random_matrix(rng, n, trial % 2 == 0);
        const auto d = hierarchical_complete(m);
        const auto ref = oracle::complete_linkage_brute_force(m);
        ASSERT_EQ(d.merges.size(), ref.size());
        for (std::size_t k = 0; k < ref.size(); ++k) {
            EXPECT_EQ(d.merges[k].left, ref[k].left);
            EXPECT_EQ(d.merges[k].right, ref[k].right);
            EXPECT_EQ(d.merges[k].height, ref[k].height);
            EXPECT_EQ(d.merges[k].size, ref[k].size);
        }
    }
}

TEST(Hierarchical, HeightsMonotoneAndFinalSizeN) {
    Rng rng(52);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.below(12);
        const auto d = hierarchical_complete(random_matrix(rng, n, trial % 3 == 0));
        for (std::size_t k = 1; k < d.merges.size(); ++k) EXPECT_GE(d.merges[k].height, d.merges[k - 1].height);
        EXPECT_EQ(d.merges.back().size, n);
        auto sorted = d.leaf_order;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(sorted[i], i);
    }
}

TEST(CutDendrogram, BoundariesAndNesting) {
    Rng rng(53);
    const std::size_t n = 9;
    const auto d = hierarchical_complete(random_matrix(rng, n, false));
    EXPECT_EQ(cut_dendrogram(d, 1).labels, std::vector<std::size_t>(n, 0));
    const auto singles = cut_dendrogram(d, n).labels;
    EXPECT_EQ(std::set<std::size_t>(singles.begin(), singles.end()).size(), n);
    EXPECT_THROW(cut_dendrogram(d, 0), Error);
    EXPECT_THROW(cut_dendrogram(d, n + 1), Error);
    for (std::size_t m = 2; m <= n; ++m) {
        const auto fine = cut_dendrogram(d, m).labels, coarse = cut_dendrogram(d, m - 1).labels;
        EXPECT_EQ(std::set<std::size_t>(fine.begin(), fine.end()).size(), m);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (fine[a] == fine[b]) {
                    EXPECT_EQ(coarse[a], coarse[b]);
                }
    }
}

TEST(CutDendrogram, LabelsFollowLeafOrder) {
    Rng rng(54);
    const auto d = hierarchical_complete(random_matrix(rng, 8, false));
    const auto labels = cut_dendrogram(d, 4).labels;
    std::size_t next = 0;
    std::set<std::size_t> seen;
    for (auto leaf : d.leaf_order) {
        if (seen.insert(labels[leaf]).second) {
            EXPECT_EQ(labels[leaf], next++);
        }
    }
}

TEST(CutDendrogram, MatchesBruteForceComponents) {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.below(6);
        const auto m = random_matrix(rng, n, false);
        const auto d = hierarchical_complete(m);
        const auto ref = oracle::complete_linkage_brute_force(m);
        for (std::size_t k = 1; k <= n; ++k) {
            // Replay the first n-k oracle merges over explicit member lists.
            std::vector<std::vector<std::size_t>> members(2 * n);
            for (std::size_t i = 0; i < n; ++i) members[i] = {i};
            std::set<std::size_t> roots;
            for (std::size_t i = 0; i < n; ++i) roots.insert(i);
            for (std::size_t s = 0; s + k < n; ++s) {
                members[n + s] = members[ref[s].left];
                members[n + s].insert(members[n + s].end(), members[ref[s].right].begin(), members[ref[s].right].end());
                roots.erase(ref[s].left), roots.erase(ref[s].right), roots.insert(n + s);
            }
            std::vector<std::size_t> expect(n);
            std::size_t c = 0;
            for (auto r : roots) {
                for (auto x : members[r]) expect[x] = c;
                ++c;
            }
            EXPECT_TRUE(same_partition(cut_dendrogram(d, k).labels, expect));
        }
    }
}

TEST(ClusterExport, Tables) {
    const auto d = hierarchical_complete(matrix_of(3, {1, 5, 4}));
    const auto dt = dendrogram_to_table(d);
    EXPECT_EQ(dt.columns, (std::vector<std::string>{"step", "left", "right", "height", "size"}));
    EXPECT_EQ(dt.rows.size(), 2u);
    EXPECT_EQ(dt.meta.at("leaves"), "3");
    const auto lo = leaf_order_to_table({"A", "B", "C"}, d.leaf_order);
    EXPECT_EQ(lo.rows[2], (std::vector<std::string>{"3", "C", "3"}));
    auto a = cut_dendrogram(d, 2);
    const auto at = assignments_to_table({"A", "B", "C"}, {a});
    EXPECT_EQ(at.rows[2], (std::vector<std::string>{"C", "hierarchical_complete", "2", "1"}));
    const auto ct = centers_to_table({{1.5, 2}}, fixtures::quarters(2));
    EXPECT_EQ(ct.rows[1], (std::vector<std::string>{"0", "2013Q2", "2"}));
    EXPECT_EQ(parse_cluster_method("kmeans_dtw"), ClusterMethod::kmeans_dtw);
    EXPECT_THROW(parse_cluster_method("ward"), Error);
}
