// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero when a gating criterion fails.
//
//   acceptance [panel.csv]
//
// The optional panel replaces the bundled synthetic panel in the
// reproduction run.

#include "fixtures.hpp"
#include "insurtrend/cluster.hpp"
#include "insurtrend/dtw.hpp"
#include "insurtrend/eval.hpp"
#include "insurtrend/lstm.hpp"
#include "insurtrend/pipeline.hpp"
#include "insurtrend/ratios.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

using namespace insurtrend;
namespace fs = std::filesystem;

namespace {

// Tolerances and corpus sizes.
constexpr double kDtwTol = 1e-12;
constexpr int kDtwPairs = 1000;
constexpr std::size_t kDtwMaxLen = 6;
constexpr double kDtwBudgetSec = 30.0;

constexpr int kGradConfigs = 50;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradAbsTol = 1e-8;
constexpr double kGradBudgetSec = 60.0;

constexpr double kTrainRatio = 0.5;

constexpr int kInertiaSeeds = 20;

constexpr int kLinkageMatrices = 200;
constexpr std::size_t kLinkageMaxN = 8;

constexpr double kEvalTol = 1e-12;
constexpr std::size_t kEvalMaxN = 10;

constexpr int kPlantedTrials = 20;
constexpr int kPlantedNeeded = 18;
constexpr double kPlantedMinAri = 0.9;

constexpr int kRatioPanels = 1000;
constexpr double kRatioTol = 1e-9;

struct Outcome {
    bool pass = true;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_series(Rng& rng, std::size_t max_len) {
    std::vector<double> s(1 + rng.below(max_len));
    for (auto& v : s) v = rng.normal();
    return s;
}

std::vector<std::size_t> random_labels(Rng& rng, std::size_t n, std::size_t m) {
    std::vector<std::size_t> l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = i < m ? i : rng.below(m);
    rng.shuffle(std::span<std::size_t>(l));
    return l;
}

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome dtw_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    int bad = 0;
    double worst = 0.0;
    for (int k = 0; k < kDtwPairs; ++k) {
        const auto a = random_series(rng, kDtwMaxLen), b = random_series(rng, kDtwMaxLen);
        const double err = std::abs(dtw_distance(a, b).cumulative - oracle::dtw_brute_force(a, b));
        worst = std::max(worst, err);
        if (!(err <= kDtwTol)) ++bad;
    }
    const double sec = seconds_since(t0);
    return {bad == 0 && sec < kDtwBudgetSec,
            fmt("%d pairs, %d mismatches, max error %.3g, %.2f s", kDtwPairs, bad, worst, sec)};
}

lstm::LstmParams random_params(Rng& rng, std::size_t y, std::size_t f) {
    lstm::LstmParams p(y, f);
    p.for_each([&](const std::string&, lstm::Matrix& m) {
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-0.8, 0.8);
    });
    return p;
}

Outcome lstm_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1002);
    std::size_t coords_checked = 0, bad = 0;
    for (int c = 0; c < kGradConfigs; ++c) {
        const std::size_t y = 1 + rng.below(4), jn = 1 + rng.below(5), n = 1 + rng.below(3);
        RatioTensor t(fixtures::names(n), fixtures::quarters(jn), kRatioCount);
        for (auto& v : t.values) v = rng.normal();
        auto p = random_params(rng, y, kRatioCount);
        std::vector<std::size_t> batch(n);
        for (std::size_t i = 0; i < n; ++i) batch[i] = i;
        auto analytic = lstm::batch_loss_and_gradient(p, t, batch).grads;
        const auto numeric = oracle::numeric_gradient(p, t, batch, kGradStep);
        const auto coords = oracle::coordinates(analytic);
        if (coords.size() != numeric.size()) return {false, "coordinate count mismatch"};
        for (std::size_t k = 0; k < coords.size(); ++k, ++coords_checked) {
            const double a = *coords[k], nu = numeric[k], err = std::abs(a - nu);
            if (!(err < kGradAbsTol || err / std::max(std::abs(a), std::abs(nu)) < kGradRelTol)) ++bad;
        }
    }
    const double sec = seconds_since(t0);
    return {bad == 0 && sec < kGradBudgetSec,
            fmt("%d configs, %zu coordinates, %zu outside tolerance, %.2f s", kGradConfigs, coords_checked, bad, sec)};
}

Outcome training_sanity() {
    const auto t = fixtures::sinusoid_tensor(2024, 12, 20, kRatioCount);
    lstm::TrainConfig cfg;
    cfg.hidden = 16, cfg.epochs = 60, cfg.batch_size = 4, cfg.learning_rate = 0.01, cfg.seed = 1;
    const auto res = lstm::train(t, cfg);
    const double first = res.loss_history.front(), last = res.loss_history.back();

    cfg.learning_rate = 0.0, cfg.epochs = 10;
    const auto control = lstm::train(t, cfg);
    bool constant = true;
    for (double l : control.loss_history) constant = constant && l == control.loss_history.front();
    return {last < kTrainRatio * first && constant,
            fmt("first %.5g, final %.5g (ratio %.3f); lr=0 history %s", first, last, last / first,
                constant ? "constant" : "varies")};
}

Outcome kmeans_inertia() {
    std::size_t runs = 0, violations = 0;
    for (int seed = 0; seed < kInertiaSeeds; ++seed) {
        const auto s = static_cast<std::uint64_t>(seed);
        Rng rng(s, "encoder");
        const auto sinus = lstm::encode(lstm::init_params(8, kRatioCount, rng), fixtures::sinusoid_tensor(300 + s));
        const std::vector<std::pair<LatentSeries, std::size_t>> corpus{
            {fixtures::random_walks(100 + s, 15, 12), 4},
            {fixtures::planted_clusters(200 + s).latent, 4},
            {sinus, 3},
        };
        for (const auto& [latent, m] : corpus) {
            const auto r = kmeans_dtw(latent, {.m = m, .seed = s});
            const auto& h = r.assignment.inertia_history;
            for (std::size_t k = 1; k < h.size(); ++k)
                if (h[k] > h[k - 1]) ++violations;
            ++runs;
        }
    }
    return {violations == 0, fmt("%zu runs, %zu violations", runs, violations)};
}

Outcome hierarchical_oracle() {
    Rng rng(1005);
    int bad = 0, tie_cases = 0;
    for (int trial = 0; trial < kLinkageMatrices; ++trial) {
        const std::size_t n = 2 + rng.below(kLinkageMaxN - 1);
        const bool ties = trial % 2 == 0;
        DistanceMatrix m{fixtures::names(n), std::vector<double>(n * n, 0.0), std::nullopt, true};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                m(i, j) = m(j, i) = ties ? static_cast<double>(1 + rng.below(3)) : rng.uniform(0.1, 10.0);
        tie_cases += ties;
        const auto d = hierarchical_complete(m);
        const auto ref = oracle::complete_linkage_brute_force(m);
        bool same = d.merges.size() == ref.size();
        for (std::size_t k = 0; same && k < ref.size(); ++k)
            same = d.merges[k].left == ref[k].left && d.merges[k].right == ref[k].right &&
                   d.merges[k].height == ref[k].height && d.merges[k].size == ref[k].size;
        bad += !same;
    }
    return {bad == 0, fmt("%d matrices (%d with ties), %d differ", kLinkageMatrices, tie_cases, bad)};
}

Outcome eval_oracle() {
    Rng rng(1006);
    int instances = 0;
    double worst_s = 0.0, worst_d = 0.0;
    for (std::size_t n = 2; n <= kEvalMaxN; ++n) {
        for (int rep = 0; rep < 30; ++rep) {
            const auto seed = static_cast<std::uint64_t>(n * 100 + static_cast<std::size_t>(rep));
            const auto l = fixtures::random_walks(seed, n, 1 + rng.below(12));
            const auto mat = pairwise_matrix(l, rep % 2 == 0);
            const std::size_t m = 2 + rng.below(n - 1);
            const auto labels = random_labels(rng, n, m);
            worst_s = std::max(worst_s, std::abs(silhouette_mean(mat, labels) - oracle::silhouette(mat, labels)));
            const auto centers = assignment_centers(l, labels, m, 10);
            worst_d = std::max(worst_d,
                               std::abs(elbow_distortion(l, labels, centers) - oracle::distortion(l, labels, centers)));
            ++instances;
        }
    }
    return {worst_s <= kEvalTol && worst_d <= kEvalTol,
            fmt("%d instances, max silhouette error %.3g, max distortion error %.3g", instances, worst_s, worst_d)};
}

Outcome planted_recovery() {
    int km_ok = 0, hc_ok = 0, km_peak = 0, hc_peak = 0;
    const std::vector<std::size_t> range{2, 3, 4, 5, 6, 7, 8};
    for (int trial = 0; trial < kPlantedTrials; ++trial) {
        const auto seed = static_cast<std::uint64_t>(500 + trial);
        const auto p = fixtures::planted_clusters(seed);
        const auto mat = pairwise_matrix(p.latent);
        const auto km = kmeans_dtw(p.latent, {.m = 4, .seed = seed});
        const auto hc = cut_dendrogram(hierarchical_complete(mat), 4);
        km_ok += adjusted_rand_index(km.assignment.labels, p.truth) >= kPlantedMinAri;
        hc_ok += adjusted_rand_index(hc.labels, p.truth) >= kPlantedMinAri;
        for (auto method : {ClusterMethod::kmeans_dtw, ClusterMethod::hierarchical_complete}) {
            const auto c = validation_sweep(p.latent, mat, range, method, {.seed = seed});
            const auto best = std::max_element(c.silhouette.begin(), c.silhouette.end()) - c.silhouette.begin();
            const bool at4 = c.ms[static_cast<std::size_t>(best)] == 4;
            (method == ClusterMethod::kmeans_dtw ? km_peak : hc_peak) += at4;
        }
    }
    const bool pass = km_ok >= kPlantedNeeded && hc_ok >= kPlantedNeeded && km_peak >= kPlantedNeeded &&
                      hc_peak >= kPlantedNeeded;
    return {pass, fmt("ARI>=%.1f kmeans %d/%d, hierarchical %d/%d; silhouette argmax=4 kmeans %d/%d, hierarchical %d/%d",
                      kPlantedMinAri, km_ok, kPlantedTrials, hc_ok, kPlantedTrials, km_peak, kPlantedTrials, hc_peak,
                      kPlantedTrials)};
}

Outcome ratio_identities() {
    Rng rng(1008);
    std::size_t closure_bad = 0, combined_bad = 0, accounting_bad = 0, cells = 0;
    for (int k = 0; k < kRatioPanels; ++k) {
        const auto p = fixtures::random_panel(rng, 1 + rng.below(12), 1 + rng.below(12));
        const auto t = compute_ratios(p);
        for (std::size_t j = 0; j < t.num_periods(); ++j) {
            double share = 0.0, premium = 0.0;
            for (std::size_t i = 0; i < t.num_companies(); ++i, ++cells) {
                share += t.at(i, j, Ratio::market_share);
                premium += p.value(i, j, RawField::gross_premium_income);
                if (t.at(i, j, Ratio::combined_ratio) != t.at(i, j, Ratio::loss_ratio) + t.at(i, j, Ratio::expense_ratio))
                    ++combined_bad;
                if (p.value(i, j, RawField::gross_premium_income) > 0 &&
                    !(std::abs(t.at(i, j, Ratio::expense_ratio) + t.at(i, j, Ratio::loss_ratio) +
                               t.at(i, j, Ratio::underwriting_profit_ratio) - 100.0) <= kRatioTol))
                    ++accounting_bad;
            }
            if (premium > 0 && !(std::abs(share - 100.0) <= kRatioTol)) ++closure_bad;
        }
    }
    return {closure_bad + combined_bad + accounting_bad == 0,
            fmt("%d panels, %zu cells; closure %zu, combined %zu, accounting %zu failures", kRatioPanels, cells,
                closure_bad, combined_bad, accounting_bad)};
}

PipelineConfig bundled_config(const fs::path& ws, const fs::path& panel) {
    auto entries = read_config_file(fs::path(INSURTREND_SOURCE_DIR) / "data" / "synthetic.ini");
    entries["general.workspace"] = ws.string();
    if (!panel.empty()) entries["ingest.input"] = panel.string();
    return build_config(entries);
}

std::map<std::string, std::string> numeric_artifacts(const fs::path& ws) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(ws))
        if (e.is_regular_file() && e.path().filename() != "manifest.json")
            out[fs::relative(e.path(), ws).string()] = read_text_file(e.path());
    return out;
}

fs::path scratch(const char* name) {
    const auto p = fs::temp_directory_path() / (std::string("insurtrend_acceptance_") + name);
    fs::remove_all(p);
    return p;
}

Outcome determinism() {
    const auto a = scratch("a"), b = scratch("b");
    run_all(bundled_config(a, {}));
    run_all(bundled_config(b, {}));
    const auto x = numeric_artifacts(a), y = numeric_artifacts(b);
    std::size_t differ = x.size() == y.size() ? 0 : 1;
    for (const auto& [name, bytes] : x) {
        const auto it = y.find(name);
        if (it == y.end() || it->second != bytes) ++differ;
    }
    fs::remove_all(a), fs::remove_all(b);
    return {differ == 0, fmt("%zu artifacts compared, %zu differ", x.size(), differ)};
}

Outcome reproduction(const fs::path& panel) {
    const auto ws = scratch("reproduction");
    run_all(bundled_config(ws, panel));
    const auto d = distance_matrix_from_table(read_table(ws / "distances/distances.csv"));
    const Table v = read_table(ws / "evaluate/validation.csv");
    const auto summary = nlohmann::json::parse(read_text_file(ws / "report/summary.json"));
    std::set<std::pair<std::string, std::size_t>> swept;
    for (std::size_t r = 0; r < v.rows.size(); ++r)
        swept.insert({v.rows[r][v.column("method")], static_cast<std::size_t>(v.number(r, v.column("m")))});
    bool full_sweep = true;
    for (const char* m : {"kmeans_dtw", "hierarchical_complete"})
        for (std::size_t k = 2; k <= 12; ++k) full_sweep = full_sweep && swept.count({m, k});
    const std::size_t j = summary.at("periods");
    const auto& s4 = summary.at("silhouette_at_4");
    const bool shape = d.size() == 28 && j == 41 && summary.at("features") == 7;
    fs::remove_all(ws);
    return {shape && full_sweep,
            fmt("%s panel %zux%zu, sweep 2..12 %s; silhouette at m=4 kmeans %.3f, hierarchical %.3f, reference %.2f",
                panel.empty() ? "synthetic" : "supplied", d.size(), j, full_sweep ? "complete" : "incomplete",
                s4.at("kmeans_dtw").get<double>(), s4.at("hierarchical_complete").get<double>(),
                summary.at("reference_silhouette_at_4").get<double>())};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path panel = argc > 1 ? fs::path(argv[1]) : fs::path();
    struct Criterion {
        const char* name;
        bool gating;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"dtw_oracle", true, dtw_oracle},
        {"lstm_gradients", true, lstm_gradients},
        {"training_sanity", true, training_sanity},
        {"kmeans_inertia", true, kmeans_inertia},
        {"hierarchical_oracle", true, hierarchical_oracle},
        {"silhouette_distortion_oracle", true, eval_oracle},
        {"planted_recovery", true, planted_recovery},
        {"ratio_identities", true, ratio_identities},
        {"determinism", true, determinism},
        {"reproduction", false, [&] { return reproduction(panel); }},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s %s%s: %s\n", o.pass ? "PASS" : "FAIL", c.name, c.gating ? "" : " (non-gating)",
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass && c.gating) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
