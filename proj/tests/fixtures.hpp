// Seeded synthetic inputs shared by the unit and acceptance suites.
#pragma once

#include "insurtrend/ingest.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/ratios.hpp"
#include "insurtrend/rng.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fixtures {

inline std::vector<insurtrend::QuarterId> quarters(std::size_t n, insurtrend::QuarterId start = {2013, 1}) {
    std::vector<insurtrend::QuarterId> out;
    for (std::size_t j = 0; j < n; ++j, start = start.next()) out.push_back(start);
    return out;
}

inline std::vector<std::string> names(std::size_t n, const char* prefix = "C") {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

/// Each company follows one sinusoid; every feature is a fixed loading of it
/// plus small noise, so one latent channel can explain most of the signal.
inline insurtrend::RatioTensor sinusoid_tensor(std::uint64_t seed, std::size_t n = 12, std::size_t jn = 20,
                                               std::size_t f = 7) {
    insurtrend::Rng rng(seed, "sinusoid-fixture");
    insurtrend::RatioTensor t(names(n), quarters(jn), f);
    std::vector<double> loading(f);
    for (auto& l : loading) l = rng.uniform(-1.5, 1.5);
    for (std::size_t i = 0; i < n; ++i) {
        const double freq = rng.uniform(0.2, 0.8), phase = rng.uniform(0.0, 6.28), amp = rng.uniform(0.8, 1.2);
        for (std::size_t j = 0; j < jn; ++j) {
            const double s = amp * std::sin(freq * static_cast<double>(j) + phase);
            for (std::size_t k = 0; k < f; ++k) t.at(i, j, k) = loading[k] * s + 0.05 * rng.normal();
        }
    }
    return t;
}

struct Planted {
    insurtrend::LatentSeries latent;
    std::vector<std::size_t> truth;
};

/// `k` clusters of noisy copies of a prototype series. Prototype levels are
/// `separation` apart; members deviate by i.i.d. noise with sd `spread`.
inline Planted planted_clusters(std::uint64_t seed, std::size_t k = 4, std::size_t per = 6, std::size_t jn = 20,
                                double separation = 8.0, double spread = 1.0) {
    insurtrend::Rng rng(seed, "planted-fixture");
    Planted p;
    p.latent.periods = quarters(jn);
    std::vector<std::vector<double>> protos;
    for (std::size_t c = 0; c < k; ++c) {
        const double level = separation * static_cast<double>(c);
        const double phase = rng.uniform(0.0, 6.28), freq = rng.uniform(0.2, 0.6);
        std::vector<double> s(jn);
        for (std::size_t j = 0; j < jn; ++j) s[j] = level + std::sin(freq * static_cast<double>(j) + phase);
        protos.push_back(std::move(s));
    }
    // Interleave members so cluster identity is not tied to company index.
    for (std::size_t r = 0; r < per; ++r)
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> s = protos[c];
            for (auto& v : s) v += spread * rng.normal();
            p.latent.companies.push_back("P" + std::to_string(p.latent.companies.size()));
            p.latent.z.push_back(std::move(s));
            p.truth.push_back(c);
        }
    return p;
}

/// Unstructured latent series (random walks).
inline insurtrend::LatentSeries random_walks(std::uint64_t seed, std::size_t n = 15, std::size_t jn = 16) {
    insurtrend::Rng rng(seed, "walk-fixture");
    insurtrend::LatentSeries l;
    l.companies = names(n, "W");
    l.periods = quarters(jn);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(jn);
        double x = rng.normal();
        for (auto& v : s) v = (x += 0.5 * rng.normal());
        l.z.push_back(std::move(s));
    }
    return l;
}

/// Random panel with realistic magnitudes; some cells missing, some zero premium.
inline insurtrend::CompanyPanel random_panel(insurtrend::Rng& rng, std::size_t n, std::size_t jn) {
    using insurtrend::RawField;
    insurtrend::CompanyPanel p(names(n), quarters(jn));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < jn; ++j) {
            if (rng.uniform() < 0.1) continue;
            const double gpi = rng.uniform() < 0.05 ? 0.0 : std::exp(rng.uniform(std::log(1e3), std::log(1e10)));
            p.set_observed(i, j, true);
            p.set_value(i, j, RawField::gross_premium_income, gpi);
            p.set_value(i, j, RawField::claims_paid, gpi * rng.uniform(0.0, 1.2));
            p.set_value(i, j, RawField::claims_incurred, rng.uniform() < 0.05 ? 0.0 : gpi * rng.uniform(-0.1, 1.5));
            p.set_value(i, j, RawField::underwriting_profit, gpi * rng.uniform(-0.5, 0.3));
            p.set_value(i, j, RawField::net_earned_premium, gpi * rng.uniform(0.8, 1.0));
        }
    return p;
}

}  // namespace fixtures
