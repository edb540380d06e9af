#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "tslab/samplers.hpp"

using namespace tslab;
using Catch::Approx;

TEST_CASE("uniform timestep draws") {
    RngStream one(1, "u");
    for (int i = 0; i < 50; ++i) CHECK(uniform_sample(1, one) == 1);

    // chi-square uniformity, T = 10, alpha = 0.01
    RngStream rng(2, "u");
    const int n = 100000, T = 10;
    std::vector<long> counts(T, 0);
    for (int i = 0; i < n; ++i) ++counts[size_t(uniform_sample(T, rng) - 1)];
    std::vector<double> expected(T, double(n) / T);
    CHECK(oracle::chi2_statistic(counts, expected) < oracle::chi2_crit99(9));

    // seeded reproducibility
    RngStream a(3, "u"), b(3, "u");
    for (int i = 0; i < 100; ++i) CHECK(uniform_sample(1000, a) == uniform_sample(1000, b));
}

TEST_CASE("min-snr weights") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    WeightTable w = weights_min_snr(s, 5.0);
    CHECK(w.at(1) == Approx(5.0 / 9999.0).epsilon(1e-10));
    CHECK(w.at(1) == Approx(5.0005e-4).epsilon(1e-4));
    for (int t = 1; t <= 1000; ++t) {
        if (snr_at(s, t) <= 5.0) CHECK(w.at(t) == 1.0);
        if (t > 1 && snr_at(s, t) > 5.0) CHECK(w.at(t) >= w.at(t - 1));
    }
}

TEST_CASE("p2 weights") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    WeightTable flat = weights_p2(s, 1.0, 0.0);
    for (int t = 1; t <= 1000; ++t) CHECK(flat.at(t) == 1.0);

    WeightTable w = weights_p2(s, 1.0, 1.0);
    CHECK(w.at(1) == Approx(1e-4).epsilon(1e-10));
    for (int t = 2; t <= 1000; ++t) CHECK(w.at(t) > w.at(t - 1));
}

TEST_CASE("weight table normalization") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear, 1000, 1e-4, 0.02);
    WeightTable uni;
    uni.w.assign(8, 3.0);
    WeightTable p = weights_to_probs(uni);
    for (int t = 1; t <= 8; ++t) CHECK(p.at(t) == Approx(0.125).epsilon(1e-14));

    WeightTable hot;
    hot.w.assign(8, 0.0);
    hot.w[4] = 2.0;
    WeightTable ph = weights_to_probs(hot);
    CHECK(ph.at(5) == 1.0);

    WeightTable msn = weights_to_probs(weights_min_snr(s, 5.0));
    double total = std::accumulate(msn.w.begin(), msn.w.end(), 0.0);
    CHECK(total == Approx(1.0).margin(1e-12));

    // probability ratios preserve weight ratios
    RngStream rng(4, "w");
    WeightTable rnd;
    for (int i = 0; i < 16; ++i) rnd.w.push_back(rng.uniform() + 0.1);
    WeightTable pr = weights_to_probs(rnd);
    for (int i = 1; i <= 16; ++i)
        for (int j = 1; j <= 16; ++j)
            CHECK(pr.at(i) / pr.at(j) == Approx(rnd.at(i) / rnd.at(j)).epsilon(1e-12));

    WeightTable zero;
    zero.w.assign(4, 0.0);
    CHECK_THROWS_AS(weights_to_probs(zero), std::invalid_argument);
}

TEST_CASE("categorical sampling") {
    WeightTable hot;
    hot.w.assign(10, 0.0);
    hot.w[6] = 1.0;
    WeightTable p = weights_to_probs(hot);
    RngStream rng(5, "c");
    for (int i = 0; i < 100; ++i) CHECK(sample_categorical(p, rng) == 7);

    // uniform table matches the uniform sampler's distribution
    WeightTable uni;
    uni.w.assign(10, 1.0);
    WeightTable pu = weights_to_probs(uni);
    RngStream r2(6, "c");
    const int n = 100000;
    std::vector<long> counts(10, 0);
    for (int i = 0; i < n; ++i) ++counts[size_t(sample_categorical(pu, r2) - 1)];
    std::vector<double> expected(10, double(n) / 10);
    CHECK(oracle::chi2_statistic(counts, expected) < oracle::chi2_crit99(9));

    RngStream a(7, "c"), b(7, "c");
    for (int i = 0; i < 100; ++i)
        CHECK(sample_categorical(pu, a) == sample_categorical(pu, b));

    WeightTable raw;
    raw.w.assign(10, 0.1);
    CHECK_THROWS_AS(sample_categorical(raw, rng), std::invalid_argument);
}

TEST_CASE("log-normal sigmoid sampler") {
    RngStream rng(8, "ln");
    CHECK(sample_lognormal_sigmoid(1000, 0.0, 1.0, rng, 0.0) == 501);

    // median lands at t <= 501 with probability ~ 1/2
    const int n = 100000;
    long below = 0;
    for (int i = 0; i < n; ++i)
        if (sample_lognormal_sigmoid(1000, 0.0, 1.0, rng) <= 501) ++below;
    double se = std::sqrt(0.25 / n);
    CHECK(std::fabs(double(below) / n - 0.5) < 3.0 * se);

    // symmetry under mu = 0: t and T + 1 - t have the same distribution
    const int bins = 10, T = 1000;
    std::vector<long> h1(bins, 0), h2(bins, 0);
    RngStream r1(9, "ln"), r2(10, "ln");
    for (int i = 0; i < n; ++i) {
        int t = sample_lognormal_sigmoid(T, 0.0, 1.0, r1);
        int tr = T + 1 - sample_lognormal_sigmoid(T, 0.0, 1.0, r2);
        ++h1[size_t((t - 1) * bins / T)];
        ++h2[size_t((tr - 1) * bins / T)];
    }
    // two-sample chi-square homogeneity across bins
    double stat = 0.0;
    for (int i = 0; i < bins; ++i) {
        double tot = double(h1[size_t(i)] + h2[size_t(i)]);
        if (tot == 0) continue;
        double e = tot / 2.0;
        stat += (h1[size_t(i)] - e) * (h1[size_t(i)] - e) / e +
                (h2[size_t(i)] - e) * (h2[size_t(i)] - e) / e;
    }
    CHECK(stat < oracle::chi2_crit99(9));

    CHECK_THROWS_AS(sample_lognormal_sigmoid(1000, 0.0, 0.0, rng), std::invalid_argument);
}

TEST_CASE("every baseline stays inside 1..T") {
    NoiseSchedule s = build_schedule(ScheduleKind::linear, 37, 1e-3, 0.05);
    RngStream rng(11, "rb");
    WeightTable msn = weights_to_probs(weights_min_snr(s, 5.0));
    WeightTable p2 = weights_to_probs(weights_p2(s, 1.0, 1.0));
    for (int i = 0; i < 20000; ++i) {
        int a = uniform_sample(37, rng);
        int b = sample_categorical(msn, rng);
        int c = sample_categorical(p2, rng);
        int d = sample_lognormal_sigmoid(37, 0.0, 2.5, rng);
        for (int t : {a, b, c, d}) {
            CHECK(t >= 1);
            CHECK(t <= 37);
        }
    }
}
