// samplers.hpp — uniform, Min-SNR, P2 and log-normal timestep baselines.
// Weighting heuristics can run as loss multipliers or, converted to
// probabilities, as sampling distributions.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/policy.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

enum class WeightMode { loss_weight, sampling_prob };

struct WeightTable {
    std::vector<double> w;  // w[0] corresponds to t = 1
    WeightMode mode = WeightMode::loss_weight;
    std::vector<double> cdf;  // filled for sampling_prob tables

    int T() const { return int(w.size()); }
    double at(int t) const { return w[size_t(t - 1)]; }
};

inline int uniform_sample(int T, RngStream& rng) {
    if (T < 1) throw std::invalid_argument("uniform_sample: T must be >= 1");
    return rng.uniform_int(1, T);
}

// w_t = min(snr_t, gamma) / snr_t  (epsilon-prediction form).
inline WeightTable weights_min_snr(const NoiseSchedule& s, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("weights_min_snr: gamma must be > 0");
    WeightTable tab;
    tab.w.resize(size_t(s.T));
    for (int t = 1; t <= s.T; ++t) {
        double snr = snr_at(s, t);
        tab.w[size_t(t - 1)] = std::min(snr, gamma) / snr;
    }
    return tab;
}

// w_t = 1 / (k + snr_t)^gamma.
inline WeightTable weights_p2(const NoiseSchedule& s, double k, double gamma) {
    if (k < 0.0) throw std::invalid_argument("weights_p2: k must be >= 0");
    WeightTable tab;
    tab.w.resize(size_t(s.T));
    for (int t = 1; t <= s.T; ++t)
        tab.w[size_t(t - 1)] = 1.0 / std::pow(k + snr_at(s, t), gamma);
    return tab;
}

inline WeightTable weights_to_probs(const WeightTable& in) {
    double total = std::accumulate(in.w.begin(), in.w.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("weights_to_probs: all-zero table");
    WeightTable out;
    out.mode = WeightMode::sampling_prob;
    out.w.resize(in.w.size());
    out.cdf.resize(in.w.size());
    double acc = 0.0;
    for (size_t i = 0; i < in.w.size(); ++i) {
        if (in.w[i] < 0.0) throw std::invalid_argument("weights_to_probs: negative weight");
        out.w[i] = in.w[i] / total;
        acc += out.w[i];
        out.cdf[i] = acc;
    }
    out.cdf.back() = 1.0;
    return out;
}

// Inverse-CDF draw from a sampling_prob table.
inline int sample_categorical(const WeightTable& p, RngStream& rng) {
    if (p.mode != WeightMode::sampling_prob)
        throw std::invalid_argument("sample_categorical: table is not a distribution");
    double u = rng.uniform();
    auto it = std::lower_bound(p.cdf.begin(), p.cdf.end(), u);
    if (it == p.cdf.end()) --it;
    return int(it - p.cdf.begin()) + 1;
}

// z ~ N(mu, sigma^2), u = sigmoid(z), t = discretize(u, T). `forced_z`
// bypasses the draw (test hook).
inline int sample_lognormal_sigmoid(int T, double mu, double sigma, RngStream& rng,
                                    std::optional<double> forced_z = std::nullopt) {
    if (!(sigma > 0.0))
        throw std::invalid_argument("sample_lognormal_sigmoid: sigma must be > 0");
    double z = forced_z ? *forced_z : mu + sigma * rng.normal();
    return discretize(sigmoid(z), T);
}

}  // namespace tslab
