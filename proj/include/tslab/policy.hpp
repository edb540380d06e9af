// policy.hpp — Beta-parameterized timestep policy and its likelihood-ratio
// (score-function) update with entropy regularization.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/mlp.hpp"
#include "tslab/special.hpp"

namespace tslab {

// Map a Beta draw u in (0,1) onto a discrete timestep 1..T.
inline int discretize(double u, int T) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("discretize: u outside (0,1)");
    int t = int(std::floor(u * T)) + 1;
    return t > T ? T : t;
}

struct PolicyParams {
    Mlp net;            // x0 -> 2 raw outputs
    double a_floor = 1e-4;
};

inline double softplus_inv(double y) {
    // inverse of log(1 + e^x); y > 0
    return y + std::log1p(-std::exp(-y));
}

// Final layer starts at zero weights with biases chosen so the initial
// policy is exactly Beta(1,1), i.e. uniform over timesteps.
inline PolicyParams init_policy(int data_dim, const std::vector<int>& hidden,
                                Activation act, double a_floor, RngStream& rng) {
    std::vector<int> dims;
    dims.push_back(data_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(2);
    PolicyParams phi;
    phi.a_floor = a_floor;
    phi.net = init_mlp(dims, act, rng);
    phi.net.layers.back().b.setConstant(softplus_inv(1.0 - a_floor));
    return phi;
}

// (a, b) = softplus(MLP(x0)) + a_floor.
inline std::pair<double, double> policy_forward(const PolicyParams& phi, const Vec& x0) {
    Mat raw = phi.net.forward(x0);
    double a = softplus(raw(0, 0)) + phi.a_floor;
    double b = softplus(raw(1, 0)) + phi.a_floor;
    if (!std::isfinite(a) || !std::isfinite(b))
        throw std::runtime_error("policy_forward: non-finite output");
    return {a, b};
}

inline double beta_log_density(double u, double a, double b) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("beta_log_density: u outside (0,1)");
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("beta_log_density: a, b must be > 0");
    return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - log_beta(a, b);
}

inline double beta_entropy(double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("beta_entropy: a, b must be > 0");
    return log_beta(a, b) - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b) +
           (a + b - 2.0) * digamma(a + b);
}

struct TimestepDraw {
    double a = 0.0;
    double b = 0.0;
    double u = 0.0;
    int t = 0;
    double log_density = 0.0;
    bool clamped = false;
};

// u from Beta(a,b) via two Gamma draws; degenerate u is clamped into
// (1e-9, 1-1e-9) and flagged.
inline TimestepDraw draw_timestep(const PolicyParams& phi, const Vec& x0, int T,
                                  RngStream& rng) {
    TimestepDraw d;
    std::tie(d.a, d.b) = policy_forward(phi, x0);
    double ga = rng.gamma(d.a);
    double gb = rng.gamma(d.b);
    double u = ga / (ga + gb);
    constexpr double lo = 1e-9, hi = 1.0 - 1e-9;
    if (!(u > lo && u < hi) || !std::isfinite(u)) {
        u = std::isfinite(u) ? (u <= lo ? lo : hi) : 0.5;
        d.clamped = true;
    }
    d.u = u;
    d.t = discretize(u, T);
    d.log_density = beta_log_density(u, d.a, d.b);
    return d;
}

// Per-sample draws with one batched policy forward.
inline std::vector<TimestepDraw> draw_timesteps_batch(const PolicyParams& phi,
                                                      const Mat& x0s, int T,
                                                      RngStream& rng) {
    Mat raw = phi.net.forward(x0s);
    std::vector<TimestepDraw> draws(static_cast<size_t>(x0s.cols()));
    for (Eigen::Index j = 0; j < x0s.cols(); ++j) {
        TimestepDraw& d = draws[size_t(j)];
        d.a = softplus(raw(0, j)) + phi.a_floor;
        d.b = softplus(raw(1, j)) + phi.a_floor;
        if (!std::isfinite(d.a) || !std::isfinite(d.b))
            throw std::runtime_error("draw_timesteps_batch: non-finite policy output");
        double ga = rng.gamma(d.a);
        double gb = rng.gamma(d.b);
        double u = ga / (ga + gb);
        constexpr double lo = 1e-9, hi = 1.0 - 1e-9;
        if (!(u > lo && u < hi) || !std::isfinite(u)) {
            u = std::isfinite(u) ? (u <= lo ? lo : hi) : 0.5;
            d.clamped = true;
        }
        d.u = u;
        d.t = discretize(u, T);
        d.log_density = beta_log_density(u, d.a, d.b);
    }
    return draws;
}

// d log f(u; a, b) / d(a, b)
inline std::pair<double, double> beta_score(double u, double a, double b) {
    double common = digamma(a + b);
    return {std::log(u) - digamma(a) + common, std::log1p(-u) - digamma(b) + common};
}

// d H(a, b) / d(a, b)
inline std::pair<double, double> beta_entropy_grad(double a, double b) {
    double tail = (a + b - 2.0) * trigamma(a + b);
    return {-(a - 1.0) * trigamma(a) + tail, -(b - 1.0) * trigamma(b) + tail};
}

// Parameter gradient of  delta * log pi(u | x0) + ent_coef * H(a, b),
// chained through softplus into the MLP.
inline MlpGrad policy_objective_grad(const PolicyParams& phi, const Vec& x0,
                                     const TimestepDraw& d, double delta,
                                     double ent_coef) {
    Mlp::Cache cache;
    Mat raw = phi.net.forward(x0, &cache);
    auto [score_a, score_b] = beta_score(d.u, d.a, d.b);
    auto [ent_a, ent_b] = beta_entropy_grad(d.a, d.b);
    Mat d_raw(2, 1);
    d_raw(0, 0) = (delta * score_a + ent_coef * ent_a) * sigmoid(raw(0, 0));
    d_raw(1, 0) = (delta * score_b + ent_coef * ent_b) * sigmoid(raw(1, 0));
    return phi.net.backward(cache, d_raw);
}

struct PolicyUpdateResult {
    PolicyParams params;
    bool applied = false;
};

// One ascent step from a single on-policy draw. A non-finite gradient
// skips the update and leaves phi unchanged.
inline PolicyUpdateResult reinforce_update(const PolicyParams& phi, const Vec& x0,
                                           const TimestepDraw& draw, double delta_tilde,
                                           double ent_coef, double lr) {
    MlpGrad g = policy_objective_grad(phi, x0, draw, delta_tilde, ent_coef);
    if (!g.all_finite()) return {phi, false};
    PolicyUpdateResult res{phi, true};
    for (size_t l = 0; l < g.layers.size(); ++l) {
        res.params.net.layers[l].W += lr * g.layers[l].W;
        res.params.net.layers[l].b += lr * g.layers[l].b;
    }
    return res;
}

// Windowed standardization of the raw objective drops before they reach
// the policy update; raw VLB drops change scale by orders of magnitude
// over a run. With fewer than two observations the output is 0 (the
// first update is entropy-only).
class RewardNormalizer {
public:
    explicit RewardNormalizer(size_t window = 100) : window_(window) {}

    double push(double x) {
        values_.push_back(x);
        if (values_.size() > window_) values_.erase(values_.begin());
        if (values_.size() < 2) return 0.0;
        double mean = 0.0;
        for (double v : values_) mean += v;
        mean /= double(values_.size());
        double var = 0.0;
        for (double v : values_) var += (v - mean) * (v - mean);
        var /= double(values_.size());
        return (x - mean) / (std::sqrt(var) + 1e-8);
    }

private:
    size_t window_;
    std::vector<double> values_;
};

// Ascent step on the batch-averaged objective gradient; one shared
// delta_tilde, per-sample draws.
inline PolicyUpdateResult reinforce_update_batch(const PolicyParams& phi, const Mat& x0s,
                                                 const std::vector<TimestepDraw>& draws,
                                                 double delta_tilde, double ent_coef,
                                                 double lr) {
    if (Eigen::Index(draws.size()) != x0s.cols())
        throw std::invalid_argument("reinforce_update_batch: one draw per sample required");
    MlpGrad acc = phi.net.zero_grad();
    for (Eigen::Index j = 0; j < x0s.cols(); ++j) {
        MlpGrad g = policy_objective_grad(phi, x0s.col(j), draws[size_t(j)], delta_tilde,
                                          ent_coef);
        acc.axpy(1.0 / double(x0s.cols()), g);
    }
    if (!acc.all_finite()) return {phi, false};
    PolicyUpdateResult res{phi, true};
    for (size_t l = 0; l < acc.layers.size(); ++l) {
        res.params.net.layers[l].W += lr * acc.layers[l].W;
        res.params.net.layers[l].b += lr * acc.layers[l].b;
    }
    return res;
}

}  // namespace tslab
