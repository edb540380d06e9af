// diffusion.hpp — forward noising, per-timestep losses, the Gaussian-KL
// VLB oracle, and ancestral sampling.
#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/predictor.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

struct NoisedBatch {
    Mat xt;
    Mat eps;
    std::vector<int> t;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, one t per column.
inline NoisedBatch forward_noise(const NoiseSchedule& s, const Mat& x0,
                                 const std::vector<int>& ts, const Mat& eps) {
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
        throw std::invalid_argument("forward_noise: eps shape mismatch");
    if (Eigen::Index(ts.size()) != x0.cols())
        throw std::invalid_argument("forward_noise: one timestep per sample required");
    NoisedBatch nb;
    nb.eps = eps;
    nb.t = ts;
    nb.xt.resize(x0.rows(), x0.cols());
    for (Eigen::Index j = 0; j < x0.cols(); ++j) {
        double abar = s.alpha_bar_at(ts[size_t(j)]);
        nb.xt.col(j) = std::sqrt(abar) * x0.col(j) + std::sqrt(1.0 - abar) * eps.col(j);
    }
    return nb;
}

// Mean over the batch of ||eps - eps_hat||^2 (norm sums over coordinates).
inline double eps_loss(const Mat& eps_hat, const Mat& eps) {
    if (eps_hat.rows() != eps.rows() || eps_hat.cols() != eps.cols())
        throw std::invalid_argument("eps_loss: shape mismatch");
    if (eps.cols() == 0) return 0.0;
    return (eps_hat - eps).colwise().squaredNorm().mean();
}

// Batch loss at one shared timestep, optionally c_t-weighted.
inline double per_timestep_loss(const PredictorNet& net, const NoiseSchedule& s,
                                const Mat& x0, const Mat& eps, int t, bool weighted) {
    std::vector<int> ts(size_t(x0.cols()), t);
    NoisedBatch nb = forward_noise(s, x0, ts, eps);
    double loss = eps_loss(predict_eps(net, nb.xt, ts), eps);
    return weighted ? vlb_weight(s, t) * loss : loss;
}

inline std::pair<double, MlpGrad> loss_and_grad(const PredictorNet& net,
                                                const NoiseSchedule& s, const Mat& x0,
                                                const Mat& eps, const std::vector<int>& ts,
                                                const Vec& weights = Vec()) {
    NoisedBatch nb = forward_noise(s, x0, ts, eps);
    return loss_and_grad_at_xt(net, nb.xt, eps, ts, weights);
}

inline std::vector<MlpGrad> per_sample_grads(const PredictorNet& net,
                                             const NoiseSchedule& s, const Mat& x0,
                                             const Mat& eps, const std::vector<int>& ts,
                                             const Vec& weights = Vec()) {
    NoisedBatch nb = forward_noise(s, x0, ts, eps);
    return per_sample_grads_at_xt(net, nb.xt, eps, ts, weights);
}

// Forward-posterior q(x_{t-1} | x_t, x0) for t >= 2.
inline std::pair<Vec, double> posterior_params(const NoiseSchedule& s, const Vec& x0,
                                               const Vec& xt, int t) {
    if (t < 2) throw std::out_of_range("posterior_params: t must be >= 2");
    s.check(t);
    const double abar_prev = s.alpha_bar_prev(t);
    const double one_m_abar = 1.0 - s.alpha_bar_at(t);
    Vec mean = (std::sqrt(abar_prev) * s.beta_at(t) * x0 +
                std::sqrt(s.alpha_at(t)) * (1.0 - abar_prev) * xt) /
               one_m_abar;
    return {std::move(mean), s.beta_tilde(t)};
}

// Reverse-process mean mu_theta = (x_t - beta_t/sqrt(1-abar_t) eps_hat) / sqrt(alpha_t).
inline Vec reverse_mean(const NoiseSchedule& s, const Vec& xt, const Vec& eps_hat, int t) {
    return (xt - s.beta_at(t) / std::sqrt(1.0 - s.alpha_bar_at(t)) * eps_hat) /
           std::sqrt(s.alpha_at(t));
}

struct VlbTerms {
    double mean_part = 0.0;  // squared mean gaps / (2 sigma^2)
    double var_part = 0.0;   // variance-mismatch constants
    double total() const { return mean_part + var_part; }
};

// Gaussian-KL form of the variational bound for one x0 with one supplied
// noise per timestep. The t = 1 term uses the degenerate posterior (mean
// x0, variance 0) and keeps only its squared-mean part.
inline VlbTerms vlb_direct_terms(const PredictorNet& net, const NoiseSchedule& s,
                                 const Vec& x0, const Mat& eps_per_t) {
    const int T = s.T;
    const Eigen::Index dim = x0.size();
    if (eps_per_t.rows() != dim || eps_per_t.cols() != T)
        throw std::invalid_argument("vlb_direct: need one noise column per timestep");

    Mat xts(dim, T);
    std::vector<int> ts(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) {
        double abar = s.alpha_bar_at(t);
        xts.col(t - 1) =
            std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps_per_t.col(t - 1);
        ts[size_t(t - 1)] = t;
    }
    Mat eps_hat = predict_eps(net, xts, ts);

    VlbTerms out;
    for (int t = 1; t <= T; ++t) {
        const double sig2 = s.sigma2_at(t);
        Vec mu_theta = reverse_mean(s, xts.col(t - 1), eps_hat.col(t - 1), t);
        if (t == 1) {
            out.mean_part += (x0 - mu_theta).squaredNorm() / (2.0 * sig2);
            continue;
        }
        auto [mu_q, var_q] = posterior_params(s, x0, xts.col(t - 1), t);
        double ratio = var_q / sig2;
        out.var_part += double(dim) * 0.5 * (ratio - 1.0 - std::log(ratio));
        out.mean_part += (mu_q - mu_theta).squaredNorm() / (2.0 * sig2);
    }
    return out;
}

inline double vlb_direct(const PredictorNet& net, const NoiseSchedule& s, const Vec& x0,
                         const Mat& eps_per_t) {
    return vlb_direct_terms(net, s, x0, eps_per_t).total();
}

// Ancestral generation: x_T ~ N(0, I), then x_{t-1} = mu_theta + sigma_t z
// with z = 0 at t = 1. `deterministic` zeroes all sampling noise.
inline Mat ancestral_sample(const PredictorNet& net, const NoiseSchedule& s, int n,
                            RngStream& rng, bool deterministic = false) {
    const int dim = net.data_dim();
    if (n <= 0) return Mat(dim, 0);
    Mat x = rng.normal_mat(dim, n);
    for (int t = s.T; t >= 1; --t) {
        std::vector<int> ts(size_t(n), t);
        Mat eps_hat = predict_eps(net, x, ts);
        for (int j = 0; j < n; ++j)
            x.col(j) = reverse_mean(s, x.col(j), eps_hat.col(j), t);
        if (t > 1 && !deterministic) {
            double sig = std::sqrt(s.sigma2_at(t));
            x += sig * rng.normal_mat(dim, n);
        }
    }
    return x;
}

}  // namespace tslab
