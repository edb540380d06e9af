// delta.hpp — objective-drop estimation around a theta update: the full
// per-timestep sweep, the sweep queue, F-statistic timestep selection and
// the subset approximation.
#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/diffusion.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

struct DeltaSweep {
    std::vector<double> deltas;  // deltas[0] corresponds to tau = 1
    double target = 0.0;         // mean of deltas
    long k = 0;                  // iteration the sweep was taken at
    long x0_id = -1;             // dataset row of the probe sample
};

struct DeltaQueue {
    explicit DeltaQueue(size_t capacity = 20) : capacity(capacity) {}
    size_t capacity;
    std::deque<DeltaSweep> entries;

    size_t size() const { return entries.size(); }
};

inline void push_sweep(DeltaQueue& q, DeltaSweep sweep) {
    q.entries.push_back(std::move(sweep));
    while (q.entries.size() > q.capacity) q.entries.pop_front();
}

// delta_tau = L_tau(theta_before) - L_tau(theta_after) on one probe x0,
// one fresh noise per tau shared by both parameter snapshots. Costs
// exactly 2T single-sample forward passes.
inline DeltaSweep full_delta_sweep(const PredictorNet& theta_before,
                                   const PredictorNet& theta_after,
                                   const NoiseSchedule& s, const Vec& x0,
                                   RngStream& rng, bool weighted = true,
                                   ForwardCounter* counter = nullptr) {
    const int T = s.T;
    const Eigen::Index dim = x0.size();
    Mat xts(dim, T);
    Mat eps(dim, T);
    std::vector<int> ts(static_cast<size_t>(T));
    for (int t = 1; t <= T; ++t) {
        eps.col(t - 1) = rng.normal_vec(dim);
        double abar = s.alpha_bar_at(t);
        xts.col(t - 1) =
            std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps.col(t - 1);
        ts[size_t(t - 1)] = t;
    }
    Mat eps_before = predict_eps(theta_before, xts, ts);
    Mat eps_after = predict_eps(theta_after, xts, ts);
    if (counter) counter->probe_sample_passes += 2 * uint64_t(T);

    DeltaSweep sweep;
    sweep.deltas.resize(size_t(T));
    double acc = 0.0;
    for (int t = 1; t <= T; ++t) {
        double w = weighted ? vlb_weight(s, t) : 1.0;
        double lb = w * (eps_before.col(t - 1) - eps.col(t - 1)).squaredNorm();
        double la = w * (eps_after.col(t - 1) - eps.col(t - 1)).squaredNorm();
        double d = lb - la;
        if (!std::isfinite(d))
            throw std::runtime_error("full_delta_sweep: non-finite loss at t=" +
                                     std::to_string(t));
        sweep.deltas[size_t(t - 1)] = d;
        acc += d;
    }
    sweep.target = acc / double(T);
    return sweep;
}

// Univariate regression F-score, F = r^2 (n-2) / (1 - r^2). Degenerate
// inputs (n < 3 or zero variance) score 0; a perfect fit returns +inf so
// it ranks first.
inline double f_statistic(const std::vector<double>& feature,
                          const std::vector<double>& target) {
    if (feature.size() != target.size())
        throw std::invalid_argument("f_statistic: length mismatch");
    const size_t n = feature.size();
    if (n < 3) return 0.0;
    double mf = std::accumulate(feature.begin(), feature.end(), 0.0) / double(n);
    double mt = std::accumulate(target.begin(), target.end(), 0.0) / double(n);
    double sff = 0.0, stt = 0.0, sft = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double df = feature[i] - mf, dt = target[i] - mt;
        sff += df * df;
        stt += dt * dt;
        sft += df * dt;
    }
    if (!(sff > 0.0) || !(stt > 0.0)) return 0.0;
    double r2 = (sft * sft) / (sff * stt);
    if (r2 > 1.0) r2 = 1.0;
    if (1.0 - r2 <= 1e-15) return std::numeric_limits<double>::infinity();
    return r2 * double(n - 2) / (1.0 - r2);
}

struct SelectedSubset {
    std::vector<int> S;           // chosen timesteps, ascending
    std::vector<double> f_scores; // per timestep, index 0 <-> tau = 1
};

// Top-`size` timesteps by F-score of their delta series against the
// sweep targets across the queue. Ties break toward smaller tau.
inline SelectedSubset select_timesteps(const DeltaQueue& q, int size) {
    if (q.size() < 2) throw std::invalid_argument("select_timesteps: queue holds < 2 sweeps");
    const int T = int(q.entries.front().deltas.size());
    if (size < 1 || size > T) throw std::invalid_argument("select_timesteps: bad subset size");

    const size_t n = q.size();
    std::vector<double> target(n);
    for (size_t i = 0; i < n; ++i) target[i] = q.entries[i].target;

    SelectedSubset out;
    out.f_scores.resize(size_t(T));
    std::vector<double> feature(n);
    for (int tau = 1; tau <= T; ++tau) {
        for (size_t i = 0; i < n; ++i) feature[i] = q.entries[i].deltas[size_t(tau - 1)];
        out.f_scores[size_t(tau - 1)] = f_statistic(feature, target);
    }

    std::vector<int> order(static_cast<size_t>(T));
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
        double fl = out.f_scores[size_t(lhs - 1)], fr = out.f_scores[size_t(rhs - 1)];
        if (fl != fr) return fl > fr;
        return lhs < rhs;
    });
    out.S.assign(order.begin(), order.begin() + size);
    std::sort(out.S.begin(), out.S.end());
    return out;
}

// Cold-start subset used while the queue holds fewer than two sweeps.
inline std::vector<int> quartile_subset(int T) {
    std::vector<int> s{std::max(1, T / 4), std::max(1, T / 2), std::max(1, 3 * T / 4)};
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

// Mean over tau in S of the paired-noise batch loss drop. Costs exactly
// 2|S| batch forward passes.
inline double approx_delta(const PredictorNet& theta_before, const PredictorNet& theta_after,
                           const NoiseSchedule& s, const Mat& batch,
                           const std::vector<int>& S, RngStream& rng,
                           bool weighted = true, ForwardCounter* counter = nullptr) {
    if (S.empty()) throw std::invalid_argument("approx_delta: empty subset");
    double acc = 0.0;
    for (int tau : S) {
        Mat eps = rng.normal_mat(batch.rows(), batch.cols());
        double lb = per_timestep_loss(theta_before, s, batch, eps, tau, weighted);
        double la = per_timestep_loss(theta_after, s, batch, eps, tau, weighted);
        if (counter) counter->batch_passes += 2;
        if (!std::isfinite(lb) || !std::isfinite(la))
            throw std::runtime_error("approx_delta: non-finite loss at tau=" +
                                     std::to_string(tau));
        acc += lb - la;
    }
    return acc / double(S.size());
}

// True once every f_s iterations, counting from k = 0.
inline bool cadence_gate(long k, int f_s) {
    if (f_s < 1) throw std::invalid_argument("cadence_gate: f_s must be >= 1");
    return k % f_s == 0;
}

}  // namespace tslab
