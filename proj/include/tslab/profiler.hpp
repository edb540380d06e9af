// profiler.hpp — diagnostic measurements: per-timestep gradient variance
// and loss profiles, the restricted-training interdependence experiment,
// the variance-proportional sampling table, and the update-cost model.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/diffusion.hpp"
#include "tslab/samplers.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

// Trace-of-covariance estimator of per-sample gradient variance at one
// timestep: (1/(n-1)) sum_i ||g_i - gbar||^2 over n fresh (x0, eps) pairs.
inline double grad_variance_at(const PredictorNet& net, const NoiseSchedule& s,
                               const Mat& data, int t, int n, RngStream& rng,
                               bool weighted = false) {
    if (n < 2) throw std::invalid_argument("grad_variance_at: need n >= 2");
    Mat x0(data.rows(), n), eps(data.rows(), n);
    for (int j = 0; j < n; ++j) {
        x0.col(j) = data.col(rng.uniform_int(0, int(data.cols()) - 1));
        eps.col(j) = rng.normal_vec(data.rows());
    }
    std::vector<int> ts(size_t(n), t);
    Vec w;
    if (weighted) w = Vec::Constant(n, vlb_weight(s, t));
    NoisedBatch nb = forward_noise(s, x0, ts, eps);
    PerSampleGradStats st = per_sample_grad_stats(net, nb.xt, eps, ts, w);
    // sum_i ||g_i - gbar||^2 = sum_i ||g_i||^2 - ||sum_i g_i||^2 / n
    double ss = st.sq_norms.sum() - st.sum.squared_norm() / double(n);
    return std::max(0.0, ss) / double(n - 1);
}

struct VarianceProfile {
    std::vector<int> t_grid;
    std::vector<double> grad_var;
    std::vector<double> loss;
    int epoch = 0;
    bool weighted = false;
};

inline std::vector<int> even_timestep_grid(int T, int points) {
    if (points < 1) throw std::invalid_argument("even_timestep_grid: need >= 1 point");
    std::vector<int> g;
    for (int i = 0; i < points; ++i) {
        int t = points == 1 ? 1
                            : 1 + int(std::lround(double(i) * (T - 1) / double(points - 1)));
        if (g.empty() || g.back() != t) g.push_back(t);
    }
    return g;
}

inline VarianceProfile variance_profile(const PredictorNet& net, const NoiseSchedule& s,
                                        const Mat& data, const std::vector<int>& t_grid,
                                        int n, RngStream& rng, bool weighted = false,
                                        int epoch = 0) {
    VarianceProfile p;
    p.t_grid = t_grid;
    p.epoch = epoch;
    p.weighted = weighted;
    for (int t : t_grid) {
        p.grad_var.push_back(grad_variance_at(net, s, data, t, n, rng, weighted));
        Mat x0(data.rows(), n), eps(data.rows(), n);
        for (int j = 0; j < n; ++j) {
            x0.col(j) = data.col(rng.uniform_int(0, int(data.cols()) - 1));
            eps.col(j) = rng.normal_vec(data.rows());
        }
        p.loss.push_back(per_timestep_loss(net, s, x0, eps, t, weighted));
    }
    return p;
}

inline void write_variance_csv(const VarianceProfile& p, const std::string& path,
                               bool append = false) {
    std::ofstream f(path, append ? std::ios::app : std::ios::out);
    if (!f) throw std::runtime_error("cannot open " + path);
    if (!append) f << "epoch,t,grad_var,loss,weighted_flag\n";
    for (size_t i = 0; i < p.t_grid.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%d\n", p.epoch, p.t_grid[i],
                      p.grad_var[i], p.loss[i], p.weighted ? 1 : 0);
        f << buf;
    }
}

struct InterdependenceResult {
    std::vector<double> loss_before;  // per t, unweighted, frozen probe noise
    std::vector<double> loss_after;
    std::vector<double> delta;        // after - before
};

// Train `steps` further iterations with t restricted to [t_lo, t_hi) and
// report the paired-noise per-timestep loss change on a frozen probe set.
inline InterdependenceResult interdependence_experiment(
    PredictorNet net, AdamState adam, const NoiseSchedule& s, const Mat& data,
    int t_lo, int t_hi, long steps, int batch, double clip_norm, int probe_count,
    RngStream& train_rng, RngStream& probe_rng) {
    if (!(t_lo >= 1 && t_lo < t_hi && t_hi <= s.T + 1))
        throw std::invalid_argument("interdependence: bad timestep range");
    Mat probes(data.rows(), probe_count);
    for (int j = 0; j < probe_count; ++j)
        probes.col(j) = data.col(probe_rng.uniform_int(0, int(data.cols()) - 1));
    std::vector<Mat> probe_noise;
    probe_noise.reserve(size_t(s.T));
    for (int t = 0; t < s.T; ++t)
        probe_noise.push_back(probe_rng.normal_mat(data.rows(), probe_count));

    auto sweep_losses = [&](const PredictorNet& model) {
        std::vector<double> out(static_cast<size_t>(s.T));
        for (int t = 1; t <= s.T; ++t)
            out[size_t(t - 1)] =
                per_timestep_loss(model, s, probes, probe_noise[size_t(t - 1)], t, false);
        return out;
    };

    InterdependenceResult res;
    res.loss_before = sweep_losses(net);
    for (long k = 0; k < steps; ++k) {
        Mat x0(data.rows(), batch), eps(data.rows(), batch);
        std::vector<int> ts(static_cast<size_t>(batch));
        for (int j = 0; j < batch; ++j) {
            x0.col(j) = data.col(train_rng.uniform_int(0, int(data.cols()) - 1));
            eps.col(j) = train_rng.normal_vec(data.rows());
            ts[size_t(j)] = train_rng.uniform_int(t_lo, t_hi - 1);
        }
        auto [loss, grad] = loss_and_grad(net, s, x0, eps, ts);
        if (!std::isfinite(loss))
            throw std::runtime_error("interdependence: non-finite loss at step " +
                                     std::to_string(k));
        clip_grad_norm(grad, clip_norm);
        adam_step(net.mlp, grad, adam);
    }
    res.loss_after = sweep_losses(net);
    res.delta.resize(size_t(s.T));
    for (int i = 0; i < s.T; ++i) res.delta[size_t(i)] = res.loss_after[size_t(i)] - res.loss_before[size_t(i)];
    return res;
}

inline void write_interdependence_csv(const InterdependenceResult& r,
                                      const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "t,loss_before,loss_after,delta\n";
    for (size_t i = 0; i < r.delta.size(); ++i) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i + 1, r.loss_before[i],
                      r.loss_after[i], r.delta[i]);
        f << buf;
    }
}

// Sampling table proportional to gradient variance, extended from the
// probe grid to 1..T by left-step (piecewise constant) interpolation.
inline WeightTable variance_proportional_sampler(const VarianceProfile& p, int T) {
    if (p.t_grid.empty()) throw std::invalid_argument("variance sampler: empty profile");
    WeightTable raw;
    raw.w.resize(size_t(T));
    size_t g = 0;
    for (int t = 1; t <= T; ++t) {
        while (g + 1 < p.t_grid.size() && p.t_grid[g + 1] <= t) ++g;
        raw.w[size_t(t - 1)] = p.grad_var[g];
    }
    return weights_to_probs(raw);  // throws on all-zero variance
}

struct CostModel {
    int subset_size = 3;
    int batch = 128;
    int T = 1000;
    int f_s = 40;
};

struct CostModelResult {
    double delta_cost = 0.0;      // t_fwd units per sampler update
    double overhead_ratio = 0.0;  // adaptive iteration time / baseline
};

// Forward/backward accounting in units of one batch forward pass:
// iter = 4 t_fwd, delta approximation = 2|S| + 2T/|B|, amortized over f_s.
inline CostModelResult cost_model_eval(const CostModel& m) {
    if (m.subset_size < 1 || m.batch < 1 || m.T < 1 || m.f_s < 1)
        throw std::invalid_argument("cost_model_eval: all fields must be positive");
    CostModelResult r;
    r.delta_cost = 2.0 * m.subset_size + 2.0 * double(m.T) / double(m.batch);
    r.overhead_ratio = (4.0 + 1.0 + (r.delta_cost + 4.0) / double(m.f_s)) / 4.0;
    return r;
}

}  // namespace tslab
