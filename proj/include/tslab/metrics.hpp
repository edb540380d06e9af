// metrics.hpp — run records, the tracked VLB probe, energy distance, CSV
// output.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/diffusion.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

// Shortest round-trippable representation; empty string for NaN so
// unset optional fields stay blank in CSV.
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Two-sample energy statistic 2 E||X-Y|| - E||X-X'|| - E||Y-Y'|| with
// all-pairs (V-statistic) sums.
inline double energy_distance(const Mat& gen, const Mat& ref) {
    if (gen.cols() == 0 || ref.cols() == 0)
        throw std::invalid_argument("energy_distance: empty sample set");
    if (gen.rows() != ref.rows())
        throw std::invalid_argument("energy_distance: dimension mismatch");
    auto mean_cross = [](const Mat& a, const Mat& b) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < a.cols(); ++i)
            for (Eigen::Index j = 0; j < b.cols(); ++j)
                s += (a.col(i) - b.col(j)).norm();
        return s / (double(a.cols()) * double(b.cols()));
    };
    return 2.0 * mean_cross(gen, ref) - mean_cross(gen, gen) - mean_cross(ref, ref);
}

// Fixed probe set plus one frozen noise per (probe, t) for paired VLB
// tracking across a training run.
struct VlbProbe {
    Mat x0s;                 // dim x P
    std::vector<Mat> noise;  // per t: dim x P
};

inline VlbProbe make_vlb_probe(const Mat& data, int probes, int T, RngStream& rng) {
    if (probes < 1 || data.cols() < 1) throw std::invalid_argument("make_vlb_probe: empty");
    VlbProbe p;
    p.x0s.resize(data.rows(), probes);
    for (int j = 0; j < probes; ++j)
        p.x0s.col(j) = data.col(rng.uniform_int(0, int(data.cols()) - 1));
    p.noise.reserve(size_t(T));
    for (int t = 0; t < T; ++t) p.noise.push_back(rng.normal_mat(data.rows(), probes));
    return p;
}

// Mean over probes of sum_t c_t ||eps - eps_hat||^2 on the frozen noises
// (the mean-dependent part of the variational bound).
inline double tracked_vlb(const PredictorNet& net, const NoiseSchedule& s,
                          const VlbProbe& probe) {
    const int P = int(probe.x0s.cols());
    double total = 0.0;
    for (int t = 1; t <= s.T; ++t) {
        const Mat& eps = probe.noise[size_t(t - 1)];
        double abar = s.alpha_bar_at(t);
        Mat xt = std::sqrt(abar) * probe.x0s + std::sqrt(1.0 - abar) * eps;
        std::vector<int> ts(size_t(P), t);
        Mat eps_hat = predict_eps(net, xt, ts);
        total += vlb_weight(s, t) * (eps_hat - eps).colwise().squaredNorm().mean();
    }
    return total;
}

struct IterRecord {
    long k = 0;
    double loss = 0.0;
    double t_mean = 0.0;
    // adaptive-sampler fields; NaN / empty when not applicable
    double a_mean = NAN;
    double b_mean = NAN;
    double entropy_mean = NAN;
    double delta_tilde = NAN;      // batch estimate used for the policy update (raw)
    double delta_tilde_std = NAN;  // standardized value fed to the update
    double delta_probe_subset = NAN;  // subset-mean of the probe sweep
    double delta_probe_full = NAN;    // full-sweep mean on the same probe
    std::vector<int> subset;          // selected S at update events
};

struct EvalRecord {
    long k = 0;
    double tracked_vlb = NAN;
    double energy_distance = NAN;
};

struct RunMetrics {
    std::vector<IterRecord> iters;
    std::vector<EvalRecord> evals;
    ForwardCounter counters;      // delta-estimation forward passes
    long sampler_updates = 0;
    long skipped_policy_updates = 0;
    double train_seconds = 0.0;   // iteration loop, eval excluded
    double eval_seconds = 0.0;
};

inline std::string subset_to_string(const std::vector<int>& s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(s[i]);
    }
    return out;
}

inline void write_metrics_csv(const RunMetrics& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "k,loss,t_mean,a_mean,b_mean,entropy_mean,delta_tilde,delta_tilde_std,"
         "delta_probe_subset,delta_probe_full,S\n";
    for (const auto& r : m.iters) {
        f << r.k << ',' << fmt_double(r.loss) << ',' << fmt_double(r.t_mean) << ','
          << fmt_double(r.a_mean) << ',' << fmt_double(r.b_mean) << ','
          << fmt_double(r.entropy_mean) << ',' << fmt_double(r.delta_tilde) << ','
          << fmt_double(r.delta_tilde_std) << ',' << fmt_double(r.delta_probe_subset)
          << ',' << fmt_double(r.delta_probe_full) << ',' << subset_to_string(r.subset)
          << '\n';
    }
}

inline void write_eval_csv(const RunMetrics& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << "k,tracked_vlb,energy_distance\n";
    for (const auto& r : m.evals)
        f << r.k << ',' << fmt_double(r.tracked_vlb) << ','
          << fmt_double(r.energy_distance) << '\n';
}

}  // namespace tslab
