// schedule.hpp — discrete-time noise schedules and derived constant tables.
//
// Index convention: timesteps are 1..T at every public surface; t = 0 is
// clean data. Tables are stored zero-based, accessors subtract one.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslab/common.hpp"

namespace tslab {

enum class ScheduleKind { linear, cosine, quadratic };

// Reverse-process variance: sigma_t^2 = beta_t ("fixed large") or the
// forward-posterior variance beta_tilde_t (with sigma_1^2 := beta_1,
// where the posterior is degenerate).
enum class Sigma2Mode { fixed_large, posterior };

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    if (s == "quadratic") return ScheduleKind::quadratic;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

inline std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::linear: return "linear";
        case ScheduleKind::cosine: return "cosine";
        case ScheduleKind::quadratic: return "quadratic";
    }
    return "?";
}

struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::linear;
    int T = 0;
    Sigma2Mode sigma2_mode = Sigma2Mode::fixed_large;
    std::vector<double> beta;       // beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{s<=t} alpha_s
    std::vector<double> sigma2;     // reverse variance
    std::vector<double> c;          // beta^2 / (2 sigma^2 alpha (1 - alpha_bar))
    std::vector<double> snr;        // alpha_bar / (1 - alpha_bar)
    int clipped_steps = 0;          // cosine betas clipped to 0.999

    double beta_at(int t) const { return beta[check(t) - 1]; }
    double alpha_at(int t) const { return alpha[check(t) - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[check(t) - 1]; }
    // alpha_bar at t-1 with the alpha_bar_0 = 1 convention.
    double alpha_bar_prev(int t) const {
        check(t);
        return t >= 2 ? alpha_bar[t - 2] : 1.0;
    }
    double sigma2_at(int t) const { return sigma2[check(t) - 1]; }

    // Forward-posterior variance beta_tilde_t = beta_t (1-abar_{t-1}) / (1-abar_t).
    double beta_tilde(int t) const {
        check(t);
        return beta_at(t) * (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar_at(t));
    }

    int check(int t) const {
        if (t < 1 || t > T)
            throw std::out_of_range("timestep " + std::to_string(t) +
                                    " outside 1.." + std::to_string(T));
        return t;
    }
};

inline NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_start,
                                    double beta_end,
                                    Sigma2Mode sigma2_mode = Sigma2Mode::fixed_large) {
    if (T < 2) throw std::invalid_argument("schedule: T must be >= 2");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.kind = kind;
    s.T = T;
    s.sigma2_mode = sigma2_mode;
    s.beta.resize(T);

    switch (kind) {
        case ScheduleKind::linear: {
            for (int i = 0; i < T; ++i)
                s.beta[i] = beta_start + double(i) / (T - 1) * (beta_end - beta_start);
            break;
        }
        case ScheduleKind::quadratic: {
            const double r0 = std::sqrt(beta_start), r1 = std::sqrt(beta_end);
            for (int i = 0; i < T; ++i) {
                double r = r0 + double(i) / (T - 1) * (r1 - r0);
                s.beta[i] = r * r;
            }
            break;
        }
        case ScheduleKind::cosine: {
            // abar_t = f(t)/f(0), f(t) = cos^2(((t/T + off)/(1 + off)) * pi/2),
            // betas from consecutive abar ratios, clipped at 0.999.
            const double off = 0.008;
            auto f = [&](double t) {
                double u = (t / T + off) / (1.0 + off) * (kPi / 2.0);
                double ct = std::cos(u);
                return ct * ct;
            };
            const double f0 = f(0.0);
            double prev = 1.0;
            for (int i = 0; i < T; ++i) {
                double abar = f(double(i + 1)) / f0;
                double b = 1.0 - abar / prev;
                if (b > 0.999) {
                    b = 0.999;
                    ++s.clipped_steps;
                }
                s.beta[i] = b;
                prev *= 1.0 - b;  // keep the reconstruction identity exact
            }
            break;
        }
    }

    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.snr.resize(T);
    double abar = 1.0;
    for (int i = 0; i < T; ++i) {
        if (!(s.beta[i] > 0.0 && s.beta[i] < 1.0))
            throw std::invalid_argument("schedule: beta outside (0,1) at t=" +
                                        std::to_string(i + 1));
        s.alpha[i] = 1.0 - s.beta[i];
        abar *= s.alpha[i];
        s.alpha_bar[i] = abar;
        s.snr[i] = abar / (1.0 - abar);
    }

    s.sigma2.resize(T);
    for (int i = 0; i < T; ++i) {
        int t = i + 1;
        s.sigma2[i] = sigma2_mode == Sigma2Mode::fixed_large
                          ? s.beta[i]
                          : (t == 1 ? s.beta[0] : s.beta_tilde(t));
    }

    s.c.resize(T);
    for (int i = 0; i < T; ++i) {
        double one_m_abar = 1.0 - s.alpha_bar[i];
        s.c[i] = s.beta[i] * s.beta[i] /
                 (2.0 * s.sigma2[i] * s.alpha[i] * one_m_abar);
    }
    return s;
}

// VLB weight c_t of the per-timestep epsilon-MSE objective.
inline double vlb_weight(const NoiseSchedule& s, int t) { return s.c[s.check(t) - 1]; }

inline double snr_at(const NoiseSchedule& s, int t) { return s.snr[s.check(t) - 1]; }

}  // namespace tslab
