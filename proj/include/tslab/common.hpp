// common.hpp — shared aliases, seeded RNG streams, forward-pass counters.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tslab {

// Samples are stored as matrix columns: a batch of B points in R^d is a
// d x B matrix. CSV output transposes back to one row per sample.
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
}

// log(1 + e^x) without overflow for large |x|.
inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// One named deterministic RNG stream. Streams are derived from a global
// seed plus the stream name, so enabling one consumer (e.g. the adaptive
// sampler) never perturbs the draws seen by another.
class RngStream {
public:
    RngStream() : engine_(0) {}
    RngStream(uint64_t global_seed, std::string_view name)
        : engine_(global_seed ^ fnv1a(name)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }  // (0,1)
    double gamma(double shape) {
        std::gamma_distribution<double> g(shape, 1.0);
        return g(engine_);
    }
    // inclusive bounds
    int uniform_int(int lo, int hi) {
        std::uniform_int_distribution<int> d(lo, hi);
        return d(engine_);
    }

    Mat normal_mat(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }
    Vec normal_vec(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
        return v;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{
        std::numeric_limits<double>::min(), 1.0};
};

// Instrumented forward-pass accounting. Probe evaluations (single-sample
// objective sweeps) are counted in sample units; training-batch
// evaluations are counted in whole batch passes.
struct ForwardCounter {
    uint64_t probe_sample_passes = 0;
    uint64_t batch_passes = 0;

    void reset() { probe_sample_passes = 0; batch_passes = 0; }
};

}  // namespace tslab
