// dataset.hpp — deterministic synthetic datasets, standardized per
// coordinate.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "tslab/common.hpp"

namespace tslab {

enum class DatasetKind { gauss_mix, swiss_roll, checkerboard, tiny_images };

inline DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "gauss_mix") return DatasetKind::gauss_mix;
    if (s == "swiss_roll") return DatasetKind::swiss_roll;
    if (s == "checkerboard") return DatasetKind::checkerboard;
    if (s == "tiny_images") return DatasetKind::tiny_images;
    throw std::invalid_argument("unknown dataset kind: " + s);
}

// In-place per-coordinate standardization to zero mean, unit variance.
inline void standardize(Mat& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mean = x.row(i).mean();
        double var = (x.row(i).array() - mean).square().mean();
        double sd = std::sqrt(var);
        if (sd > 0.0)
            x.row(i) = (x.row(i).array() - mean) / sd;
        else
            x.row(i).array() -= mean;
    }
}

// `modes` isotropic Gaussians with centers equally spaced on a circle of
// the given radius (a single mode sits at the origin).
inline Mat make_gauss_mix(int n, int modes, double radius, double noise_sd,
                          RngStream& rng, bool standardized = true) {
    if (n < 1 || modes < 1) throw std::invalid_argument("make_gauss_mix: bad sizes");
    Mat x(2, n);
    for (int j = 0; j < n; ++j) {
        int m = modes == 1 ? 0 : rng.uniform_int(0, modes - 1);
        double ang = 2.0 * kPi * double(m) / double(modes);
        double cx = modes == 1 ? 0.0 : radius * std::cos(ang);
        double cy = modes == 1 ? 0.0 : radius * std::sin(ang);
        x(0, j) = cx + noise_sd * rng.normal();
        x(1, j) = cy + noise_sd * rng.normal();
    }
    if (standardized) standardize(x);
    return x;
}

inline Mat make_swiss_roll(int n, double noise_sd, RngStream& rng) {
    Mat x(2, n);
    for (int j = 0; j < n; ++j) {
        double arc = 1.5 * kPi * (1.0 + 2.0 * rng.uniform());
        x(0, j) = arc * std::cos(arc) + noise_sd * rng.normal();
        x(1, j) = arc * std::sin(arc) + noise_sd * rng.normal();
    }
    standardize(x);
    return x;
}

// Uniform over the black cells of a 4x4 checkerboard on [-2,2]^2.
inline Mat make_checkerboard(int n, RngStream& rng) {
    Mat x(2, n);
    for (int j = 0; j < n; ++j) {
        int ci, cj;
        do {
            ci = rng.uniform_int(0, 3);
            cj = rng.uniform_int(0, 3);
        } while ((ci + cj) % 2 != 0);
        x(0, j) = -2.0 + ci + rng.uniform();
        x(1, j) = -2.0 + cj + rng.uniform();
    }
    standardize(x);
    return x;
}

// 4x4 grayscale patches: smooth Gaussian-bump prototypes plus pixel noise.
inline Mat make_tiny_images(int n, int prototypes, double noise_sd, RngStream& rng) {
    const int side = 4, dim = side * side;
    Mat protos(dim, prototypes);
    for (int p = 0; p < prototypes; ++p) {
        double cx = 3.0 * rng.uniform(), cy = 3.0 * rng.uniform();
        double w = 0.6 + rng.uniform();
        double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int yy = 0; yy < side; ++yy)
            for (int xx = 0; xx < side; ++xx) {
                double d2 = (xx - cx) * (xx - cx) + (yy - cy) * (yy - cy);
                protos(yy * side + xx, p) = sign * std::exp(-d2 / (2.0 * w * w));
            }
    }
    Mat x(dim, n);
    for (int j = 0; j < n; ++j) {
        int p = rng.uniform_int(0, prototypes - 1);
        x.col(j) = protos.col(p) + noise_sd * rng.normal_vec(dim);
    }
    standardize(x);
    return x;
}

struct DatasetParams {
    DatasetKind kind = DatasetKind::gauss_mix;
    int n = 8192;
    int modes = 8;          // gauss_mix, tiny_images prototypes
    double radius = 1.0;    // gauss_mix ring radius
    double noise_sd = 0.15; // per-kind noise scale
};

inline Mat make_dataset(const DatasetParams& p, RngStream& rng) {
    switch (p.kind) {
        case DatasetKind::gauss_mix:
            return make_gauss_mix(p.n, p.modes, p.radius, p.noise_sd, rng);
        case DatasetKind::swiss_roll:
            return make_swiss_roll(p.n, p.noise_sd, rng);
        case DatasetKind::checkerboard:
            return make_checkerboard(p.n, rng);
        case DatasetKind::tiny_images:
            return make_tiny_images(p.n, p.modes, p.noise_sd, rng);
    }
    throw std::invalid_argument("make_dataset: unknown kind");
}

}  // namespace tslab
