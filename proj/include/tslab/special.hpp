// special.hpp — digamma/trigamma and the log Beta function.
#pragma once

#include <cmath>
#include <stdexcept>

namespace tslab {

// Digamma via the shift recurrence psi(x) = psi(x+1) - 1/x and the
// asymptotic series above x = 6. Accuracy ~1e-12 for x > 0.
inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x, inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return acc + series;
}

// Trigamma via psi'(x) = psi'(x+1) + 1/x^2 plus the asymptotic tail.
inline double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x, inv2 = inv * inv;
    double series = inv * (1.0 + 0.5 * inv
        + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))));
    return acc + series;
}

inline double log_beta(double a, double b) {
    if (!(a > 0.0 && b > 0.0)) throw std::domain_error("log_beta: requires a, b > 0");
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace tslab
