// mlp.hpp — dense MLP with explicit reverse-mode gradients, Adam, EMA.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslab/common.hpp"

namespace tslab {

enum class Activation { relu, silu };

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "silu") return Activation::silu;
    throw std::invalid_argument("unknown activation: " + s);
}

inline double act_eval(Activation a, double x) {
    if (a == Activation::relu) return x > 0.0 ? x : 0.0;
    return x * sigmoid(x);
}

inline double act_deriv(Activation a, double x) {
    if (a == Activation::relu) return x > 0.0 ? 1.0 : 0.0;
    double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

struct Layer {
    Mat W;
    Vec b;
};

struct MlpGrad {
    std::vector<Layer> layers;

    void setZero() {
        for (auto& l : layers) {
            l.W.setZero();
            l.b.setZero();
        }
    }
    void axpy(double a, const MlpGrad& o) {
        for (size_t i = 0; i < layers.size(); ++i) {
            layers[i].W += a * o.layers[i].W;
            layers[i].b += a * o.layers[i].b;
        }
    }
    void scale(double a) {
        for (auto& l : layers) {
            l.W *= a;
            l.b *= a;
        }
    }
    double squared_norm() const {
        double s = 0.0;
        for (const auto& l : layers) s += l.W.squaredNorm() + l.b.squaredNorm();
        return s;
    }
    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.W.allFinite() || !l.b.allFinite()) return false;
        return true;
    }
};

// Columns are samples. Hidden layers apply the activation, the final
// layer is linear.
struct Mlp {
    std::vector<Layer> layers;
    Activation act = Activation::silu;

    int in_dim() const { return int(layers.front().W.cols()); }
    int out_dim() const { return int(layers.back().W.rows()); }

    struct Cache {
        std::vector<Mat> h;  // h[0] = input, h[l] = post-activation of layer l
        std::vector<Mat> z;  // pre-activations
    };

    Mat forward(const Mat& x, Cache* cache = nullptr) const {
        Mat h = x;
        if (cache) {
            cache->h.clear();
            cache->z.clear();
            cache->h.push_back(h);
        }
        for (size_t l = 0; l < layers.size(); ++l) {
            Mat z = (layers[l].W * h).colwise() + layers[l].b;
            if (l + 1 < layers.size())
                h = z.unaryExpr([this](double v) { return act_eval(act, v); });
            else
                h = z;
            if (cache) {
                cache->z.push_back(std::move(z));
                cache->h.push_back(h);
            }
        }
        return h;
    }

    // d_out is dLoss/dOutput with the same shape as the forward output.
    MlpGrad backward(const Cache& cache, const Mat& d_out) const {
        MlpGrad g = zero_grad();
        Mat delta = d_out;
        for (int l = int(layers.size()) - 1; l >= 0; --l) {
            g.layers[l].W = delta * cache.h[l].transpose();
            g.layers[l].b = delta.rowwise().sum();
            if (l > 0) {
                Mat dprev = layers[l].W.transpose() * delta;
                delta = dprev.cwiseProduct(cache.z[l - 1].unaryExpr(
                    [this](double v) { return act_deriv(act, v); }));
            }
        }
        return g;
    }

    MlpGrad zero_grad() const {
        MlpGrad g;
        g.layers.reserve(layers.size());
        for (const auto& l : layers) {
            Layer zl;
            zl.W = Mat::Zero(l.W.rows(), l.W.cols());
            zl.b = Vec::Zero(l.b.size());
            g.layers.push_back(std::move(zl));
        }
        return g;
    }

    size_t param_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += size_t(l.W.size()) + size_t(l.b.size());
        return n;
    }
    bool all_finite() const {
        for (const auto& l : layers)
            if (!l.W.allFinite() || !l.b.allFinite()) return false;
        return true;
    }
};

// He-normal hidden layers, zero biases. The final layer starts at zero so
// an untrained net outputs zero.
inline Mlp init_mlp(const std::vector<int>& dims, Activation act, RngStream& rng,
                    bool zero_final = true) {
    if (dims.size() < 2) throw std::invalid_argument("init_mlp: need >= 2 dims");
    Mlp net;
    net.act = act;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer layer;
        const int fan_in = dims[l], fan_out = dims[l + 1];
        const bool final_layer = (l + 2 == dims.size());
        if (final_layer && zero_final) {
            layer.W = Mat::Zero(fan_out, fan_in);
        } else {
            double sd = std::sqrt(2.0 / fan_in);
            layer.W = sd * rng.normal_mat(fan_out, fan_in);
        }
        layer.b = Vec::Zero(fan_out);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

inline Vec flatten_grad(const MlpGrad& g) {
    Eigen::Index n = 0;
    for (const auto& l : g.layers) n += l.W.size() + l.b.size();
    Vec v(n);
    Eigen::Index at = 0;
    for (const auto& l : g.layers) {
        v.segment(at, l.W.size()) = Eigen::Map<const Vec>(l.W.data(), l.W.size());
        at += l.W.size();
        v.segment(at, l.b.size()) = l.b;
        at += l.b.size();
    }
    return v;
}

// Global-norm gradient clipping; returns the pre-clip norm.
inline double clip_grad_norm(MlpGrad& g, double max_norm) {
    double norm = std::sqrt(g.squared_norm());
    if (max_norm > 0.0 && norm > max_norm) g.scale(max_norm / norm);
    return norm;
}

struct AdamState {
    std::vector<Layer> m;
    std::vector<Layer> v;
    long step_count = 0;
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_hat = 1e-8;
};

inline AdamState init_adam(const Mlp& net, double lr, double beta1 = 0.9,
                           double beta2 = 0.999, double eps_hat = 1e-8) {
    AdamState st;
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps_hat = eps_hat;
    for (const auto& l : net.layers) {
        Layer z;
        z.W = Mat::Zero(l.W.rows(), l.W.cols());
        z.b = Vec::Zero(l.b.size());
        st.m.push_back(z);
        st.v.push_back(std::move(z));
    }
    return st;
}

// Bias-corrected Adam update.
inline void adam_step(Mlp& net, const MlpGrad& grad, AdamState& st) {
    st.step_count += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, double(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, double(st.step_count));
    for (size_t l = 0; l < net.layers.size(); ++l) {
        auto upd = [&](auto& p, auto& m, auto& v, const auto& g) {
            m.array() = st.beta1 * m.array() + (1.0 - st.beta1) * g.array();
            v.array() = st.beta2 * v.array() + (1.0 - st.beta2) * g.array().square();
            p.array() -= st.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + st.eps_hat);
        };
        upd(net.layers[l].W, st.m[l].W, st.v[l].W, grad.layers[l].W);
        upd(net.layers[l].b, st.m[l].b, st.v[l].b, grad.layers[l].b);
    }
}

inline void ema_update(Mlp& ema, const Mlp& live, double decay) {
    for (size_t l = 0; l < ema.layers.size(); ++l) {
        ema.layers[l].W = decay * ema.layers[l].W + (1.0 - decay) * live.layers[l].W;
        ema.layers[l].b = decay * ema.layers[l].b + (1.0 - decay) * live.layers[l].b;
    }
}

}  // namespace tslab
