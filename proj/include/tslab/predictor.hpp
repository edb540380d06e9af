// predictor.hpp — the epsilon-prediction network: sinusoidal time features
// concatenated to x_t, then an MLP. Exact gradients come from mlp.hpp.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tslab/common.hpp"
#include "tslab/mlp.hpp"

namespace tslab {

// Sin/cos features of t/T at d/2 geometrically spaced frequencies in
// [1, 10000]. Norm^2 is exactly d/2.
inline Vec time_embedding(int t, int T, int d) {
    if (d <= 0 || d % 2 != 0) throw std::invalid_argument("time_embedding: d must be even");
    const int m = d / 2;
    Vec e(d);
    const double x = double(t) / double(T);
    for (int i = 0; i < m; ++i) {
        double w = m == 1 ? 1.0 : std::pow(10000.0, double(i) / double(m - 1));
        e(i) = std::sin(w * x);
        e(m + i) = std::cos(w * x);
    }
    return e;
}

struct PredictorNet {
    Mlp mlp;
    int time_embed_dim = 64;
    int T = 0;  // diffusion horizon the embedding was built for

    int data_dim() const { return mlp.in_dim() - time_embed_dim; }
};

inline PredictorNet init_predictor(int data_dim, const std::vector<int>& hidden,
                                   Activation act, int time_embed_dim, int T,
                                   RngStream& rng) {
    std::vector<int> dims;
    dims.push_back(data_dim + time_embed_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(data_dim);
    PredictorNet net;
    net.mlp = init_mlp(dims, act, rng);
    net.time_embed_dim = time_embed_dim;
    net.T = T;
    return net;
}

// Stack [x_t; embedding(t)] column-wise.
inline Mat embed_input(const PredictorNet& net, const Mat& xt,
                       const std::vector<int>& ts) {
    if (Eigen::Index(ts.size()) != xt.cols())
        throw std::invalid_argument("embed_input: one timestep per sample required");
    const int d = int(xt.rows()), e = net.time_embed_dim;
    Mat in(d + e, xt.cols());
    for (Eigen::Index j = 0; j < xt.cols(); ++j) {
        in.col(j).head(d) = xt.col(j);
        in.col(j).tail(e) = time_embedding(ts[size_t(j)], net.T, e);
    }
    return in;
}

inline Mat predict_eps(const PredictorNet& net, const Mat& xt,
                       const std::vector<int>& ts) {
    if (xt.rows() != net.data_dim())
        throw std::invalid_argument("predict_eps: data dimension mismatch");
    return net.mlp.forward(embed_input(net, xt, ts));
}

// Batch loss and exact parameter gradient evaluated at precomputed x_t:
// mean over samples of w_i * ||eps_i - eps_hat_i||^2.
inline std::pair<double, MlpGrad> loss_and_grad_at_xt(const PredictorNet& net,
                                                      const Mat& xt, const Mat& eps,
                                                      const std::vector<int>& ts,
                                                      const Vec& weights = Vec()) {
    if (xt.rows() != eps.rows() || xt.cols() != eps.cols())
        throw std::invalid_argument("loss_and_grad: eps shape mismatch");
    const Eigen::Index n = xt.cols();
    Mlp::Cache cache;
    Mat out = net.mlp.forward(embed_input(net, xt, ts), &cache);
    Mat resid = out - eps;
    double loss = 0.0;
    Mat d_out(resid.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double w = weights.size() ? weights(j) : 1.0;
        loss += w * resid.col(j).squaredNorm();
        d_out.col(j) = (2.0 * w / double(n)) * resid.col(j);
    }
    loss /= double(n);
    return {loss, net.mlp.backward(cache, d_out)};
}

// Per-sample gradients of the individual loss terms w_i*||eps_i - eps_hat_i||^2
// (no 1/n). Their mean equals the batch gradient.
inline std::vector<MlpGrad> per_sample_grads_at_xt(const PredictorNet& net,
                                                   const Mat& xt, const Mat& eps,
                                                   const std::vector<int>& ts,
                                                   const Vec& weights = Vec()) {
    const Eigen::Index n = xt.cols();
    std::vector<MlpGrad> grads;
    grads.reserve(size_t(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        Mlp::Cache cache;
        Mat out = net.mlp.forward(embed_input(net, xt.col(j), {ts[size_t(j)]}), &cache);
        double w = weights.size() ? weights(j) : 1.0;
        Mat d_out = 2.0 * w * (out - eps.col(j));
        grads.push_back(net.mlp.backward(cache, d_out));
    }
    return grads;
}

// Streaming statistics of the per-sample gradients: squared norms per
// sample plus the gradient sum, from one batched pass. Per-sample outer
// products are never materialized; ||delta h^T||_F^2 = ||delta||^2 ||h||^2.
struct PerSampleGradStats {
    Vec sq_norms;  // ||g_i||^2
    MlpGrad sum;   // sum_i g_i
};

inline PerSampleGradStats per_sample_grad_stats(const PredictorNet& net, const Mat& xt,
                                                const Mat& eps, const std::vector<int>& ts,
                                                const Vec& weights = Vec()) {
    const Eigen::Index n = xt.cols();
    Mlp::Cache cache;
    Mat out = net.mlp.forward(embed_input(net, xt, ts), &cache);
    Mat delta = 2.0 * (out - eps);
    for (Eigen::Index j = 0; j < n; ++j)
        if (weights.size()) delta.col(j) *= weights(j);

    PerSampleGradStats st;
    st.sq_norms = Vec::Zero(n);
    st.sum = net.mlp.zero_grad();
    const auto& layers = net.mlp.layers;
    for (int l = int(layers.size()) - 1; l >= 0; --l) {
        st.sum.layers[l].W = delta * cache.h[l].transpose();
        st.sum.layers[l].b = delta.rowwise().sum();
        for (Eigen::Index j = 0; j < n; ++j) {
            double d2 = delta.col(j).squaredNorm();
            st.sq_norms(j) += d2 * (cache.h[l].col(j).squaredNorm() + 1.0);
        }
        if (l > 0) {
            Mat dprev = layers[l].W.transpose() * delta;
            delta = dprev.cwiseProduct(cache.z[l - 1].unaryExpr(
                [&](double v) { return act_deriv(net.mlp.act, v); }));
        }
    }
    return st;
}

}  // namespace tslab
