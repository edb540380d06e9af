// checkpoint.hpp — versioned binary dump of model, optimizer and policy
// state. Layout (native-endian):
//   magic "TSLABCK1"
//   u64 config length, config JSON bytes
//   i64 iteration
//   predictor: u8 activation, i32 time_embed_dim, i32 T, tensor list
//   ema predictor tensor list
//   adam: f64 lr/beta1/beta2/eps, i64 step, m tensors, v tensors
//   u8 has_policy, then f64 a_floor, u8 activation, tensor list
// Tensor list: u32 layer count, per layer u32 rows, u32 cols,
// f64 W (column-major), f64 b.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tslab/mlp.hpp"
#include "tslab/policy.hpp"
#include "tslab/predictor.hpp"

namespace tslab {

struct Checkpoint {
    std::string config_json;
    long iteration = 0;
    PredictorNet theta;
    PredictorNet ema;
    AdamState adam;
    bool has_policy = false;
    PolicyParams phi;
};

namespace detail {

constexpr char kCkptMagic[8] = {'T', 'S', 'L', 'A', 'B', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

inline void put_layers(std::ostream& os, const std::vector<Layer>& layers) {
    put<uint32_t>(os, uint32_t(layers.size()));
    for (const auto& l : layers) {
        put<uint32_t>(os, uint32_t(l.W.rows()));
        put<uint32_t>(os, uint32_t(l.W.cols()));
        os.write(reinterpret_cast<const char*>(l.W.data()),
                 std::streamsize(sizeof(double)) * l.W.size());
        os.write(reinterpret_cast<const char*>(l.b.data()),
                 std::streamsize(sizeof(double)) * l.b.size());
    }
}

inline std::vector<Layer> get_layers(std::istream& is) {
    uint32_t n = get<uint32_t>(is);
    std::vector<Layer> layers(n);
    for (auto& l : layers) {
        uint32_t r = get<uint32_t>(is), c = get<uint32_t>(is);
        l.W.resize(r, c);
        l.b.resize(r);
        is.read(reinterpret_cast<char*>(l.W.data()),
                std::streamsize(sizeof(double)) * l.W.size());
        is.read(reinterpret_cast<char*>(l.b.data()),
                std::streamsize(sizeof(double)) * l.b.size());
        if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    }
    return layers;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
    using namespace detail;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
    os.write(kCkptMagic, sizeof(kCkptMagic));
    put<uint64_t>(os, c.config_json.size());
    os.write(c.config_json.data(), std::streamsize(c.config_json.size()));
    put<int64_t>(os, c.iteration);

    put<uint8_t>(os, uint8_t(c.theta.mlp.act));
    put<int32_t>(os, c.theta.time_embed_dim);
    put<int32_t>(os, c.theta.T);
    put_layers(os, c.theta.mlp.layers);
    put_layers(os, c.ema.mlp.layers);

    put<double>(os, c.adam.lr);
    put<double>(os, c.adam.beta1);
    put<double>(os, c.adam.beta2);
    put<double>(os, c.adam.eps_hat);
    put<int64_t>(os, c.adam.step_count);
    put_layers(os, c.adam.m);
    put_layers(os, c.adam.v);

    put<uint8_t>(os, c.has_policy ? 1 : 0);
    if (c.has_policy) {
        put<double>(os, c.phi.a_floor);
        put<uint8_t>(os, uint8_t(c.phi.net.act));
        put_layers(os, c.phi.net.layers);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace detail;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCkptMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint c;
    uint64_t len = get<uint64_t>(is);
    c.config_json.resize(len);
    is.read(c.config_json.data(), std::streamsize(len));
    c.iteration = long(get<int64_t>(is));

    c.theta.mlp.act = Activation(get<uint8_t>(is));
    c.theta.time_embed_dim = get<int32_t>(is);
    c.theta.T = get<int32_t>(is);
    c.theta.mlp.layers = get_layers(is);
    c.ema = c.theta;
    c.ema.mlp.layers = get_layers(is);

    c.adam.lr = get<double>(is);
    c.adam.beta1 = get<double>(is);
    c.adam.beta2 = get<double>(is);
    c.adam.eps_hat = get<double>(is);
    c.adam.step_count = long(get<int64_t>(is));
    c.adam.m = get_layers(is);
    c.adam.v = get_layers(is);

    c.has_policy = get<uint8_t>(is) != 0;
    if (c.has_policy) {
        c.phi.a_floor = get<double>(is);
        c.phi.net.act = Activation(get<uint8_t>(is));
        c.phi.net.layers = get_layers(is);
    }
    return c;
}

}  // namespace tslab
