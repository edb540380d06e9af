// config.hpp — experiment configuration: one JSON document, unknown keys
// rejected.
#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslab/dataset.hpp"
#include "tslab/mlp.hpp"
#include "tslab/schedule.hpp"

namespace tslab {

using json = nlohmann::json;

enum class SamplerKind { uniform, min_snr, p2, log_normal, adaptive, variance_proportional };

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "uniform") return SamplerKind::uniform;
    if (s == "min_snr") return SamplerKind::min_snr;
    if (s == "p2") return SamplerKind::p2;
    if (s == "log_normal") return SamplerKind::log_normal;
    if (s == "adaptive") return SamplerKind::adaptive;
    if (s == "variance_proportional") return SamplerKind::variance_proportional;
    throw std::invalid_argument("unknown sampler kind: " + s);
}

inline std::string to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::uniform: return "uniform";
        case SamplerKind::min_snr: return "min_snr";
        case SamplerKind::p2: return "p2";
        case SamplerKind::log_normal: return "log_normal";
        case SamplerKind::adaptive: return "adaptive";
        case SamplerKind::variance_proportional: return "variance_proportional";
    }
    return "?";
}

// Weighting heuristics run either as loss multipliers or as sampling
// distributions (weights converted to probabilities).
enum class HeuristicRole { loss_weight, sampling_prob };

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::linear;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    Sigma2Mode sigma2 = Sigma2Mode::fixed_large;
};

struct PredictorConfig {
    std::vector<int> hidden{128, 128};
    Activation activation = Activation::silu;
    int time_embed_dim = 64;
};

struct OptimizerConfig {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;
    double ema_decay = 0.9999;
};

struct SamplerConfig {
    SamplerKind kind = SamplerKind::uniform;
    HeuristicRole role = HeuristicRole::loss_weight;  // min_snr / p2
    double min_snr_gamma = 5.0;
    double p2_k = 1.0;
    double p2_gamma = 0.0;
    double lognormal_mu = 0.0;
    double lognormal_sigma = 1.0;
    long var_prop_refresh = 1000;  // iterations between variance re-profiles
    int var_prop_grid = 50;
    int var_prop_probes = 64;
};

struct AdaptiveConfig {
    std::optional<double> lr;  // default by schedule: 1e-2 linear/quadratic, 1e-3 cosine
    double ent_coef = 1e-2;
    int f_s = 40;
    double a_floor = 1e-4;
    std::vector<int> hidden{64, 64};

    double resolved_lr(ScheduleKind k) const {
        if (lr) return *lr;
        return k == ScheduleKind::cosine ? 1e-3 : 1e-2;
    }
};

struct DeltaConfig {
    int queue_capacity = 20;
    int subset_size = 3;
    bool weighted = true;
    enum class Fallback { quartiles, skip } fallback = Fallback::quartiles;
};

struct TrainConfig {
    long iters = 30000;
    int batch = 128;
    long eval_every = 1000;
    int vlb_probes = 32;
    int ed_samples = 512;   // generated/held-out points for the final energy
                            // distance; 0 disables generation
    long checkpoint_every = 0;  // 0 = final checkpoint only
};

struct DatasetConfig {
    DatasetParams params;
    std::optional<uint64_t> seed;  // defaults to the global data stream
};

struct ExperimentConfig {
    uint64_t seed = 1;
    DatasetConfig dataset;
    ScheduleConfig schedule;
    PredictorConfig predictor;
    OptimizerConfig optimizer;
    SamplerConfig sampler;
    AdaptiveConfig adaptive;
    DeltaConfig delta;
    TrainConfig train;
};

namespace detail {
inline void check_keys(const json& j, const std::string& section,
                       const std::set<std::string>& allowed) {
    if (!j.is_object()) throw std::invalid_argument("config: " + section + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + section);
}
template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}
}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    using detail::check_keys;
    using detail::get_to;
    check_keys(j, "root",
               {"seed", "dataset", "schedule", "predictor", "optimizer", "sampler",
                "adaptive", "delta", "train"});
    ExperimentConfig c;
    get_to(j, "seed", c.seed);

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, "dataset", {"kind", "n", "seed", "modes", "radius", "noise_sd"});
        if (d.contains("kind"))
            c.dataset.params.kind = dataset_kind_from_string(d.at("kind").get<std::string>());
        get_to(d, "n", c.dataset.params.n);
        get_to(d, "modes", c.dataset.params.modes);
        get_to(d, "radius", c.dataset.params.radius);
        get_to(d, "noise_sd", c.dataset.params.noise_sd);
        if (d.contains("seed")) c.dataset.seed = d.at("seed").get<uint64_t>();
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_keys(s, "schedule", {"kind", "T", "beta_start", "beta_end", "sigma2"});
        if (s.contains("kind"))
            c.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
        get_to(s, "T", c.schedule.T);
        get_to(s, "beta_start", c.schedule.beta_start);
        get_to(s, "beta_end", c.schedule.beta_end);
        if (s.contains("sigma2")) {
            std::string m = s.at("sigma2").get<std::string>();
            if (m == "fixed_large") c.schedule.sigma2 = Sigma2Mode::fixed_large;
            else if (m == "posterior") c.schedule.sigma2 = Sigma2Mode::posterior;
            else throw std::invalid_argument("config: schedule.sigma2 must be fixed_large or posterior");
        }
    }
    if (j.contains("predictor")) {
        const auto& p = j.at("predictor");
        check_keys(p, "predictor", {"hidden", "activation", "time_embed_dim"});
        get_to(p, "hidden", c.predictor.hidden);
        if (p.contains("activation"))
            c.predictor.activation = activation_from_string(p.at("activation").get<std::string>());
        get_to(p, "time_embed_dim", c.predictor.time_embed_dim);
    }
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        check_keys(o, "optimizer", {"lr", "beta1", "beta2", "eps", "clip_norm", "ema_decay"});
        get_to(o, "lr", c.optimizer.lr);
        get_to(o, "beta1", c.optimizer.beta1);
        get_to(o, "beta2", c.optimizer.beta2);
        get_to(o, "eps", c.optimizer.eps);
        get_to(o, "clip_norm", c.optimizer.clip_norm);
        get_to(o, "ema_decay", c.optimizer.ema_decay);
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        check_keys(s, "sampler",
                   {"kind", "role", "min_snr_gamma", "p2_k", "p2_gamma", "lognormal_mu",
                    "lognormal_sigma", "var_prop_refresh", "var_prop_grid",
                    "var_prop_probes"});
        if (s.contains("kind"))
            c.sampler.kind = sampler_kind_from_string(s.at("kind").get<std::string>());
        if (s.contains("role")) {
            std::string r = s.at("role").get<std::string>();
            if (r == "loss_weight") c.sampler.role = HeuristicRole::loss_weight;
            else if (r == "sampling_prob") c.sampler.role = HeuristicRole::sampling_prob;
            else throw std::invalid_argument("config: sampler.role must be loss_weight or sampling_prob");
        }
        get_to(s, "min_snr_gamma", c.sampler.min_snr_gamma);
        get_to(s, "p2_k", c.sampler.p2_k);
        get_to(s, "p2_gamma", c.sampler.p2_gamma);
        get_to(s, "lognormal_mu", c.sampler.lognormal_mu);
        get_to(s, "lognormal_sigma", c.sampler.lognormal_sigma);
        get_to(s, "var_prop_refresh", c.sampler.var_prop_refresh);
        get_to(s, "var_prop_grid", c.sampler.var_prop_grid);
        get_to(s, "var_prop_probes", c.sampler.var_prop_probes);
    }
    if (j.contains("adaptive")) {
        const auto& a = j.at("adaptive");
        check_keys(a, "adaptive", {"lr", "ent_coef", "f_s", "a_floor", "hidden"});
        if (a.contains("lr")) c.adaptive.lr = a.at("lr").get<double>();
        get_to(a, "ent_coef", c.adaptive.ent_coef);
        get_to(a, "f_s", c.adaptive.f_s);
        get_to(a, "a_floor", c.adaptive.a_floor);
        get_to(a, "hidden", c.adaptive.hidden);
    }
    if (j.contains("delta")) {
        const auto& d = j.at("delta");
        check_keys(d, "delta", {"queue_capacity", "subset_size", "weighted", "fallback"});
        get_to(d, "queue_capacity", c.delta.queue_capacity);
        get_to(d, "subset_size", c.delta.subset_size);
        get_to(d, "weighted", c.delta.weighted);
        if (d.contains("fallback")) {
            std::string f = d.at("fallback").get<std::string>();
            if (f == "quartiles") c.delta.fallback = DeltaConfig::Fallback::quartiles;
            else if (f == "skip") c.delta.fallback = DeltaConfig::Fallback::skip;
            else throw std::invalid_argument("config: delta.fallback must be quartiles or skip");
        }
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, "train",
                   {"iters", "batch", "eval_every", "vlb_probes", "ed_samples",
                    "checkpoint_every"});
        get_to(t, "iters", c.train.iters);
        get_to(t, "batch", c.train.batch);
        get_to(t, "eval_every", c.train.eval_every);
        get_to(t, "vlb_probes", c.train.vlb_probes);
        get_to(t, "ed_samples", c.train.ed_samples);
        get_to(t, "checkpoint_every", c.train.checkpoint_every);
    }

    if (c.train.iters < 1) throw std::invalid_argument("config: train.iters must be >= 1");
    if (c.train.batch < 1) throw std::invalid_argument("config: train.batch must be >= 1");
    return c;
}

inline std::string dataset_kind_to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::gauss_mix: return "gauss_mix";
        case DatasetKind::swiss_roll: return "swiss_roll";
        case DatasetKind::checkerboard: return "checkerboard";
        case DatasetKind::tiny_images: return "tiny_images";
    }
    return "?";
}

// Fully explicit echo of a config; parse_config(config_to_json(c)) is the
// identity.
inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["dataset"] = {{"kind", dataset_kind_to_string(c.dataset.params.kind)},
                    {"n", c.dataset.params.n},
                    {"modes", c.dataset.params.modes},
                    {"radius", c.dataset.params.radius},
                    {"noise_sd", c.dataset.params.noise_sd}};
    if (c.dataset.seed) j["dataset"]["seed"] = *c.dataset.seed;
    j["schedule"] = {{"kind", to_string(c.schedule.kind)},
                     {"T", c.schedule.T},
                     {"beta_start", c.schedule.beta_start},
                     {"beta_end", c.schedule.beta_end},
                     {"sigma2", c.schedule.sigma2 == Sigma2Mode::fixed_large
                                    ? "fixed_large"
                                    : "posterior"}};
    j["predictor"] = {{"hidden", c.predictor.hidden},
                      {"activation", c.predictor.activation == Activation::silu ? "silu" : "relu"},
                      {"time_embed_dim", c.predictor.time_embed_dim}};
    j["optimizer"] = {{"lr", c.optimizer.lr},     {"beta1", c.optimizer.beta1},
                      {"beta2", c.optimizer.beta2}, {"eps", c.optimizer.eps},
                      {"clip_norm", c.optimizer.clip_norm},
                      {"ema_decay", c.optimizer.ema_decay}};
    j["sampler"] = {{"kind", to_string(c.sampler.kind)},
                    {"role", c.sampler.role == HeuristicRole::loss_weight ? "loss_weight"
                                                                          : "sampling_prob"},
                    {"min_snr_gamma", c.sampler.min_snr_gamma},
                    {"p2_k", c.sampler.p2_k},
                    {"p2_gamma", c.sampler.p2_gamma},
                    {"lognormal_mu", c.sampler.lognormal_mu},
                    {"lognormal_sigma", c.sampler.lognormal_sigma},
                    {"var_prop_refresh", c.sampler.var_prop_refresh},
                    {"var_prop_grid", c.sampler.var_prop_grid},
                    {"var_prop_probes", c.sampler.var_prop_probes}};
    j["adaptive"] = {{"lr", c.adaptive.resolved_lr(c.schedule.kind)},
                     {"ent_coef", c.adaptive.ent_coef},
                     {"f_s", c.adaptive.f_s},
                     {"a_floor", c.adaptive.a_floor},
                     {"hidden", c.adaptive.hidden}};
    j["delta"] = {{"queue_capacity", c.delta.queue_capacity},
                  {"subset_size", c.delta.subset_size},
                  {"weighted", c.delta.weighted},
                  {"fallback", c.delta.fallback == DeltaConfig::Fallback::quartiles
                                   ? "quartiles"
                                   : "skip"}};
    j["train"] = {{"iters", c.train.iters},
                  {"batch", c.train.batch},
                  {"eval_every", c.train.eval_every},
                  {"vlb_probes", c.train.vlb_probes},
                  {"ed_samples", c.train.ed_samples},
                  {"checkpoint_every", c.train.checkpoint_every}};
    return j;
}

// Loads a config file; the TSLAB_SEED environment variable overrides the
// global seed when set.
inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    json j = json::parse(f);
    ExperimentConfig c = parse_config(j);
    if (const char* env = std::getenv("TSLAB_SEED")) c.seed = std::strtoull(env, nullptr, 10);
    return c;
}

}  // namespace tslab
