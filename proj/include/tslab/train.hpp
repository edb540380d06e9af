// train.hpp — the experiment driver: minibatch diffusion training with a
// configurable timestep sampler, periodic objective-drop estimation and
// policy updates, metric tracking and persistence.
#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "tslab/checkpoint.hpp"
#include "tslab/config.hpp"
#include "tslab/dataset.hpp"
#include "tslab/delta.hpp"
#include "tslab/diffusion.hpp"
#include "tslab/metrics.hpp"
#include "tslab/policy.hpp"
#include "tslab/profiler.hpp"
#include "tslab/samplers.hpp"

namespace tslab {

struct TrainOutput {
    RunMetrics metrics;
    NoiseSchedule schedule;
    PredictorNet theta;
    PredictorNet ema;
    AdamState adam;
    PolicyParams phi;
    Mat data;
    Mat holdout;  // energy-distance reference (may be empty)
    VlbProbe probe;
    long alg2_events = 0;
};

namespace detail {

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Training set plus the held-out energy-distance reference, drawn from
// one stream and standardized jointly. Deterministic in the config, so
// tools can rebuild the exact dataset a checkpoint was trained on.
inline std::pair<Mat, Mat> build_dataset_and_holdout(const ExperimentConfig& cfg) {
    RngStream rng_data(cfg.dataset.seed.value_or(cfg.seed), "data");
    DatasetParams joint = cfg.dataset.params;
    joint.n = cfg.dataset.params.n + cfg.train.ed_samples;
    Mat all = make_dataset(joint, rng_data);
    return {all.leftCols(cfg.dataset.params.n), all.rightCols(cfg.train.ed_samples)};
}

// Runs the full training loop. When out_dir is nonempty, writes
// metrics.csv, eval.csv, run_meta.json and checkpoint_final.bin there.
inline TrainOutput train(const ExperimentConfig& cfg, const std::string& out_dir = "") {
    const long K = cfg.train.iters;
    const int B = cfg.train.batch;

    TrainOutput out;
    out.schedule = build_schedule(cfg.schedule.kind, cfg.schedule.T, cfg.schedule.beta_start,
                                  cfg.schedule.beta_end, cfg.schedule.sigma2);
    const NoiseSchedule& sched = out.schedule;
    const int T = sched.T;

    // Named RNG streams keep the data/noise sequences identical across
    // sampler choices.
    RngStream rng_batch(cfg.seed, "batch");
    RngStream rng_noise(cfg.seed, "noise");
    RngStream rng_timestep(cfg.seed, "timestep");
    RngStream rng_policy(cfg.seed, "policy");
    RngStream rng_probe(cfg.seed, "probe");
    RngStream rng_probe_x0(cfg.seed, "probe_x0");
    RngStream rng_sweep(cfg.seed, "sweep");
    RngStream rng_profile(cfg.seed, "profile");
    RngStream rng_theta_init(cfg.seed, "theta_init");
    RngStream rng_phi_init(cfg.seed, "phi_init");
    RngStream rng_gen(cfg.seed, "gen");

    std::tie(out.data, out.holdout) = build_dataset_and_holdout(cfg);
    const Mat& data = out.data;
    const int dim = int(data.rows());
    const int n_data = int(data.cols());

    out.theta = init_predictor(dim, cfg.predictor.hidden, cfg.predictor.activation,
                               cfg.predictor.time_embed_dim, T, rng_theta_init);
    out.ema = out.theta;
    out.adam = init_adam(out.theta.mlp, cfg.optimizer.lr, cfg.optimizer.beta1,
                         cfg.optimizer.beta2, cfg.optimizer.eps);
    out.phi = init_policy(dim, cfg.adaptive.hidden, Activation::silu, cfg.adaptive.a_floor,
                          rng_phi_init);
    out.probe = make_vlb_probe(data, cfg.train.vlb_probes, T, rng_probe);

    const SamplerKind kind = cfg.sampler.kind;
    const bool adaptive = kind == SamplerKind::adaptive;
    const double policy_lr = cfg.adaptive.resolved_lr(cfg.schedule.kind);

    // Static weighting / sampling tables.
    WeightTable loss_weights;   // loss_weight role
    WeightTable prob_table;     // sampling_prob role
    bool use_loss_weights = false, use_prob_table = false;
    if (kind == SamplerKind::min_snr || kind == SamplerKind::p2) {
        WeightTable w = kind == SamplerKind::min_snr
                            ? weights_min_snr(sched, cfg.sampler.min_snr_gamma)
                            : weights_p2(sched, cfg.sampler.p2_k, cfg.sampler.p2_gamma);
        if (cfg.sampler.role == HeuristicRole::loss_weight) {
            loss_weights = w;
            use_loss_weights = true;
        } else {
            prob_table = weights_to_probs(w);
            use_prob_table = true;
        }
    }

    auto refresh_variance_table = [&]() {
        VarianceProfile prof = variance_profile(
            out.theta, sched, data, even_timestep_grid(T, cfg.sampler.var_prop_grid),
            cfg.sampler.var_prop_probes, rng_profile, false, 0);
        prob_table = variance_proportional_sampler(prof, T);
        use_prob_table = true;
    };

    DeltaQueue queue(static_cast<size_t>(cfg.delta.queue_capacity));
    RewardNormalizer normalizer(100);
    RunMetrics& m = out.metrics;
    m.iters.reserve(size_t(K));

    auto run_eval = [&](long completed) {
        auto t0 = std::chrono::steady_clock::now();
        EvalRecord rec;
        rec.k = completed;
        rec.tracked_vlb = tracked_vlb(out.theta, sched, out.probe);
        if (completed == K && cfg.train.ed_samples > 0) {
            Mat gen = ancestral_sample(out.ema, sched, cfg.train.ed_samples, rng_gen);
            rec.energy_distance = energy_distance(gen, out.holdout);
        }
        m.evals.push_back(rec);
        m.eval_seconds += detail::elapsed_s(t0);
    };

    auto maybe_checkpoint = [&](long completed, bool final_ckpt) {
        if (out_dir.empty()) return;
        bool periodic = cfg.train.checkpoint_every > 0 && completed > 0 &&
                        completed % cfg.train.checkpoint_every == 0;
        if (!periodic && !final_ckpt) return;
        Checkpoint ck;
        ck.config_json = config_to_json(cfg).dump();
        ck.iteration = completed;
        ck.theta = out.theta;
        ck.ema = out.ema;
        ck.adam = out.adam;
        ck.has_policy = true;
        ck.phi = out.phi;
        std::string name = final_ckpt ? "checkpoint_final.bin"
                                      : "checkpoint_" + std::to_string(completed) + ".bin";
        save_checkpoint(out_dir + "/" + name, ck);
    };

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    run_eval(0);

    Mat x0(dim, B), eps(dim, B);
    std::vector<int> ts(static_cast<size_t>(B));
    std::vector<TimestepDraw> draws;

    for (long k = 0; k < K; ++k) {
        auto t0 = std::chrono::steady_clock::now();
        if (kind == SamplerKind::variance_proportional &&
            k % cfg.sampler.var_prop_refresh == 0)
            refresh_variance_table();

        for (int j = 0; j < B; ++j) x0.col(j) = data.col(rng_batch.uniform_int(0, n_data - 1));
        for (int j = 0; j < B; ++j) eps.col(j) = rng_noise.normal_vec(dim);

        Vec weights;
        IterRecord rec;
        rec.k = k;
        if (adaptive) {
            draws = draw_timesteps_batch(out.phi, x0, T, rng_policy);
            double a_sum = 0, b_sum = 0, h_sum = 0, t_sum = 0;
            for (int j = 0; j < B; ++j) {
                ts[size_t(j)] = draws[size_t(j)].t;
                a_sum += draws[size_t(j)].a;
                b_sum += draws[size_t(j)].b;
                h_sum += beta_entropy(draws[size_t(j)].a, draws[size_t(j)].b);
                t_sum += draws[size_t(j)].t;
            }
            rec.a_mean = a_sum / B;
            rec.b_mean = b_sum / B;
            rec.entropy_mean = h_sum / B;
            rec.t_mean = t_sum / B;
        } else {
            for (int j = 0; j < B; ++j) {
                int t;
                if (use_prob_table)
                    t = sample_categorical(prob_table, rng_timestep);
                else if (kind == SamplerKind::log_normal)
                    t = sample_lognormal_sigmoid(T, cfg.sampler.lognormal_mu,
                                                 cfg.sampler.lognormal_sigma, rng_timestep);
                else
                    t = uniform_sample(T, rng_timestep);
                ts[size_t(j)] = t;
            }
            double t_sum = 0;
            for (int j = 0; j < B; ++j) t_sum += ts[size_t(j)];
            rec.t_mean = t_sum / B;
            if (use_loss_weights) {
                weights.resize(B);
                for (int j = 0; j < B; ++j) weights(j) = loss_weights.at(ts[size_t(j)]);
            }
        }

        auto [loss, grad] = loss_and_grad(out.theta, sched, x0, eps, ts, weights);
        if (!std::isfinite(loss))
            throw std::runtime_error("train: non-finite loss at iteration " +
                                     std::to_string(k));
        rec.loss = loss;
        clip_grad_norm(grad, cfg.optimizer.clip_norm);

        const bool gate = adaptive && cadence_gate(k, cfg.adaptive.f_s);
        PredictorNet theta_before;
        if (gate) theta_before = out.theta;

        adam_step(out.theta.mlp, grad, out.adam);
        ema_update(out.ema.mlp, out.theta.mlp, cfg.optimizer.ema_decay);

        if (gate) {
            ++out.alg2_events;
            long x0_id = rng_probe_x0.uniform_int(0, n_data - 1);
            DeltaSweep sweep = full_delta_sweep(theta_before, out.theta, sched,
                                                data.col(x0_id), rng_sweep,
                                                cfg.delta.weighted, &m.counters);
            sweep.k = k;
            sweep.x0_id = x0_id;
            push_sweep(queue, sweep);
            std::vector<int> S;
            if (queue.size() >= 2)
                S = select_timesteps(queue, cfg.delta.subset_size).S;
            else if (cfg.delta.fallback == DeltaConfig::Fallback::quartiles)
                S = quartile_subset(T);
            rec.delta_probe_full = sweep.target;
            if (!S.empty()) {
                double probe_subset = 0.0;
                for (int tau : S) probe_subset += sweep.deltas[size_t(tau - 1)];
                rec.delta_probe_subset = probe_subset / double(S.size());
                rec.subset = S;

                double delta_raw = approx_delta(theta_before, out.theta, sched, x0, S,
                                                rng_sweep, cfg.delta.weighted, &m.counters);
                rec.delta_tilde = delta_raw;
                rec.delta_tilde_std = normalizer.push(delta_raw);
                PolicyUpdateResult upd = reinforce_update_batch(
                    out.phi, x0, draws, rec.delta_tilde_std, cfg.adaptive.ent_coef,
                    policy_lr);
                out.phi = std::move(upd.params);
                if (!upd.applied) ++m.skipped_policy_updates;
                ++m.sampler_updates;
            }
        }

        m.iters.push_back(std::move(rec));
        m.train_seconds += detail::elapsed_s(t0);

        const long completed = k + 1;
        if (completed % cfg.train.eval_every == 0 && completed != K) run_eval(completed);
        maybe_checkpoint(completed, false);
    }
    run_eval(K);
    maybe_checkpoint(K, true);

    if (!out_dir.empty()) {
        write_metrics_csv(m, out_dir + "/metrics.csv");
        write_eval_csv(m, out_dir + "/eval.csv");
        json meta;
        meta["config"] = config_to_json(cfg);
        meta["counters"] = {{"probe_sample_passes", m.counters.probe_sample_passes},
                            {"batch_passes", m.counters.batch_passes}};
        meta["alg2_events"] = out.alg2_events;
        meta["sampler_updates"] = m.sampler_updates;
        meta["skipped_policy_updates"] = m.skipped_policy_updates;
        meta["train_seconds"] = m.train_seconds;
        meta["eval_seconds"] = m.eval_seconds;
        meta["final_tracked_vlb"] = m.evals.back().tracked_vlb;
        if (!std::isnan(m.evals.back().energy_distance))
            meta["final_energy_distance"] = m.evals.back().energy_distance;
        std::ofstream f(out_dir + "/run_meta.json");
        f << meta.dump(2) << '\n';
    }
    return out;
}

}  // namespace tslab
