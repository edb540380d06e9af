// tslab command-line driver. Subcommands: train, profile-variance,
// interdependence, delta-eval, generate, cost-model. All outputs are CSV
// or JSON; failures print a machine-readable error JSON on stderr and
// exit nonzero.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tslab/checkpoint.hpp"
#include "tslab/config.hpp"
#include "tslab/profiler.hpp"
#include "tslab/train.hpp"

using nlohmann::json;

namespace {

tslab::ExperimentConfig config_from_checkpoint(const tslab::Checkpoint& ck) {
    tslab::ExperimentConfig cfg = tslab::parse_config(json::parse(ck.config_json));
    if (const char* env = std::getenv("TSLAB_SEED"))
        cfg.seed = std::strtoull(env, nullptr, 10);
    return cfg;
}

std::pair<int, int> parse_range(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("range must look like lo:hi (half-open)");
    int lo = std::stoi(s.substr(0, colon));
    int hi = std::stoi(s.substr(colon + 1));
    return {lo, hi};
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    tslab::ExperimentConfig cfg = tslab::load_config_file(config_path);
    tslab::TrainOutput out = tslab::train(cfg, out_dir);
    json summary = {
        {"iters", cfg.train.iters},
        {"final_tracked_vlb", out.metrics.evals.back().tracked_vlb},
        {"sampler_updates", out.metrics.sampler_updates},
        {"out_dir", out_dir},
    };
    double ed = out.metrics.evals.back().energy_distance;
    if (!std::isnan(ed)) summary["final_energy_distance"] = ed;
    std::cout << summary.dump(2) << '\n';
    return 0;
}

int cmd_profile_variance(const std::string& ckpt_path, int grid, int n, bool weighted,
                         const std::string& out_csv) {
    tslab::Checkpoint ck = tslab::load_checkpoint(ckpt_path);
    tslab::ExperimentConfig cfg = config_from_checkpoint(ck);
    tslab::NoiseSchedule s =
        tslab::build_schedule(cfg.schedule.kind, cfg.schedule.T, cfg.schedule.beta_start,
                              cfg.schedule.beta_end, cfg.schedule.sigma2);
    auto [data, holdout] = tslab::build_dataset_and_holdout(cfg);
    tslab::RngStream rng(cfg.seed, "profile");
    int epoch = int(ck.iteration * long(cfg.train.batch) / std::max(1, cfg.dataset.params.n));
    tslab::VarianceProfile p =
        tslab::variance_profile(ck.theta, s, data, tslab::even_timestep_grid(s.T, grid), n,
                                rng, weighted, epoch);
    tslab::write_variance_csv(p, out_csv);
    std::cout << json({{"out", out_csv}, {"points", p.t_grid.size()}}).dump(2) << '\n';
    return 0;
}

int cmd_interdependence(const std::string& ckpt_path, const std::string& range, long steps,
                        int probes, const std::string& out_csv) {
    tslab::Checkpoint ck = tslab::load_checkpoint(ckpt_path);
    tslab::ExperimentConfig cfg = config_from_checkpoint(ck);
    tslab::NoiseSchedule s =
        tslab::build_schedule(cfg.schedule.kind, cfg.schedule.T, cfg.schedule.beta_start,
                              cfg.schedule.beta_end, cfg.schedule.sigma2);
    auto [data, holdout] = tslab::build_dataset_and_holdout(cfg);
    auto [lo, hi] = parse_range(range);
    tslab::RngStream train_rng(cfg.seed, "inter_train");
    tslab::RngStream probe_rng(cfg.seed, "inter_probe");
    tslab::InterdependenceResult res = tslab::interdependence_experiment(
        ck.theta, ck.adam, s, data, lo, hi, steps, cfg.train.batch,
        cfg.optimizer.clip_norm, probes, train_rng, probe_rng);
    tslab::write_interdependence_csv(res, out_csv);
    std::cout << json({{"out", out_csv}, {"steps", steps}, {"range", range}}).dump(2) << '\n';
    return 0;
}

int cmd_delta_eval(const std::string& before_path, const std::string& after_path, bool full,
                   const std::string& out_csv) {
    tslab::Checkpoint before = tslab::load_checkpoint(before_path);
    tslab::Checkpoint after = tslab::load_checkpoint(after_path);
    tslab::ExperimentConfig cfg = config_from_checkpoint(before);
    tslab::NoiseSchedule s =
        tslab::build_schedule(cfg.schedule.kind, cfg.schedule.T, cfg.schedule.beta_start,
                              cfg.schedule.beta_end, cfg.schedule.sigma2);
    auto [data, holdout] = tslab::build_dataset_and_holdout(cfg);
    tslab::RngStream probe_rng(cfg.seed, "probe_x0");
    tslab::RngStream sweep_rng(cfg.seed, "sweep");
    json result;
    if (full) {
        long x0_id = probe_rng.uniform_int(0, int(data.cols()) - 1);
        tslab::DeltaSweep sweep = tslab::full_delta_sweep(
            before.theta, after.theta, s, data.col(x0_id), sweep_rng, cfg.delta.weighted);
        std::ofstream f(out_csv);
        if (!f) throw std::runtime_error("cannot open " + out_csv);
        f << "tau,delta\n";
        for (int t = 1; t <= s.T; ++t)
            f << t << ',' << tslab::fmt_double(sweep.deltas[size_t(t - 1)]) << '\n';
        result = {{"mode", "full"}, {"target", sweep.target}, {"x0_id", x0_id},
                  {"out", out_csv}};
    } else {
        tslab::RngStream batch_rng(cfg.seed, "batch");
        tslab::Mat x0(data.rows(), cfg.train.batch);
        for (int j = 0; j < cfg.train.batch; ++j)
            x0.col(j) = data.col(batch_rng.uniform_int(0, int(data.cols()) - 1));
        std::vector<int> S = tslab::quartile_subset(s.T);
        double delta = tslab::approx_delta(before.theta, after.theta, s, x0, S, sweep_rng,
                                           cfg.delta.weighted);
        result = {{"mode", "subset"}, {"delta_tilde", delta}, {"S", S}};
    }
    std::cout << result.dump(2) << '\n';
    return 0;
}

int cmd_generate(const std::string& ckpt_path, int n, const std::string& out_csv) {
    tslab::Checkpoint ck = tslab::load_checkpoint(ckpt_path);
    tslab::ExperimentConfig cfg = config_from_checkpoint(ck);
    tslab::NoiseSchedule s =
        tslab::build_schedule(cfg.schedule.kind, cfg.schedule.T, cfg.schedule.beta_start,
                              cfg.schedule.beta_end, cfg.schedule.sigma2);
    tslab::RngStream rng(cfg.seed, "gen");
    tslab::Mat samples = tslab::ancestral_sample(ck.ema, s, n, rng);
    std::ofstream f(out_csv);
    if (!f) throw std::runtime_error("cannot open " + out_csv);
    for (Eigen::Index i = 0; i < samples.rows(); ++i) f << (i ? ",x" : "x") << i;
    f << '\n';
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        for (Eigen::Index i = 0; i < samples.rows(); ++i)
            f << (i ? "," : "") << tslab::fmt_double(samples(i, j));
        f << '\n';
    }
    std::cout << json({{"out", out_csv}, {"n", n}}).dump(2) << '\n';
    return 0;
}

int cmd_cost_model(int subset, int batch, int T, int fs) {
    tslab::CostModel m{subset, batch, T, fs};
    tslab::CostModelResult r = tslab::cost_model_eval(m);
    std::cout << json({{"delta_cost_fwd_units", r.delta_cost},
                       {"overhead_ratio", r.overhead_ratio}})
                     .dump(2)
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion timestep-sampling laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "run";
    auto* train_cmd = app.add_subcommand("train", "train a model per config");
    train_cmd->add_option("--config", config_path, "JSON config file")->required();
    train_cmd->add_option("--out", out_dir, "output directory");

    std::string ckpt, out_csv = "variance_profile.csv";
    int grid = 50, nprobe = 256;
    bool weighted = false;
    auto* prof_cmd = app.add_subcommand("profile-variance",
                                        "per-timestep gradient variance and loss");
    prof_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    prof_cmd->add_option("--grid", grid, "number of probed timesteps");
    prof_cmd->add_option("--n", nprobe, "sample pairs per probe");
    prof_cmd->add_flag("--weighted", weighted, "profile the c_t-weighted loss");
    prof_cmd->add_option("--out", out_csv, "output CSV");

    std::string range = "1:200", inter_csv = "interdependence.csv";
    long steps = 2000;
    int probes = 64;
    auto* inter_cmd = app.add_subcommand("interdependence",
                                         "restricted-range training experiment");
    inter_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    inter_cmd->add_option("--range", range, "half-open timestep range lo:hi");
    inter_cmd->add_option("--steps", steps, "further training steps");
    inter_cmd->add_option("--probes", probes, "probe samples for the loss sweep");
    inter_cmd->add_option("--out", inter_csv, "output CSV");

    std::string before_path, after_path, delta_csv = "delta_sweep.csv";
    bool full = false;
    auto* delta_cmd = app.add_subcommand("delta-eval",
                                         "objective drop between two checkpoints");
    delta_cmd->add_option("--ckpt-before", before_path, "earlier checkpoint")->required();
    delta_cmd->add_option("--ckpt-after", after_path, "later checkpoint")->required();
    delta_cmd->add_flag("--full", full, "full per-timestep sweep");
    delta_cmd->add_option("--out", delta_csv, "sweep CSV (with --full)");

    int gen_n = 1000;
    std::string gen_csv = "samples.csv";
    auto* gen_cmd = app.add_subcommand("generate", "ancestral sampling from a checkpoint");
    gen_cmd->add_option("--ckpt", ckpt, "checkpoint file")->required();
    gen_cmd->add_option("--n", gen_n, "number of samples");
    gen_cmd->add_option("--out", gen_csv, "output CSV");

    int cm_subset = 3, cm_batch = 128, cm_T = 1000, cm_fs = 40;
    auto* cost_cmd = app.add_subcommand("cost-model", "sampler update cost accounting");
    cost_cmd->add_option("--subset", cm_subset, "|S|");
    cost_cmd->add_option("--batch", cm_batch, "|B|");
    cost_cmd->add_option("--T", cm_T, "diffusion steps");
    cost_cmd->add_option("--fs", cm_fs, "sampler update period");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) return cmd_train(config_path, out_dir);
        if (*prof_cmd) return cmd_profile_variance(ckpt, grid, nprobe, weighted, out_csv);
        if (*inter_cmd) return cmd_interdependence(ckpt, range, steps, probes, inter_csv);
        if (*delta_cmd) return cmd_delta_eval(before_path, after_path, full, delta_csv);
        if (*gen_cmd) return cmd_generate(ckpt, gen_n, gen_csv);
        if (*cost_cmd) return cmd_cost_model(cm_subset, cm_batch, cm_T, cm_fs);
    } catch (const std::exception& e) {
        std::cerr << json({{"error", {{"type", "runtime"}, {"message", e.what()}}}}).dump()
                  << '\n';
        return 1;
    }
    return 0;
}
