// Command-line front end: train, baseline, sweep, eval.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irsnoma/harness.hpp"

using namespace irsnoma;

namespace {

struct RunOptions {
  std::string preset = "headline";
  std::string config_file;
  std::optional<int> M, N, K;
  std::optional<double> alpha, rician, bs_irs_distance;
  std::vector<double> direct_range, reflect_range;
  std::optional<double> pt_dbm, pt_watts, noise_dbm, target_rate;
  std::optional<double> discount, tau, lr_actor, lr_critic;
  std::optional<int> batch_size, capacity, hidden_width;
  std::optional<double> noise_scale, noise_decay, noise_floor, action_scale;
  std::optional<int> episodes, steps, eval_realizations;
  std::optional<std::string> channel_mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool no_timing = false;
};

void add_run_options(CLI::App* app, RunOptions& o) {
  app->add_option("--preset", o.preset, "Base configuration")->check(CLI::IsMember({"headline", "smoke"}));
  app->add_option("--config", o.config_file, "JSON config file (applied after the preset)");
  app->add_option("--antennas,-M", o.M, "BS antenna count");
  app->add_option("--elements,-N", o.N, "IRS element count");
  app->add_option("--users,-K", o.K, "User count");
  app->add_option("--alpha", o.alpha, "Path loss exponent");
  app->add_option("--rician-factor", o.rician, "Rician factor");
  app->add_option("--bs-irs-distance", o.bs_irs_distance, "BS-IRS distance (m)");
  app->add_option("--direct-range", o.direct_range, "BS-user distance interval lo hi (m)")->expected(2);
  app->add_option("--reflect-range", o.reflect_range, "IRS-user distance interval lo hi (m)")->expected(2);
  auto* pt = app->add_option("--pt-dbm", o.pt_dbm, "Total transmit power (dBm)");
  app->add_option("--pt-watts", o.pt_watts, "Total transmit power (W)")->excludes(pt);
  app->add_option("--noise-dbm", o.noise_dbm, "Noise power (dBm)");
  app->add_option("--target-rate", o.target_rate, "SIC target rate (bits/s/Hz)");
  app->add_option("--discount", o.discount, "Reward discount");
  app->add_option("--tau", o.tau, "Soft update rate");
  app->add_option("--lr-actor", o.lr_actor, "Actor learning rate");
  app->add_option("--lr-critic", o.lr_critic, "Critic learning rate");
  app->add_option("--batch", o.batch_size, "Mini-batch size");
  app->add_option("--capacity", o.capacity, "Replay capacity");
  app->add_option("--hidden", o.hidden_width, "Hidden layer width");
  app->add_option("--noise-scale", o.noise_scale, "Initial exploration noise std");
  app->add_option("--noise-decay", o.noise_decay, "Per-step exploration decay");
  app->add_option("--noise-floor", o.noise_floor, "Exploration noise floor");
  app->add_option("--action-scale", o.action_scale, "Actor output scale");
  app->add_option("--episodes,-I", o.episodes, "Episodes");
  app->add_option("--steps,-T", o.steps, "Steps per episode");
  app->add_option("--eval-realizations", o.eval_realizations, "Channels used for policy evaluation");
  app->add_option("--channel-mode", o.channel_mode, "fixed or varying")->check(CLI::IsMember({"fixed", "varying"}));
  app->add_option("--seed", o.seed, "Root random seed");
  app->add_option("--out-dir", o.out_dir, "Output directory");
  app->add_flag("--no-timing", o.no_timing, "Write 0 in the seconds column (byte-reproducible logs)");
}

template <typename T, typename U>
void apply(const std::optional<T>& v, U& out) {
  if (v) out = *v;
}

RunConfig build_config(const RunOptions& o) {
  RunConfig c = o.preset == "smoke" ? RunConfig::smoke() : RunConfig::headline();
  if (!o.config_file.empty()) c = load_run_config(o.config_file, c);
  apply(o.M, c.env.dims.antennas);
  apply(o.N, c.env.dims.elements);
  apply(o.K, c.env.dims.users);
  apply(o.alpha, c.fading.path_loss_exponent);
  apply(o.rician, c.fading.rician_factor);
  apply(o.bs_irs_distance, c.fading.bs_irs_distance);
  if (!o.direct_range.empty()) c.fading.direct_range = {o.direct_range[0], o.direct_range[1]};
  if (!o.reflect_range.empty()) c.fading.reflect_range = {o.reflect_range[0], o.reflect_range[1]};
  if (o.pt_dbm) c.env.transmit_power = dbm_to_watts(*o.pt_dbm);
  apply(o.pt_watts, c.env.transmit_power);
  if (o.noise_dbm) c.env.noise_power = dbm_to_watts(*o.noise_dbm);
  apply(o.target_rate, c.env.target_rate);
  apply(o.discount, c.agent.discount);
  apply(o.tau, c.agent.tau);
  apply(o.lr_actor, c.agent.lr_actor);
  apply(o.lr_critic, c.agent.lr_critic);
  apply(o.batch_size, c.agent.batch_size);
  apply(o.capacity, c.agent.capacity);
  apply(o.hidden_width, c.agent.hidden_width);
  apply(o.noise_scale, c.agent.noise_scale);
  apply(o.noise_decay, c.agent.noise_decay);
  apply(o.noise_floor, c.agent.noise_floor);
  apply(o.action_scale, c.agent.action_scale);
  apply(o.episodes, c.episodes);
  apply(o.steps, c.steps);
  apply(o.eval_realizations, c.eval_realizations);
  if (o.channel_mode) c.mode = *o.channel_mode == "fixed" ? ChannelMode::Fixed : ChannelMode::Varying;
  apply(o.seed, c.seed);
  c.fading.seed = c.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.no_timing) c.record_timing = false;
  c.validate();
  return c;
}

void print_summary(const char* label, const EvalSummary& s) {
  std::printf("%s: mean_sum_rate=%s std_error=%s feasible_frac=%s samples=%d\n", label,
              format_number(s.mean_sum_rate).c_str(), format_number(s.std_error).c_str(),
              format_number(s.feasible_frac).c_str(), s.samples);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IRS-assisted NOMA downlink: DDPG beamforming and phase-shift optimisation"};
  app.require_subcommand(1);

  RunOptions train_opts;
  std::string resume;
  auto* train = app.add_subcommand("train", "Train a DDPG agent and write logs");
  add_run_options(train, train_opts);
  train->add_option("--resume", resume, "Start from an existing agent checkpoint");
  std::string train_ckpt;
  train->add_option("--checkpoint", train_ckpt, "Also copy the final agent to this path");

  RunOptions base_opts;
  int base_trials = 1000;
  auto* baseline = app.add_subcommand("baseline", "Random beamforming/phase baseline");
  add_run_options(baseline, base_opts);
  baseline->add_option("--trials", base_trials, "Number of random trials")->check(CLI::PositiveNumber);

  RunOptions sweep_opts;
  std::string axis = "power";
  std::vector<double> values;
  SweepOptions sweep_cfg;
  auto* sweep = app.add_subcommand("sweep", "Train and compare against the baseline across an axis");
  add_run_options(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "power (dBm) or elements")->check(CLI::IsMember({"power", "elements"}));
  sweep->add_option("--values", values, "Axis values (default: 10 15 20 25 30 dBm or 8 16 32 elements)");
  sweep->add_option("--baseline-trials", sweep_cfg.baseline_trials, "Random trials per evaluation channel");
  sweep->add_flag("--reuse-checkpoints", sweep_cfg.reuse_checkpoints, "Load existing per-point checkpoints");

  RunOptions eval_opts;
  std::string eval_ckpt;
  int eval_trials = 1000;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpointed policy against the baseline");
  add_run_options(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "Agent checkpoint")->required();
  eval->add_option("--baseline-trials", eval_trials, "Random trials per evaluation channel");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunConfig cfg = build_config(train_opts);
      if (cfg.out_dir.empty()) cfg.out_dir = "out";
      std::optional<DdpgAgent> initial;
      if (!resume.empty()) initial = load_agent(resume);
      std::filesystem::create_directories(cfg.out_dir);
      {
        std::ofstream os(cfg.out_dir / "config.json");
        os << run_config_to_json_text(cfg) << '\n';
      }
      const TrainingResult r = run_training(cfg, std::move(initial));
      if (!train_ckpt.empty()) save_agent(train_ckpt, r.agent);
      const EpisodeLog& last = r.episodes.back();
      std::printf("episodes=%zu updates=%d last_acc_reward=%s last_mean_sum_rate=%s best_sum_rate=%s\n",
                  r.episodes.size(), r.updates, format_number(last.acc_reward).c_str(),
                  format_number(last.mean_sum_rate).c_str(), format_number(r.best_sum_rate).c_str());
    } else if (baseline->parsed()) {
      const RunConfig cfg = build_config(base_opts);
      print_summary("random", run_random_baseline(cfg, base_trials));
    } else if (sweep->parsed()) {
      RunConfig cfg = build_config(sweep_opts);
      if (cfg.out_dir.empty()) cfg.out_dir = "out";
      const SweepAxis ax = axis == "power" ? SweepAxis::Power : SweepAxis::Elements;
      if (values.empty()) {
        values = ax == SweepAxis::Power ? std::vector<double>{10, 15, 20, 25, 30} : std::vector<double>{8, 16, 32};
      }
      for (const SweepRow& row : run_sweep(cfg, ax, values, sweep_cfg)) {
        std::printf("%s,%s,%s,%s,%s\n", format_number(row.axis_value).c_str(), format_number(row.ddpg_sum_rate).c_str(),
                    format_number(row.random_sum_rate).c_str(), format_number(row.ddpg_feasible_frac).c_str(),
                    format_number(row.random_feasible_frac).c_str());
      }
    } else if (eval->parsed()) {
      const RunConfig cfg = build_config(eval_opts);
      const DdpgAgent agent = load_agent(eval_ckpt);
      if (agent.state_size() != cfg.dims().state_size() || agent.action_size() != cfg.dims().action_size()) {
        throw ConfigError("checkpoint dimensions do not match the configured system");
      }
      const auto channels = evaluation_channels(cfg, cfg.eval_realizations);
      print_summary("ddpg", evaluate_policy(agent, cfg, channels));
      Rng rng(cfg.seed);
      print_summary("random", random_baseline(cfg, channels, eval_trials, rng));
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const TrainingDivergence& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
