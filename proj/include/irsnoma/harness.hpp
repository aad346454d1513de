#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "irsnoma/channel.hpp"
#include "irsnoma/ddpg_agent.hpp"
#include "irsnoma/noma_env.hpp"

namespace irsnoma {

enum class ChannelMode { Fixed, Varying };

struct RunConfig {
  FadingConfig fading;
  EnvConfig env;  // env.dims is the authoritative SystemDims
  AgentConfig agent;
  int episodes = 200;          // I
  int steps = 100;             // T
  ChannelMode mode = ChannelMode::Varying;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;  // empty: no files written
  /// When false the `seconds` column is written as 0 so that logs are
  /// byte-reproducible.
  bool record_timing = true;
  int eval_realizations = 5;

  const SystemDims& dims() const { return env.dims; }
  void validate() const;

  /// (4, 32, 4), I=200, T=100.
  static RunConfig headline();
  /// (2, 8, 2), I=30, T=50.
  static RunConfig smoke();
};

struct EpisodeLog {
  int episode = 0;  // 1-based
  double acc_reward = 0.0;
  double mean_sum_rate = 0.0;
  double feasible_frac = 0.0;
  double noise_scale = 0.0;
  double seconds = 0.0;
  std::uint64_t channel_hash = 0;
};

struct StepLog {
  int episode = 0;
  int step = 0;
  double reward = 0.0;
  double sum_rate = 0.0;
  bool feasible = false;
};

struct TrainingResult {
  std::vector<EpisodeLog> episodes;
  std::vector<StepLog> steps;
  DdpgAgent agent;
  /// Highest sum-rate feasible projected action seen during training (the
  /// highest sum-rate action overall if none was feasible).
  NetworkAction best_action;
  double best_sum_rate = 0.0;
  bool best_feasible = false;
  int updates = 0;
};

/// Runs the full DDPG training loop. When cfg.out_dir is set, writes
/// episodes.csv, steps.csv, channels.csv, best_action.json and agent.ckpt
/// (logs are flushed even if training diverges).
TrainingResult run_training(const RunConfig& cfg, std::optional<DdpgAgent> initial = std::nullopt);

struct EvalSummary {
  double mean_sum_rate = 0.0;
  double std_error = 0.0;
  double feasible_frac = 0.0;
  int samples = 0;
};

/// Evaluation channels: the frozen training realization in fixed mode,
/// otherwise `count` fresh realizations from an evaluation stream of the
/// run seed.
std::vector<ChannelRealization> evaluation_channels(const RunConfig& cfg, int count);

/// Noise-free, inference-mode rollout of T steps on each channel; averages
/// the per-step sum rate.
EvalSummary evaluate_policy(const DdpgAgent& agent, const RunConfig& cfg,
                            const std::vector<ChannelRealization>& channels);

/// Random beams (CN(0,1) entries) and uniform phases, projected. Infeasible
/// trials count at their achieved sum rate.
EvalSummary random_baseline(const RunConfig& cfg, const std::vector<ChannelRealization>& channels,
                            int trials_per_channel, Rng& rng);

/// `trials` random actions, each on a fresh channel (varying mode) or on
/// the frozen channel (fixed mode).
EvalSummary run_random_baseline(const RunConfig& cfg, int trials);

enum class SweepAxis { Power, Elements };

struct SweepRow {
  double axis_value = 0.0;
  double ddpg_sum_rate = 0.0;
  double random_sum_rate = 0.0;
  double ddpg_feasible_frac = 0.0;
  double random_feasible_frac = 0.0;
};

struct SweepOptions {
  int baseline_trials = 1000;  // per evaluation channel
  bool reuse_checkpoints = false;
};

/// Power values are in dBm. One trained agent per value; writes sweep.csv
/// and per-point checkpoints under cfg.out_dir when set.
std::vector<SweepRow> run_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const SweepOptions& options = {});

RunConfig with_axis_value(const RunConfig& cfg, SweepAxis axis, double value);

// CSV writers. Headers are fixed.
void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& rows);
void write_step_csv(const std::filesystem::path& path, const std::vector<StepLog>& rows);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

inline constexpr const char* kEpisodeCsvHeader = "episode,acc_reward,mean_sum_rate,feasible_frac,noise_scale,seconds";
inline constexpr const char* kStepCsvHeader = "episode,step,reward,sum_rate,feasible";
inline constexpr const char* kSweepCsvHeader =
    "axis_value,ddpg_sum_rate,random_sum_rate,ddpg_feasible_frac,random_feasible_frac";

/// Shortest round-trippable decimal form used in every CSV.
std::string format_number(double value);

// Config file (JSON). Keys mirror the CLI flags; absent keys keep `base`.
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base);
RunConfig run_config_from_json_text(const std::string& text, RunConfig base);
std::string run_config_to_json_text(const RunConfig& cfg);

DdpgAgent load_agent(const std::filesystem::path& path);
void save_agent(const std::filesystem::path& path, const DdpgAgent& agent);

}  // namespace irsnoma
