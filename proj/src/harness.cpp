#include "irsnoma/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "irsnoma/random.hpp"

namespace irsnoma {

namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t {
  kAgentInit = 0,
  kChannel = 1,
  kEpisodeInit = 2,
  kExploration = 3,
  kReplay = 4,
  kEvalChannel = 5,
  kBaseline = 6,
  kEvalInit = 7,
};

constexpr int kMaxNoiseRedraws = 100;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return os;
}

EvalSummary summarize(const std::vector<double>& samples, int feasible) {
  EvalSummary s;
  s.samples = static_cast<int>(samples.size());
  if (samples.empty()) return s;
  double sum = 0.0;
  for (double x : samples) sum += x;
  s.mean_sum_rate = sum / s.samples;
  if (s.samples > 1) {
    double ss = 0.0;
    for (double x : samples) ss += (x - s.mean_sum_rate) * (x - s.mean_sum_rate);
    s.std_error = std::sqrt(ss / (s.samples - 1) / s.samples);
  }
  s.feasible_frac = static_cast<double>(feasible) / s.samples;
  return s;
}

void write_best_action(const std::filesystem::path& path, const TrainingResult& r) {
  nlohmann::ordered_json j;
  j["sum_rate"] = r.best_sum_rate;
  j["feasible"] = r.best_feasible;
  nlohmann::json beams = nlohmann::json::array();
  for (Eigen::Index k = 0; k < r.best_action.beams.cols(); ++k) {
    nlohmann::json beam = nlohmann::json::array();
    for (Eigen::Index m = 0; m < r.best_action.beams.rows(); ++m) {
      beam.push_back({r.best_action.beams(m, k).real(), r.best_action.beams(m, k).imag()});
    }
    beams.push_back(beam);
  }
  j["beams"] = beams;
  nlohmann::json phases = nlohmann::json::array();
  for (Eigen::Index n = 0; n < r.best_action.phases.size(); ++n) {
    phases.push_back({r.best_action.phases[n].real(), r.best_action.phases[n].imag()});
  }
  j["phases"] = phases;
  auto os = open_output(path);
  os << j.dump(2) << '\n';
}

void write_channel_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& rows) {
  auto os = open_output(path);
  os << "episode,channel_hash\n";
  for (const EpisodeLog& r : rows) os << r.episode << ',' << std::hex << r.channel_hash << std::dec << '\n';
}

const char* mode_name(ChannelMode m) { return m == ChannelMode::Fixed ? "fixed" : "varying"; }

}  // namespace

void RunConfig::validate() const {
  fading.validate();
  env.validate();
  agent.validate();
  if (episodes < 1 || steps < 1) throw ConfigError("episodes and steps must be >= 1");
  if (eval_realizations < 1) throw ConfigError("evaluation realization count must be >= 1");
}

RunConfig RunConfig::headline() {
  RunConfig cfg;
  cfg.env.dims = {4, 32, 4};
  cfg.env.transmit_power = dbm_to_watts(30.0);
  cfg.env.noise_power = dbm_to_watts(-10.0);
  cfg.env.target_rate = 0.5;
  cfg.episodes = 200;
  cfg.steps = 100;
  cfg.agent.capacity = 5000;
  return cfg;
}

RunConfig RunConfig::smoke() {
  RunConfig cfg = headline();
  cfg.env.dims = {2, 8, 2};
  cfg.episodes = 30;
  cfg.steps = 50;
  cfg.agent.capacity = 500;
  return cfg;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_episode_csv(const std::filesystem::path& path, const std::vector<EpisodeLog>& rows) {
  auto os = open_output(path);
  os << kEpisodeCsvHeader << '\n';
  for (const EpisodeLog& r : rows) {
    os << r.episode << ',' << format_number(r.acc_reward) << ',' << format_number(r.mean_sum_rate) << ','
       << format_number(r.feasible_frac) << ',' << format_number(r.noise_scale) << ',' << format_number(r.seconds)
       << '\n';
  }
}

void write_step_csv(const std::filesystem::path& path, const std::vector<StepLog>& rows) {
  auto os = open_output(path);
  os << kStepCsvHeader << '\n';
  for (const StepLog& r : rows) {
    os << r.episode << ',' << r.step << ',' << format_number(r.reward) << ',' << format_number(r.sum_rate) << ','
       << (r.feasible ? 1 : 0) << '\n';
  }
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto os = open_output(path);
  os << kSweepCsvHeader << '\n';
  for (const SweepRow& r : rows) {
    os << format_number(r.axis_value) << ',' << format_number(r.ddpg_sum_rate) << ','
       << format_number(r.random_sum_rate) << ',' << format_number(r.ddpg_feasible_frac) << ','
       << format_number(r.random_feasible_frac) << '\n';
  }
}

void save_agent(const std::filesystem::path& path, const DdpgAgent& agent) {
  auto os = open_output(path);
  agent.save(os);
}

DdpgAgent load_agent(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  return DdpgAgent::load(is);
}

TrainingResult run_training(const RunConfig& cfg, std::optional<DdpgAgent> initial) {
  cfg.validate();
  const SystemDims& dims = cfg.dims();
  for (const std::string& w : dims.warnings()) std::cerr << "warning: " << w << '\n';

  DdpgAgent agent = initial ? std::move(*initial)
                            : DdpgAgent(dims.state_size(), dims.action_size(), cfg.agent,
                                        derive_seed(cfg.seed, kAgentInit));
  if (agent.state_size() != dims.state_size() || agent.action_size() != dims.action_size()) {
    throw ConfigError("checkpointed agent does not match the configured system dimensions");
  }

  Rng channel_rng(derive_seed(cfg.seed, kChannel));
  Rng init_rng(derive_seed(cfg.seed, kEpisodeInit));
  Rng noise_rng(derive_seed(cfg.seed, kExploration));
  Rng replay_rng(derive_seed(cfg.seed, kReplay));

  std::optional<ChannelRealization> frozen;
  if (cfg.mode == ChannelMode::Fixed) frozen = sample_realization(dims, cfg.fading, channel_rng);

  std::vector<EpisodeLog> episodes;
  std::vector<StepLog> steps;
  episodes.reserve(cfg.episodes);
  steps.reserve(static_cast<std::size_t>(cfg.episodes) * cfg.steps);
  NetworkAction best_action;
  double best_sum_rate = -1.0;
  bool best_feasible = false;
  int updates = 0;
  double noise_scale = cfg.agent.noise_scale;

  auto flush = [&cfg](const std::vector<EpisodeLog>& ep_rows, const std::vector<StepLog>& step_rows,
                      const DdpgAgent& a) {
    if (cfg.out_dir.empty()) return;
    std::filesystem::create_directories(cfg.out_dir);
    write_episode_csv(cfg.out_dir / "episodes.csv", ep_rows);
    write_step_csv(cfg.out_dir / "steps.csv", step_rows);
    write_channel_csv(cfg.out_dir / "channels.csv", ep_rows);
    save_agent(cfg.out_dir / "agent.ckpt", a);
  };

  try {
    for (int ep = 1; ep <= cfg.episodes; ++ep) {
      const auto started = std::chrono::steady_clock::now();
      const ChannelRealization real = frozen ? *frozen : sample_realization(dims, cfg.fading, channel_rng);
      EnvState state = initial_step(real, cfg.env, init_rng).next_state;

      EpisodeLog log;
      log.episode = ep;
      log.channel_hash = channel_hash(real);
      int feasible_steps = 0;
      double sum_rate_total = 0.0;

      for (int t = 1; t <= cfg.steps; ++t) {
        const Vector s = state.flatten();
        Vector action;
        StepOutcome out;
        for (int attempt = 0;; ++attempt) {
          action = agent.select_action(s, noise_scale, noise_rng);
          try {
            out = env_step(action, real, cfg.env, state);
            break;
          } catch (const ProjectionDegenerate&) {
            if (attempt + 1 >= kMaxNoiseRedraws || noise_scale <= 0.0) throw;
          }
        }
        const Vector next = out.next_state.flatten();
        agent.store(Transition{s, action, out.reward, next});
        if (agent.ready()) {
          agent.train_step(replay_rng);
          ++updates;
        }

        log.acc_reward += out.reward;
        sum_rate_total += out.sum_rate;
        feasible_steps += out.feasible ? 1 : 0;
        steps.push_back(StepLog{ep, t, out.reward, out.sum_rate, out.feasible});

        const bool better = (out.feasible && !best_feasible) ||
                            (out.feasible == best_feasible && out.sum_rate > best_sum_rate);
        if (better) {
          best_action = out.action;
          best_sum_rate = out.sum_rate;
          best_feasible = out.feasible;
        }
        noise_scale = std::max(cfg.agent.noise_floor, noise_scale * cfg.agent.noise_decay);
        state = std::move(out.next_state);
      }

      log.mean_sum_rate = sum_rate_total / cfg.steps;
      log.feasible_frac = static_cast<double>(feasible_steps) / cfg.steps;
      log.noise_scale = noise_scale;
      if (cfg.record_timing) {
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      }
      episodes.push_back(log);
    }
  } catch (const TrainingDivergence&) {
    flush(episodes, steps, agent);
    throw;
  }

  TrainingResult result{std::move(episodes), std::move(steps), std::move(agent), std::move(best_action),
                        best_sum_rate, best_feasible, updates};
  flush(result.episodes, result.steps, result.agent);
  if (!cfg.out_dir.empty()) write_best_action(cfg.out_dir / "best_action.json", result);
  return result;
}

std::vector<ChannelRealization> evaluation_channels(const RunConfig& cfg, int count) {
  if (cfg.mode == ChannelMode::Fixed) {
    Rng rng(derive_seed(cfg.seed, kChannel));
    return {sample_realization(cfg.dims(), cfg.fading, rng)};
  }
  Rng rng(derive_seed(cfg.seed, kEvalChannel));
  std::vector<ChannelRealization> out;
  for (int i = 0; i < count; ++i) out.push_back(sample_realization(cfg.dims(), cfg.fading, rng));
  return out;
}

EvalSummary evaluate_policy(const DdpgAgent& agent, const RunConfig& cfg,
                            const std::vector<ChannelRealization>& channels) {
  Rng init_rng(derive_seed(cfg.seed, kEvalInit));
  std::vector<double> samples;
  int feasible = 0;
  for (const ChannelRealization& real : channels) {
    EnvState state = initial_step(real, cfg.env, init_rng).next_state;
    for (int t = 0; t < cfg.steps; ++t) {
      StepOutcome out = env_step(agent.act(state.flatten()), real, cfg.env, state);
      samples.push_back(out.sum_rate);
      feasible += out.feasible ? 1 : 0;
      state = std::move(out.next_state);
    }
  }
  return summarize(samples, feasible);
}

namespace {

StepOutcome random_trial(const ChannelRealization& real, const EnvConfig& env, Rng& rng) {
  const SystemDims& dims = env.dims;
  NetworkAction raw;
  raw.beams = complex_normal(dims.antennas, dims.users, rng);
  raw.phases.resize(dims.elements);
  for (int n = 0; n < dims.elements; ++n) raw.phases[n] = unit_phasor(rng);
  return env_step(encode_action(raw), real, env, EnvState::zeros(dims));
}

}  // namespace

EvalSummary random_baseline(const RunConfig& cfg, const std::vector<ChannelRealization>& channels,
                            int trials_per_channel, Rng& rng) {
  if (trials_per_channel < 1) throw ConfigError("baseline trials must be >= 1");
  std::vector<double> samples;
  int feasible = 0;
  for (const ChannelRealization& real : channels) {
    for (int i = 0; i < trials_per_channel; ++i) {
      const StepOutcome out = random_trial(real, cfg.env, rng);
      samples.push_back(out.sum_rate);
      feasible += out.feasible ? 1 : 0;
    }
  }
  return summarize(samples, feasible);
}

EvalSummary run_random_baseline(const RunConfig& cfg, int trials) {
  cfg.validate();
  if (trials < 1) throw ConfigError("baseline trials must be >= 1");
  Rng channel_rng(derive_seed(cfg.seed, kChannel));
  Rng rng(derive_seed(cfg.seed, kBaseline));
  if (cfg.mode == ChannelMode::Fixed) {
    return random_baseline(cfg, {sample_realization(cfg.dims(), cfg.fading, channel_rng)}, trials, rng);
  }
  std::vector<double> samples;
  int feasible = 0;
  for (int i = 0; i < trials; ++i) {
    const ChannelRealization real = sample_realization(cfg.dims(), cfg.fading, channel_rng);
    const StepOutcome out = random_trial(real, cfg.env, rng);
    samples.push_back(out.sum_rate);
    feasible += out.feasible ? 1 : 0;
  }
  return summarize(samples, feasible);
}

RunConfig with_axis_value(const RunConfig& cfg, SweepAxis axis, double value) {
  RunConfig out = cfg;
  if (axis == SweepAxis::Power) {
    out.env.transmit_power = dbm_to_watts(value);
  } else {
    const double rounded = std::round(value);
    if (rounded < 1.0 || rounded != value) throw ConfigError("IRS element count must be a positive integer");
    out.env.dims.elements = static_cast<int>(rounded);
  }
  return out;
}

std::vector<SweepRow> run_sweep(const RunConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                const SweepOptions& options) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const char* axis_name = axis == SweepAxis::Power ? "power" : "elements";
  std::vector<SweepRow> rows;
  for (double value : values) {
    RunConfig point = with_axis_value(cfg, axis, value);
    if (!cfg.out_dir.empty()) point.out_dir = cfg.out_dir / "points" / (std::string(axis_name) + "_" + format_number(value));
    point.validate();

    std::optional<DdpgAgent> agent;
    const std::filesystem::path ckpt = point.out_dir / "agent.ckpt";
    if (options.reuse_checkpoints && !point.out_dir.empty() && std::filesystem::exists(ckpt)) {
      agent = load_agent(ckpt);
    } else {
      agent = run_training(point, std::nullopt).agent;
    }
    const auto channels = evaluation_channels(point, point.eval_realizations);
    const EvalSummary trained = evaluate_policy(*agent, point, channels);
    Rng baseline_rng(derive_seed(point.seed, kBaseline));
    const EvalSummary random = random_baseline(point, channels, options.baseline_trials, baseline_rng);
    rows.push_back(SweepRow{value, trained.mean_sum_rate, random.mean_sum_rate, trained.feasible_frac,
                            random.feasible_frac});
  }
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    write_sweep_csv(cfg.out_dir / "sweep.csv", rows);
  }
  return rows;
}

namespace {

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void take_range(const nlohmann::json& j, const char* key, std::pair<double, double>& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ConfigError(std::string(key) + " must be a [lo, hi] array");
  out = {v[0].get<double>(), v[1].get<double>()};
}

void take_power(const nlohmann::json& j, const char* dbm_key, const char* watt_key, double& out) {
  if (j.contains(dbm_key) && j.contains(watt_key)) {
    throw ConfigError(std::string("give only one of ") + dbm_key + " and " + watt_key);
  }
  if (j.contains(dbm_key)) out = dbm_to_watts(j.at(dbm_key).get<double>());
  if (j.contains(watt_key)) out = j.at(watt_key).get<double>();
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text, RunConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{
      "M", "N", "K", "alpha", "rician_factor", "bs_irs_distance", "direct_range", "reflect_range", "pt_dbm",
      "pt_watts", "noise_dbm", "noise_watts", "target_rate", "discount", "tau", "lr_actor", "lr_critic",
      "batch_size", "capacity", "noise_scale", "noise_decay", "noise_floor", "hidden_width", "action_scale",
      "episodes", "steps", "seed", "record_timing", "eval_realizations", "channel_mode", "out_dir"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");
  }
  try {
    RunConfig& c = base;
    take(j, "M", c.env.dims.antennas);
    take(j, "N", c.env.dims.elements);
    take(j, "K", c.env.dims.users);
    take(j, "alpha", c.fading.path_loss_exponent);
    take(j, "rician_factor", c.fading.rician_factor);
    take(j, "bs_irs_distance", c.fading.bs_irs_distance);
    take_range(j, "direct_range", c.fading.direct_range);
    take_range(j, "reflect_range", c.fading.reflect_range);
    take_power(j, "pt_dbm", "pt_watts", c.env.transmit_power);
    take_power(j, "noise_dbm", "noise_watts", c.env.noise_power);
    take(j, "target_rate", c.env.target_rate);
    take(j, "discount", c.agent.discount);
    take(j, "tau", c.agent.tau);
    take(j, "lr_actor", c.agent.lr_actor);
    take(j, "lr_critic", c.agent.lr_critic);
    take(j, "batch_size", c.agent.batch_size);
    take(j, "capacity", c.agent.capacity);
    take(j, "noise_scale", c.agent.noise_scale);
    take(j, "noise_decay", c.agent.noise_decay);
    take(j, "noise_floor", c.agent.noise_floor);
    take(j, "hidden_width", c.agent.hidden_width);
    take(j, "action_scale", c.agent.action_scale);
    take(j, "episodes", c.episodes);
    take(j, "steps", c.steps);
    take(j, "seed", c.seed);
    take(j, "record_timing", c.record_timing);
    take(j, "eval_realizations", c.eval_realizations);
    if (j.contains("channel_mode")) {
      const auto mode = j.at("channel_mode").get<std::string>();
      if (mode == "fixed") c.mode = ChannelMode::Fixed;
      else if (mode == "varying") c.mode = ChannelMode::Varying;
      else throw ConfigError("channel_mode must be 'fixed' or 'varying'");
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    c.fading.seed = c.seed;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return run_config_from_json_text(ss.str(), std::move(base));
}

std::string run_config_to_json_text(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["M"] = c.env.dims.antennas;
  j["N"] = c.env.dims.elements;
  j["K"] = c.env.dims.users;
  j["alpha"] = c.fading.path_loss_exponent;
  j["rician_factor"] = c.fading.rician_factor;
  j["bs_irs_distance"] = c.fading.bs_irs_distance;
  j["direct_range"] = {c.fading.direct_range.first, c.fading.direct_range.second};
  j["reflect_range"] = {c.fading.reflect_range.first, c.fading.reflect_range.second};
  j["pt_watts"] = c.env.transmit_power;
  j["noise_watts"] = c.env.noise_power;
  j["target_rate"] = c.env.target_rate;
  j["discount"] = c.agent.discount;
  j["tau"] = c.agent.tau;
  j["lr_actor"] = c.agent.lr_actor;
  j["lr_critic"] = c.agent.lr_critic;
  j["batch_size"] = c.agent.batch_size;
  j["capacity"] = c.agent.capacity;
  j["noise_scale"] = c.agent.noise_scale;
  j["noise_decay"] = c.agent.noise_decay;
  j["noise_floor"] = c.agent.noise_floor;
  j["hidden_width"] = c.agent.hidden_width;
  j["action_scale"] = c.agent.action_scale;
  j["episodes"] = c.episodes;
  j["steps"] = c.steps;
  j["channel_mode"] = mode_name(c.mode);
  j["seed"] = c.seed;
  j["record_timing"] = c.record_timing;
  j["eval_realizations"] = c.eval_realizations;
  j["out_dir"] = c.out_dir.string();
  return j.dump(2);
}

}  // namespace irsnoma
