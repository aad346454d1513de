#include "irsnoma/noma_env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "irsnoma/random.hpp"

namespace irsnoma {

Vector EnvState::flatten() const {
  Vector out(prev_sinr.size() + prev_action.size() + prev_beam_power.size());
  out << prev_sinr, prev_action, prev_beam_power;
  return out;
}

EnvState EnvState::zeros(const SystemDims& dims) {
  return EnvState{Vector::Zero(dims.users), Vector::Zero(dims.action_size()), Vector::Zero(dims.users)};
}

void EnvConfig::validate() const {
  dims.validate();
  if (!(transmit_power > 0.0)) throw ConfigError("transmit power must be > 0");
  if (!(noise_power > 0.0)) throw ConfigError("noise power must be > 0");
  if (!(target_rate >= 0.0)) throw ConfigError("target rate must be >= 0");
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

DecodingOrder order_by_gain(std::span<const double> gains) {
  DecodingOrder order(gains.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gains[a] < gains[b]; });
  return order;
}

DecodingOrder decoding_order(const ChannelRealization& real, const CVector& phases) {
  const int users = static_cast<int>(real.direct.size());
  std::vector<double> gains(users);
  for (int k = 0; k < users; ++k) gains[k] = composite_channel(real, phases, k).squaredNorm();
  return order_by_gain(gains);
}

std::vector<int> interference_set(const DecodingOrder& order, int position) {
  if (position < 0 || position >= static_cast<int>(order.size())) {
    throw std::out_of_range("decoding position out of range");
  }
  return {order.begin() + position + 1, order.end()};
}

namespace {

int position_of(const DecodingOrder& order, int user) {
  const auto it = std::find(order.begin(), order.end(), user);
  if (it == order.end()) throw std::out_of_range("user not present in decoding order");
  return static_cast<int>(it - order.begin());
}

// Row j, column i: h_j w_i.
CMatrix effective_gains(const NetworkAction& action, const ChannelRealization& real) {
  const int users = static_cast<int>(real.direct.size());
  CMatrix composite(users, real.bs_irs.cols());
  for (int k = 0; k < users; ++k) composite.row(k) = composite_channel(real, action.phases, k);
  return composite * action.beams;
}

}  // namespace

double sinr_observed(int i, int j, const NetworkAction& action, const ChannelRealization& real,
                     const DecodingOrder& order, double noise_power) {
  const CRowVector hj = composite_channel(real, action.phases, j);
  const double signal = std::norm((hj * action.beams.col(i)).value());
  double interference = 0.0;
  for (int k : interference_set(order, position_of(order, i))) {
    interference += std::norm((hj * action.beams.col(k)).value());
  }
  return signal / (interference + noise_power);
}

double rate(double sinr) {
  if (sinr < 0.0) throw std::invalid_argument("SINR must be non-negative");
  return std::log2(1.0 + sinr);
}

NetworkAction project_action(const NetworkAction& raw, double transmit_power) {
  const double total = raw.beams.squaredNorm();
  if (!(total > 0.0)) throw ProjectionDegenerate("all beamforming vectors are zero");
  NetworkAction out;
  out.beams = raw.beams * std::sqrt(transmit_power / total);
  out.phases.resize(raw.phases.size());
  for (Eigen::Index n = 0; n < raw.phases.size(); ++n) {
    const double mod = std::abs(raw.phases[n]);
    if (!(mod > 0.0)) throw ProjectionDegenerate("IRS phase coefficient " + std::to_string(n) + " is zero");
    out.phases[n] = raw.phases[n] / mod;
  }
  return out;
}

RateTable compute_rates(const NetworkAction& action, const ChannelRealization& real,
                        const DecodingOrder& order, double noise_power) {
  const int users = static_cast<int>(order.size());
  const Matrix power = effective_gains(action, real).cwiseAbs2();
  RateTable table{Matrix(users, users), Matrix(users, users)};
  for (int p = 0; p < users; ++p) {
    const int i = order[p];
    for (int j = 0; j < users; ++j) {
      double interference = 0.0;
      for (int q = p + 1; q < users; ++q) interference += power(j, order[q]);
      const double g = power(j, i) / (interference + noise_power);
      table.sinr(i, j) = g;
      table.rate(i, j) = rate(g);
    }
  }
  return table;
}

SicCheck sic_feasibility(const Matrix& rates, const DecodingOrder& order, double target_rate) {
  const int users = static_cast<int>(order.size());
  SicCheck out;
  for (int p = 0; p < users; ++p) {
    const int i = order[p];
    const double own = rates(i, i);
    for (int q = p; q < users; ++q) {
      const int j = order[q];
      const double margin = std::min(rates(i, j), own) - target_rate;
      if (margin < 0.0) {
        out.feasible = false;
        out.deficit += margin;
      }
    }
  }
  return out;
}

SicCheck check_sic_feasibility(const NetworkAction& action, const ChannelRealization& real,
                               const DecodingOrder& order, const EnvConfig& cfg) {
  return sic_feasibility(compute_rates(action, real, order, cfg.noise_power).rate, order, cfg.target_rate);
}

Vector encode_action(const NetworkAction& action) {
  const Eigen::Index mk = action.beams.size();
  const Eigen::Index n = action.phases.size();
  Vector flat(2 * mk + 2 * n);
  // beams is column-major, so its storage is already beam-major.
  const Eigen::Map<const CVector> beams(action.beams.data(), mk);
  flat.segment(0, mk) = beams.real();
  flat.segment(mk, mk) = beams.imag();
  flat.segment(2 * mk, n) = action.phases.real();
  flat.segment(2 * mk + n, n) = action.phases.imag();
  return flat;
}

NetworkAction decode_action(const Vector& flat, const SystemDims& dims) {
  if (flat.size() != dims.action_size()) {
    throw std::invalid_argument("action vector has length " + std::to_string(flat.size()) + ", expected " +
                                std::to_string(dims.action_size()));
  }
  const Eigen::Index mk = static_cast<Eigen::Index>(dims.antennas) * dims.users;
  const Eigen::Index n = dims.elements;
  NetworkAction out;
  out.beams.resize(dims.antennas, dims.users);
  Eigen::Map<CVector> beams(out.beams.data(), mk);
  beams.real() = flat.segment(0, mk);
  beams.imag() = flat.segment(mk, mk);
  out.phases.resize(n);
  out.phases.real() = flat.segment(2 * mk, n);
  out.phases.imag() = flat.segment(2 * mk + n, n);
  return out;
}

StepOutcome env_step(const Vector& raw_action, const ChannelRealization& real, const EnvConfig& cfg,
                     const EnvState& prev_state) {
  if (prev_state.flatten().size() != cfg.dims.state_size()) {
    throw std::invalid_argument("previous state does not match environment dimensions");
  }
  StepOutcome out;
  out.action = project_action(decode_action(raw_action, cfg.dims), cfg.transmit_power);
  out.order = decoding_order(real, out.action.phases);
  const RateTable table = compute_rates(out.action, real, out.order, cfg.noise_power);
  out.rates = table.rate.diagonal();
  out.sum_rate = out.rates.sum();
  const SicCheck sic = sic_feasibility(table.rate, out.order, cfg.target_rate);
  out.feasible = sic.feasible;
  out.reward = sic.feasible ? out.sum_rate : sic.deficit;
  out.next_state.prev_sinr = table.sinr.diagonal();
  out.next_state.prev_action = encode_action(out.action);
  out.next_state.prev_beam_power = out.action.beams.colwise().squaredNorm().transpose();
  return out;
}

NetworkAction initial_action(const SystemDims& dims, Rng& rng) {
  NetworkAction out;
  out.beams = CMatrix::Identity(dims.antennas, dims.users);
  out.phases.resize(dims.elements);
  for (int n = 0; n < dims.elements; ++n) out.phases[n] = unit_phasor(rng);
  return out;
}

StepOutcome initial_step(const ChannelRealization& real, const EnvConfig& cfg, Rng& rng) {
  return env_step(encode_action(initial_action(cfg.dims, rng)), real, cfg, EnvState::zeros(cfg.dims));
}

}  // namespace irsnoma
