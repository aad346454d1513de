#pragma once

#include <span>
#include <vector>

#include "irsnoma/channel.hpp"
#include "irsnoma/types.hpp"

namespace irsnoma {

/// BS beams (column k is w_k, M x K, amplitude in sqrt-watts) and the IRS
/// diagonal phi_1..phi_N.
struct NetworkAction {
  CMatrix beams;
  CVector phases;

  SystemDims dims() const {
    return {static_cast<int>(beams.rows()), static_cast<int>(phases.size()), static_cast<int>(beams.cols())};
  }
  bool operator==(const NetworkAction&) const = default;
};

/// Observation fed to the agent: previous SINRs, previous projected action
/// and previous per-beam powers.
struct EnvState {
  Vector prev_sinr;
  Vector prev_action;
  Vector prev_beam_power;

  /// [sinr (K) | action (2MK+2N) | beam power (K)]
  Vector flatten() const;
  static EnvState zeros(const SystemDims& dims);
};

struct EnvConfig {
  SystemDims dims;
  double transmit_power = 0.1;  // P_t, watts
  double noise_power = 1e-4;    // sigma_n^2, watts
  double target_rate = 0.5;     // R_t, bits/s/Hz

  void validate() const;
};

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// order[p] is the (0-based) user decoded at position p, weakest first.
using DecodingOrder = std::vector<int>;

/// Stable ascending sort of users by gain; ties keep ascending user index.
DecodingOrder order_by_gain(std::span<const double> gains);

/// Users sorted by composite channel gain ||h_k||^2.
DecodingOrder decoding_order(const ChannelRealization& real, const CVector& phases);

/// Users at positions strictly after `position`: their signals are still
/// present when the user at `position` decodes its own data.
std::vector<int> interference_set(const DecodingOrder& order, int position);

/// SINR of user i's signal observed at user j, with interference from the
/// interference set of i's position.
double sinr_observed(int i, int j, const NetworkAction& action, const ChannelRealization& real,
                     const DecodingOrder& order, double noise_power);

/// log2(1 + sinr). Throws std::invalid_argument for negative input.
double rate(double sinr);

/// Rescales all beams by a common factor so the total power equals
/// transmit_power, and normalises each phase to unit modulus.
/// Throws ProjectionDegenerate on an all-zero beam set or a zero phase.
NetworkAction project_action(const NetworkAction& raw, double transmit_power);

/// All pairwise SINRs/rates for one action. Entry (i, j) is user i's
/// signal observed at user j; the diagonal holds each user's own SINR/rate.
struct RateTable {
  Matrix sinr;
  Matrix rate;
};

RateTable compute_rates(const NetworkAction& action, const ChannelRealization& real,
                        const DecodingOrder& order, double noise_power);

struct SicCheck {
  bool feasible = true;
  double deficit = 0.0;  // <= 0
};

/// SIC feasibility on a precomputed rate table. Every user i must satisfy
/// min(R_ij, R_i) >= R_t for each j in its interference set and for j = i.
/// The deficit sums min(min(R_ij, R_i) - R_t, 0) over the same pairs.
SicCheck sic_feasibility(const Matrix& rates, const DecodingOrder& order, double target_rate);

SicCheck check_sic_feasibility(const NetworkAction& action, const ChannelRealization& real,
                               const DecodingOrder& order, const EnvConfig& cfg);

/// Layout: beam real parts (beam-major), beam imaginary parts, phase real
/// parts, phase imaginary parts.
Vector encode_action(const NetworkAction& action);
NetworkAction decode_action(const Vector& flat, const SystemDims& dims);

struct StepOutcome {
  double reward = 0.0;
  double sum_rate = 0.0;
  bool feasible = true;
  Vector rates;           // R_i per user
  DecodingOrder order;
  EnvState next_state;
  NetworkAction action;   // projected
};

StepOutcome env_step(const Vector& raw_action, const ChannelRealization& real, const EnvConfig& cfg,
                     const EnvState& prev_state);

/// Rectangular identity beams and uniformly random unit phases.
NetworkAction initial_action(const SystemDims& dims, Rng& rng);

/// Evaluates the initial action; its next_state is the first state of an
/// episode.
StepOutcome initial_step(const ChannelRealization& real, const EnvConfig& cfg, Rng& rng);

}  // namespace irsnoma
