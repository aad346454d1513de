#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "irsnoma/types.hpp"

namespace irsnoma {

/// Antenna, IRS element and user counts.
struct SystemDims {
  int antennas = 4;  // M
  int elements = 32; // N
  int users = 4;     // K

  /// Throws ConfigError unless all counts are strictly positive.
  void validate() const;
  /// Soft checks; currently only the M <= K system assumption.
  std::vector<std::string> warnings() const;

  int action_size() const { return 2 * antennas * users + 2 * elements; }
  int state_size() const { return users + action_size() + users; }

  bool operator==(const SystemDims&) const = default;
};

/// Large-scale and small-scale fading parameters.
struct FadingConfig {
  double path_loss_exponent = 2.0;            // alpha
  double rician_factor = 1.0;                 // upsilon
  double bs_irs_distance = 50.0;              // d
  std::pair<double, double> direct_range{45.0, 50.0};
  std::pair<double, double> reflect_range{5.0, 10.0};
  std::uint64_t seed = 1;

  void validate() const;
};

struct ChannelRealization {
  CMatrix bs_irs;                     // G, N x M
  std::vector<CVector> direct;        // h_k^d, K vectors of length M
  std::vector<CVector> reflect;       // h_k^r, K vectors of length N
  std::vector<double> direct_distance;
  std::vector<double> reflect_distance;
  double bs_irs_distance = 0.0;

  SystemDims dims() const;
  bool operator==(const ChannelRealization&) const = default;
};

/// Deterministic part of the direct-link model: draw / sqrt(d^alpha).
CVector scale_direct(const CVector& draw, double distance, double alpha);

/// Deterministic part of the Rician model for a given nLoS draw. The LoS
/// component is the all-ones matrix.
CMatrix rician_from_draw(const CMatrix& nlos, double distance, const FadingConfig& cfg);

struct DirectLinks {
  std::vector<CVector> links;
  std::vector<double> distances;
};

/// Rayleigh BS-user links with per-user distance uniform in cfg.direct_range.
DirectLinks sample_direct_channel(const SystemDims& dims, const FadingConfig& cfg, Rng& rng);

CMatrix sample_rician_channel(int rows, int cols, double distance, const FadingConfig& cfg, Rng& rng);

/// One full set of CSI. Draw order: G, then (d_r, h_r) per user, then
/// (d_d, h_d) per user.
ChannelRealization sample_realization(const SystemDims& dims, const FadingConfig& cfg, Rng& rng);

enum class PhaseCheck { Enforce, Skip };

inline constexpr double kPhaseModulusTolerance = 1e-6;

/// h_k^{dH} + h_k^{rH} diag(phases) G for user `user` (0-based).
/// Throws std::invalid_argument if any |phase| deviates from 1 by more than
/// kPhaseModulusTolerance (unless check == Skip).
CRowVector composite_channel(const ChannelRealization& real, const CVector& phases, int user,
                             PhaseCheck check = PhaseCheck::Enforce);

/// FNV-1a over the raw bytes of every channel coefficient.
std::uint64_t channel_hash(const ChannelRealization& real);

}  // namespace irsnoma
