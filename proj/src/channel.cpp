#include "irsnoma/channel.hpp"

#include <cmath>
#include <cstring>

#include "irsnoma/random.hpp"

namespace irsnoma {

void SystemDims::validate() const {
  if (antennas < 1 || elements < 1 || users < 1) {
    throw ConfigError("system dimensions must be strictly positive (M=" + std::to_string(antennas) +
                      ", N=" + std::to_string(elements) + ", K=" + std::to_string(users) + ")");
  }
}

std::vector<std::string> SystemDims::warnings() const {
  std::vector<std::string> out;
  if (antennas > users) {
    out.push_back("antenna count M=" + std::to_string(antennas) + " exceeds user count K=" +
                  std::to_string(users) + "; the system model assumes M <= K");
  }
  return out;
}

void FadingConfig::validate() const {
  if (!(path_loss_exponent > 0.0)) throw ConfigError("path loss exponent must be > 0");
  if (!(rician_factor >= 0.0)) throw ConfigError("Rician factor must be >= 0");
  if (!(bs_irs_distance > 0.0)) throw ConfigError("BS-IRS distance must be > 0");
  auto check_range = [](const std::pair<double, double>& r, const char* name) {
    if (!(r.first > 0.0) || !(r.first < r.second)) {
      throw ConfigError(std::string(name) + " distance range must satisfy 0 < lo < hi");
    }
  };
  check_range(direct_range, "direct");
  check_range(reflect_range, "reflect");
}

SystemDims ChannelRealization::dims() const {
  return SystemDims{static_cast<int>(bs_irs.cols()), static_cast<int>(bs_irs.rows()),
                    static_cast<int>(direct.size())};
}

CVector scale_direct(const CVector& draw, double distance, double alpha) {
  return draw / std::sqrt(std::pow(distance, alpha));
}

CMatrix rician_from_draw(const CMatrix& nlos, double distance, const FadingConfig& cfg) {
  const double v = cfg.rician_factor;
  const double los_weight = std::sqrt(v / (1.0 + v));
  const double nlos_weight = std::sqrt(1.0 / (1.0 + v));
  const CMatrix los = CMatrix::Ones(nlos.rows(), nlos.cols());
  return (los_weight * los + nlos_weight * nlos) / std::sqrt(std::pow(distance, cfg.path_loss_exponent));
}

DirectLinks sample_direct_channel(const SystemDims& dims, const FadingConfig& cfg, Rng& rng) {
  DirectLinks out;
  out.links.reserve(dims.users);
  out.distances.reserve(dims.users);
  for (int k = 0; k < dims.users; ++k) {
    const double d = uniform(cfg.direct_range.first, cfg.direct_range.second, rng);
    const CVector draw = complex_normal(dims.antennas, 1, rng);
    out.links.push_back(scale_direct(draw, d, cfg.path_loss_exponent));
    out.distances.push_back(d);
  }
  return out;
}

CMatrix sample_rician_channel(int rows, int cols, double distance, const FadingConfig& cfg, Rng& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("Rician channel shape must be positive");
  if (!(distance > 0.0)) throw std::invalid_argument("Rician channel distance must be > 0");
  return rician_from_draw(complex_normal(rows, cols, rng), distance, cfg);
}

ChannelRealization sample_realization(const SystemDims& dims, const FadingConfig& cfg, Rng& rng) {
  ChannelRealization real;
  real.bs_irs_distance = cfg.bs_irs_distance;
  real.bs_irs = sample_rician_channel(dims.elements, dims.antennas, cfg.bs_irs_distance, cfg, rng);
  real.reflect.reserve(dims.users);
  real.reflect_distance.reserve(dims.users);
  for (int k = 0; k < dims.users; ++k) {
    const double d = uniform(cfg.reflect_range.first, cfg.reflect_range.second, rng);
    real.reflect.push_back(sample_rician_channel(dims.elements, 1, d, cfg, rng).col(0));
    real.reflect_distance.push_back(d);
  }
  DirectLinks direct = sample_direct_channel(dims, cfg, rng);
  real.direct = std::move(direct.links);
  real.direct_distance = std::move(direct.distances);
  return real;
}

CRowVector composite_channel(const ChannelRealization& real, const CVector& phases, int user,
                             PhaseCheck check) {
  if (user < 0 || user >= static_cast<int>(real.direct.size())) {
    throw std::out_of_range("user index out of range");
  }
  if (phases.size() != real.bs_irs.rows()) {
    throw std::invalid_argument("phase vector length does not match IRS element count");
  }
  if (check == PhaseCheck::Enforce) {
    for (Eigen::Index n = 0; n < phases.size(); ++n) {
      if (std::abs(std::abs(phases[n]) - 1.0) > kPhaseModulusTolerance) {
        throw std::invalid_argument("IRS phase coefficient " + std::to_string(n) +
                                    " is not unit modulus");
      }
    }
  }
  const CVector& hr = real.reflect[user];
  // h_r^H diag(phi) G: scale row n of G by conj(h_r[n]) * phi[n].
  const CRowVector weights = hr.conjugate().cwiseProduct(phases).transpose();
  return real.direct[user].adjoint() + weights * real.bs_irs;
}

namespace {

void fnv_mix(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
}

}  // namespace

std::uint64_t channel_hash(const ChannelRealization& real) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  fnv_mix(h, real.bs_irs.data(), sizeof(Complex) * real.bs_irs.size());
  for (const auto& v : real.direct) fnv_mix(h, v.data(), sizeof(Complex) * v.size());
  for (const auto& v : real.reflect) fnv_mix(h, v.data(), sizeof(Complex) * v.size());
  return h;
}

}  // namespace irsnoma
