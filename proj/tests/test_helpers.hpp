#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include "irsnoma/channel.hpp"
#include "irsnoma/random.hpp"

namespace irsnoma::test {

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

inline double rel_err(std::complex<double> a, std::complex<double> b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// Random realization built directly from Gaussian draws (no path loss),
/// so every coefficient is O(1).
inline ChannelRealization random_realization(const SystemDims& d, Rng& rng) {
  ChannelRealization r;
  r.bs_irs = complex_normal(d.elements, d.antennas, rng);
  for (int k = 0; k < d.users; ++k) {
    r.direct.push_back(complex_normal(d.antennas, 1, rng).col(0));
    r.reflect.push_back(complex_normal(d.elements, 1, rng).col(0));
    r.direct_distance.push_back(1.0);
    r.reflect_distance.push_back(1.0);
  }
  r.bs_irs_distance = 1.0;
  return r;
}

inline CVector random_phases(int n, Rng& rng) {
  CVector p(n);
  for (int i = 0; i < n; ++i) p[i] = unit_phasor(rng);
  return p;
}

}  // namespace irsnoma::test
