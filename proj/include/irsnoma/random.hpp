#pragma once

#include <cstdint>

#include "irsnoma/types.hpp"

namespace irsnoma {

/// Mixes a root seed with a stream id (splitmix64) so that independent
/// subsystems and episodes get decorrelated streams from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream);

/// CN(0,1): real and imaginary parts each N(0, 1/2).
Complex complex_normal(Rng& rng);
CMatrix complex_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Uniformly distributed point on the unit circle.
Complex unit_phasor(Rng& rng);

double uniform(double lo, double hi, Rng& rng);

}  // namespace irsnoma
