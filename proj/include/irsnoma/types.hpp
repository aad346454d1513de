#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace irsnoma {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using CRowVector = Eigen::RowVectorXcd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Random stream used everywhere a draw is needed. Always passed explicitly.
using Rng = std::mt19937_64;

/// Raw action could not be projected onto the feasible set (zero beams or
/// a zero phase entry). Callers resample exploration noise.
class ProjectionDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss, gradient or parameter encountered during training.
class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace irsnoma
