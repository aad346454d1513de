#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "irsnoma/types.hpp"

// Minimal dense network engine. Batches are row-major in the sense of one
// sample per matrix row.
namespace irsnoma::nn {

enum class Activation : std::uint8_t { Identity = 0, Tanh = 1, Relu = 2 };

enum class Mode { Train, Inference };

struct BatchNorm {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;
  double eps = 1e-5;
  double momentum = 0.99;  // running = momentum * running + (1 - momentum) * batch
};

/// affine -> [batch norm] -> activation
struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;
  std::optional<BatchNorm> norm;
  Activation activation = Activation::Identity;

  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
};

struct LayerSpec {
  int width = 0;
  Activation activation = Activation::Identity;
  bool batch_norm = false;
  /// Uniform init half-width; 0 selects 1/sqrt(fan_in).
  double init_bound = 0.0;
};

class MlpParams {
 public:
  std::vector<DenseLayer> layers;

  static MlpParams create(int input_size, std::span<const LayerSpec> specs, Rng& rng);

  int input_size() const;
  int output_size() const;

  /// Throws std::invalid_argument on broken layer chaining or non-positive
  /// running variance.
  void validate() const;

  /// Weights, biases and batch-norm scale/shift, in a fixed order.
  std::vector<std::span<double>> trainable();
  std::vector<std::span<const double>> trainable() const;
  /// trainable() plus batch-norm running statistics.
  std::vector<std::span<double>> all_tensors();
  std::vector<std::span<const double>> all_tensors() const;

  bool all_finite() const;

  /// Incremented by every in-place update; forward caches remember it.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  friend bool operator==(const MlpParams& a, const MlpParams& b);

 private:
  std::uint64_t version_ = 0;
};

struct LayerCache {
  Matrix input;
  Matrix normalized;    // xhat, when the layer has batch norm
  Vector inv_std;
  Matrix pre_activation;
  Matrix output;
  Vector batch_mean;
  Vector batch_var;     // biased
};

struct ForwardCache {
  Mode mode = Mode::Inference;
  std::vector<LayerCache> layers;
  std::uint64_t params_version = 0;
  bool valid = false;
};

struct ForwardPass {
  Matrix output;
  ForwardCache cache;
};

/// Pure forward pass. Train mode normalises with batch statistics (which
/// are recorded in the cache but not committed to the running statistics).
/// Throws std::invalid_argument on width mismatch or a train-mode batch of
/// one through a batch-norm layer.
ForwardPass evaluate(const MlpParams& params, const Matrix& input, Mode mode);

/// evaluate() followed, in train mode, by the running-statistic update.
ForwardPass forward(MlpParams& params, const Matrix& input, Mode mode);

/// Inference-mode output only.
Matrix predict(const MlpParams& params, const Matrix& input);

struct LayerGrads {
  Matrix weight;
  Vector bias;
  Vector gamma;  // empty without batch norm
  Vector beta;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;

  static MlpGrads zeros_like(const MlpParams& params);
  /// Same order as MlpParams::trainable().
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

struct BackwardResult {
  MlpGrads params;
  Matrix input;
};

/// Reverse-mode gradients given dL/d(output). Throws std::logic_error if
/// the cache is missing or was produced for a different parameter version.
BackwardResult backward(const MlpParams& params, const ForwardCache& cache, const Matrix& output_grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Vector> first;
  std::vector<Vector> second;
  std::int64_t step = 0;

  static AdamState for_params(const MlpParams& params, const AdamConfig& config);
};

/// One bias-corrected Adam step. Throws TrainingDivergence on non-finite
/// gradients and std::invalid_argument on shape mismatch.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state);

/// target <- tau * train + (1 - tau) * target over every tensor, running
/// statistics included.
void soft_update(MlpParams& target, const MlpParams& train, double tau);

// Binary checkpoint layout (little-endian):
//   "IRSMLP01", u32 layer count, then per layer:
//   u32 inputs, u32 outputs, u8 activation, u8 has_norm,
//   f64 weight[outputs*inputs] row-major, f64 bias[outputs],
//   if has_norm: f64 eps, f64 momentum, gamma, beta, running_mean, running_var.
void save(std::ostream& os, const MlpParams& params);
MlpParams load_mlp(std::istream& is);

//   "IRSADAM1", f64 lr, beta1, beta2, eps, i64 step, u32 tensor count,
//   then per tensor: u64 length, f64 first[length], f64 second[length].
void save(std::ostream& os, const AdamState& state);
AdamState load_adam(std::istream& is);

/// Two inputs, each through its own branch; branch outputs are stacked
/// side by side and fed to a shared trunk.
struct BranchedNet {
  MlpParams left;
  MlpParams right;
  MlpParams trunk;

  friend bool operator==(const BranchedNet&, const BranchedNet&) = default;
};

struct BranchedForward {
  Matrix output;
  ForwardCache left;
  ForwardCache right;
  ForwardCache trunk;
};

BranchedForward evaluate(const BranchedNet& net, const Matrix& left_in, const Matrix& right_in, Mode mode);
BranchedForward forward(BranchedNet& net, const Matrix& left_in, const Matrix& right_in, Mode mode);
Matrix predict(const BranchedNet& net, const Matrix& left_in, const Matrix& right_in);

struct BranchedGrads {
  MlpGrads left;
  MlpGrads right;
  MlpGrads trunk;
  Matrix left_input;
  Matrix right_input;
};

BranchedGrads backward(const BranchedNet& net, const BranchedForward& pass, const Matrix& output_grad);

void soft_update(BranchedNet& target, const BranchedNet& train, double tau);

}  // namespace irsnoma::nn
