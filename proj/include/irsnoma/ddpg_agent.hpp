#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "irsnoma/neural.hpp"
#include "irsnoma/replay_buffer.hpp"
#include "irsnoma/types.hpp"

namespace irsnoma {

struct AgentConfig {
  double discount = 0.99;        // xi
  double tau = 0.005;
  double lr_actor = 1e-3;
  double lr_critic = 2e-3;
  int batch_size = 64;           // N_b
  int capacity = 20000;          // C
  double noise_scale = 0.1;
  double noise_decay = 0.9995;   // per step
  double noise_floor = 0.01;
  int hidden_width = 300;
  double action_scale = 1.0;     // actor output = action_scale * tanh(.)

  void validate() const;
};

/// Adam state for every sub-network of a BranchedNet.
struct BranchedAdam {
  nn::AdamState left;
  nn::AdamState right;
  nn::AdamState trunk;

  static BranchedAdam for_net(const nn::BranchedNet& net, const nn::AdamConfig& config);
};

/// Actor: state -> [affine, BN, tanh] x 2 -> affine -> tanh.
nn::MlpParams make_actor(int state_size, int action_size, int hidden, Rng& rng);
/// Critic: state branch and action branch (affine, BN, relu each), stacked,
/// then affine, BN, relu -> linear scalar.
nn::BranchedNet make_critic(int state_size, int action_size, int hidden, Rng& rng);

/// Inference-mode actor output plus i.i.d. N(0, noise_scale^2) on every
/// coordinate.
Vector select_action(const nn::MlpParams& actor, const Vector& state, double noise_scale, Rng& rng,
                     double action_scale = 1.0);

/// Q(s, a) per row and, through `dq_da`, its gradient with respect to a.
using ActionValueFn = std::function<Vector(const Matrix& states, const Matrix& actions, Matrix& dq_da)>;

/// One policy-gradient ascent step on mean Q(s, mu(s)). Returns mean Q
/// before the update.
double policy_gradient_step(nn::MlpParams& actor, nn::AdamState& adam, const Matrix& states,
                            double action_scale, const ActionValueFn& critic);

/// One Adam step on mean (Q(s,a) - target)^2. Returns that mean loss.
double critic_regression_step(nn::BranchedNet& critic, BranchedAdam& adam, const Matrix& states,
                              const Matrix& actions, const Vector& targets);

class DdpgAgent {
 public:
  DdpgAgent(int state_size, int action_size, const AgentConfig& config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  int state_size() const { return state_size_; }
  int action_size() const { return action_size_; }

  /// Noise-free policy output.
  Vector act(const Vector& state) const;
  Vector select_action(const Vector& state, double noise_scale, Rng& rng) const;

  void store(Transition t);
  const ReplayBuffer& buffer() const { return buffer_; }
  bool ready() const { return buffer_.full(); }

  Batch sample_batch(Rng& rng) const;

  /// y = r + xi * Q'(s', mu'(s')); one Adam step on the train critic.
  double critic_update(const Batch& batch);
  /// Ascends Q(s, mu(s)) through the train critic (which is not modified).
  double actor_update(const Batch& batch);
  void sync_targets(double tau);
  void sync_targets() { sync_targets(config_.tau); }

  /// Sample, critic update, actor update, target sync.
  struct TrainStats {
    double critic_loss = 0.0;
    double mean_q = 0.0;
  };
  TrainStats train_step(Rng& rng);

  bool all_finite() const;

  const nn::MlpParams& actor() const { return actor_; }
  const nn::MlpParams& target_actor() const { return target_actor_; }
  const nn::BranchedNet& critic() const { return critic_; }
  const nn::BranchedNet& target_critic() const { return target_critic_; }
  nn::MlpParams& actor() { return actor_; }
  nn::BranchedNet& critic() { return critic_; }

  /// "IRSDDPG1", u32 state size, u32 action size, AgentConfig fields,
  /// then actor, target actor, critic (left, right, trunk), target critic,
  /// actor Adam, critic Adam (left, right, trunk), then the replay buffer:
  /// u64 capacity, u64 count, u64 cursor, and each transition as doubles.
  void save(std::ostream& os) const;
  static DdpgAgent load(std::istream& is);

 private:
  DdpgAgent() = default;

  AgentConfig config_;
  int state_size_ = 0;
  int action_size_ = 0;
  nn::MlpParams actor_;
  nn::MlpParams target_actor_;
  nn::BranchedNet critic_;
  nn::BranchedNet target_critic_;
  nn::AdamState actor_adam_;
  BranchedAdam critic_adam_;
  ReplayBuffer buffer_{1};
};

}  // namespace irsnoma
