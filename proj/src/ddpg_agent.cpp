#include "irsnoma/ddpg_agent.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "irsnoma/binary_io.hpp"

namespace irsnoma {

namespace {

constexpr double kOutputInitBound = 3e-3;

}  // namespace

void AgentConfig::validate() const {
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("discount must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("soft update rate must lie in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be > 0");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2 (batch normalisation)");
  if (capacity < 1) throw ConfigError("replay capacity must be positive");
  if (batch_size > capacity) throw ConfigError("batch size cannot exceed replay capacity");
  if (!(noise_scale >= 0.0) || !(noise_floor >= 0.0)) throw ConfigError("noise scales must be >= 0");
  if (!(noise_decay > 0.0 && noise_decay <= 1.0)) throw ConfigError("noise decay must lie in (0, 1]");
  if (hidden_width < 1) throw ConfigError("hidden width must be positive");
  if (!(action_scale > 0.0)) throw ConfigError("action scale must be > 0");
}

BranchedAdam BranchedAdam::for_net(const nn::BranchedNet& net, const nn::AdamConfig& config) {
  return {nn::AdamState::for_params(net.left, config), nn::AdamState::for_params(net.right, config),
          nn::AdamState::for_params(net.trunk, config)};
}

nn::MlpParams make_actor(int state_size, int action_size, int hidden, Rng& rng) {
  using nn::Activation;
  const std::array<nn::LayerSpec, 3> specs{{
      {hidden, Activation::Tanh, true, 0.0},
      {hidden, Activation::Tanh, true, 0.0},
      {action_size, Activation::Tanh, false, kOutputInitBound},
  }};
  return nn::MlpParams::create(state_size, specs, rng);
}

nn::BranchedNet make_critic(int state_size, int action_size, int hidden, Rng& rng) {
  using nn::Activation;
  const std::array<nn::LayerSpec, 1> branch{{{hidden, Activation::Relu, true, 0.0}}};
  const std::array<nn::LayerSpec, 2> trunk{{
      {hidden, Activation::Relu, true, 0.0},
      {1, Activation::Identity, false, kOutputInitBound},
  }};
  nn::BranchedNet net;
  net.left = nn::MlpParams::create(state_size, branch, rng);
  net.right = nn::MlpParams::create(action_size, branch, rng);
  net.trunk = nn::MlpParams::create(2 * hidden, trunk, rng);
  return net;
}

Vector select_action(const nn::MlpParams& actor, const Vector& state, double noise_scale, Rng& rng,
                     double action_scale) {
  Vector action = action_scale * nn::predict(actor, state.transpose()).row(0).transpose();
  if (noise_scale > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_scale);
    for (Eigen::Index i = 0; i < action.size(); ++i) action[i] += noise(rng);
  }
  return action;
}

double policy_gradient_step(nn::MlpParams& actor, nn::AdamState& adam, const Matrix& states,
                            double action_scale, const ActionValueFn& critic) {
  nn::ForwardPass pass = nn::forward(actor, states, nn::Mode::Train);
  const Matrix actions = action_scale * pass.output;
  Matrix dq_da;
  const Vector q = critic(states, actions, dq_da);
  const double batch = static_cast<double>(states.rows());
  // Minimise -mean(Q): dL/d(output) = -(1/B) dQ/da * scale.
  const Matrix grad = (-action_scale / batch) * dq_da;
  const nn::BackwardResult back = nn::backward(actor, pass.cache, grad);
  nn::adam_step(actor, back.params, adam);
  return q.mean();
}

double critic_regression_step(nn::BranchedNet& critic, BranchedAdam& adam, const Matrix& states,
                              const Matrix& actions, const Vector& targets) {
  nn::BranchedForward pass = nn::forward(critic, states, actions, nn::Mode::Train);
  const Vector diff = pass.output.col(0) - targets;
  const double loss = diff.squaredNorm() / static_cast<double>(diff.size());
  if (!std::isfinite(loss)) throw TrainingDivergence("non-finite critic loss");
  const Matrix grad = (2.0 / static_cast<double>(diff.size())) * diff;
  nn::BranchedGrads back = nn::backward(critic, pass, grad);
  nn::adam_step(critic.left, back.left, adam.left);
  nn::adam_step(critic.right, back.right, adam.right);
  nn::adam_step(critic.trunk, back.trunk, adam.trunk);
  return loss;
}

DdpgAgent::DdpgAgent(int state_size, int action_size, const AgentConfig& config, std::uint64_t seed)
    : config_(config), state_size_(state_size), action_size_(action_size),
      buffer_(static_cast<std::size_t>(config.capacity)) {
  config_.validate();
  if (state_size < 1 || action_size < 1) throw ConfigError("state and action sizes must be positive");
  Rng rng(seed);
  actor_ = make_actor(state_size, action_size, config.hidden_width, rng);
  critic_ = make_critic(state_size, action_size, config.hidden_width, rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_adam_ = nn::AdamState::for_params(actor_, {config.lr_actor});
  critic_adam_ = BranchedAdam::for_net(critic_, {config.lr_critic});
}

Vector DdpgAgent::act(const Vector& state) const {
  Rng unused;
  return irsnoma::select_action(actor_, state, 0.0, unused, config_.action_scale);
}

Vector DdpgAgent::select_action(const Vector& state, double noise_scale, Rng& rng) const {
  return irsnoma::select_action(actor_, state, noise_scale, rng, config_.action_scale);
}

void DdpgAgent::store(Transition t) {
  if (t.state.size() != state_size_ || t.next_state.size() != state_size_ || t.action.size() != action_size_) {
    throw std::invalid_argument("transition does not match agent dimensions");
  }
  buffer_.store(std::move(t));
}

Batch DdpgAgent::sample_batch(Rng& rng) const {
  const auto items = buffer_.sample_batch(static_cast<std::size_t>(config_.batch_size), rng);
  return Batch::from(items);
}

double DdpgAgent::critic_update(const Batch& batch) {
  const Matrix next_actions = config_.action_scale * nn::predict(target_actor_, batch.next_states);
  const Vector next_q = nn::predict(target_critic_, batch.next_states, next_actions).col(0);
  const Vector targets = batch.rewards + config_.discount * next_q;
  return critic_regression_step(critic_, critic_adam_, batch.states, batch.actions, targets);
}

double DdpgAgent::actor_update(const Batch& batch) {
  const nn::BranchedNet& critic = critic_;
  ActionValueFn q_fn = [&critic](const Matrix& states, const Matrix& actions, Matrix& dq_da) {
    // Batch statistics, not committed: the critic stays untouched.
    const nn::BranchedForward pass = nn::evaluate(critic, states, actions, nn::Mode::Train);
    const Matrix ones = Matrix::Ones(states.rows(), 1);
    dq_da = nn::backward(critic, pass, ones).right_input;
    return Vector(pass.output.col(0));
  };
  const double mean_q = policy_gradient_step(actor_, actor_adam_, batch.states, config_.action_scale, q_fn);
  if (!std::isfinite(mean_q)) throw TrainingDivergence("non-finite Q estimate in actor update");
  return mean_q;
}

void DdpgAgent::sync_targets(double tau) {
  nn::soft_update(target_actor_, actor_, tau);
  nn::soft_update(target_critic_, critic_, tau);
}

DdpgAgent::TrainStats DdpgAgent::train_step(Rng& rng) {
  const Batch batch = sample_batch(rng);
  TrainStats stats;
  stats.critic_loss = critic_update(batch);
  stats.mean_q = actor_update(batch);
  sync_targets();
  if (!all_finite()) throw TrainingDivergence("non-finite network parameter after update");
  return stats;
}

bool DdpgAgent::all_finite() const {
  for (const nn::MlpParams* p : {&actor_, &target_actor_, &critic_.left, &critic_.right, &critic_.trunk,
                                 &target_critic_.left, &target_critic_.right, &target_critic_.trunk}) {
    if (!p->all_finite()) return false;
  }
  return true;
}

namespace {

void write_vector(std::ostream& os, const Vector& v) {
  io::write_doubles(os, {v.data(), static_cast<std::size_t>(v.size())});
}

Vector read_vector(std::istream& is, Eigen::Index size) {
  Vector v(size);
  io::read_doubles(is, {v.data(), static_cast<std::size_t>(size)});
  return v;
}

}  // namespace

void DdpgAgent::save(std::ostream& os) const {
  io::write_magic(os, "IRSDDPG1");
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(state_size_));
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(action_size_));
  const AgentConfig& c = config_;
  for (double x : {c.discount, c.tau, c.lr_actor, c.lr_critic, c.noise_scale, c.noise_decay, c.noise_floor,
                   c.action_scale}) {
    io::write_pod(os, x);
  }
  for (int x : {c.batch_size, c.capacity, c.hidden_width}) io::write_pod<std::int32_t>(os, x);

  nn::save(os, actor_);
  nn::save(os, target_actor_);
  for (const nn::BranchedNet* net : {&critic_, &target_critic_}) {
    nn::save(os, net->left);
    nn::save(os, net->right);
    nn::save(os, net->trunk);
  }
  nn::save(os, actor_adam_);
  nn::save(os, critic_adam_.left);
  nn::save(os, critic_adam_.right);
  nn::save(os, critic_adam_.trunk);

  io::write_pod<std::uint64_t>(os, buffer_.capacity());
  io::write_pod<std::uint64_t>(os, buffer_.size());
  io::write_pod<std::uint64_t>(os, buffer_.cursor());
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    const Transition& t = buffer_.at(i);
    write_vector(os, t.state);
    write_vector(os, t.action);
    io::write_pod(os, t.reward);
    write_vector(os, t.next_state);
  }
  if (!os) throw std::runtime_error("failed writing agent checkpoint");
}

DdpgAgent DdpgAgent::load(std::istream& is) {
  io::expect_magic(is, "IRSDDPG1");
  DdpgAgent agent;
  agent.state_size_ = static_cast<int>(io::read_pod<std::uint32_t>(is));
  agent.action_size_ = static_cast<int>(io::read_pod<std::uint32_t>(is));
  AgentConfig& c = agent.config_;
  for (double* x : {&c.discount, &c.tau, &c.lr_actor, &c.lr_critic, &c.noise_scale, &c.noise_decay,
                    &c.noise_floor, &c.action_scale}) {
    *x = io::read_pod<double>(is);
  }
  for (int* x : {&c.batch_size, &c.capacity, &c.hidden_width}) *x = io::read_pod<std::int32_t>(is);
  c.validate();

  agent.actor_ = nn::load_mlp(is);
  agent.target_actor_ = nn::load_mlp(is);
  for (nn::BranchedNet* net : {&agent.critic_, &agent.target_critic_}) {
    net->left = nn::load_mlp(is);
    net->right = nn::load_mlp(is);
    net->trunk = nn::load_mlp(is);
  }
  agent.actor_adam_ = nn::load_adam(is);
  agent.critic_adam_.left = nn::load_adam(is);
  agent.critic_adam_.right = nn::load_adam(is);
  agent.critic_adam_.trunk = nn::load_adam(is);
  if (agent.actor_.input_size() != agent.state_size_ || agent.actor_.output_size() != agent.action_size_) {
    throw std::runtime_error("agent checkpoint: actor shape does not match header");
  }

  const auto capacity = io::read_pod<std::uint64_t>(is);
  const auto count = io::read_pod<std::uint64_t>(is);
  const auto cursor = io::read_pod<std::uint64_t>(is);
  if (count > capacity) throw std::runtime_error("agent checkpoint: corrupt replay metadata");
  std::vector<Transition> items;
  items.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Transition t;
    t.state = read_vector(is, agent.state_size_);
    t.action = read_vector(is, agent.action_size_);
    t.reward = io::read_pod<double>(is);
    t.next_state = read_vector(is, agent.state_size_);
    items.push_back(std::move(t));
  }
  agent.buffer_ = ReplayBuffer::restore(capacity, std::move(items), cursor);
  return agent;
}

}  // namespace irsnoma
