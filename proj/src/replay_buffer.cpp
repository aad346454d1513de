#include "irsnoma/replay_buffer.hpp"

#include <string>

namespace irsnoma {

Batch Batch::from(std::span<const Transition> items) {
  if (items.empty()) throw std::invalid_argument("empty batch");
  const auto n = static_cast<Eigen::Index>(items.size());
  Batch b{Matrix(n, items[0].state.size()), Matrix(n, items[0].action.size()), Vector(n),
          Matrix(n, items[0].next_state.size())};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = items[static_cast<std::size_t>(i)];
    b.states.row(i) = t.state.transpose();
    b.actions.row(i) = t.action.transpose();
    b.rewards[i] = t.reward;
    b.next_states.row(i) = t.next_state.transpose();
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::store(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_slots(std::size_t count, Rng& rng) const {
  if (!full()) {
    throw BufferNotFull("replay buffer holds " + std::to_string(items_.size()) + " of " +
                        std::to_string(capacity_) + " transitions");
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(count);
  for (auto& slot : out) slot = pick(rng);
  return out;
}

std::vector<Transition> ReplayBuffer::sample_batch(std::size_t count, Rng& rng) const {
  std::vector<Transition> out;
  out.reserve(count);
  for (std::size_t slot : sample_slots(count, rng)) out.push_back(items_[slot]);
  return out;
}

ReplayBuffer ReplayBuffer::restore(std::size_t capacity, std::vector<Transition> items, std::size_t cursor) {
  if (items.size() > capacity || cursor >= capacity) throw std::invalid_argument("inconsistent replay checkpoint");
  ReplayBuffer buf(capacity);
  buf.items_ = std::move(items);
  buf.cursor_ = cursor;
  return buf;
}

}  // namespace irsnoma
