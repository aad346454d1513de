#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "irsnoma/types.hpp"

namespace irsnoma {

struct Transition {
  Vector state;
  Vector action;  // raw, before projection
  double reward = 0.0;
  Vector next_state;
};

/// Transitions stacked one per row.
struct Batch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;

  static Batch from(std::span<const Transition> items);
  Eigen::Index size() const { return rewards.size(); }
};

class BufferNotFull : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity ring; once full the oldest transition is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Transition t);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool full() const { return items_.size() == capacity_; }
  /// Slot the next store() writes to.
  std::size_t cursor() const { return cursor_; }
  const Transition& at(std::size_t slot) const { return items_.at(slot); }

  /// Uniform draws with replacement. Training only starts on a full buffer,
  /// so sampling a partially filled buffer throws BufferNotFull.
  std::vector<Transition> sample_batch(std::size_t count, Rng& rng) const;
  std::vector<std::size_t> sample_slots(std::size_t count, Rng& rng) const;

  /// Rebuilds a buffer from checkpointed slots and cursor.
  static ReplayBuffer restore(std::size_t capacity, std::vector<Transition> items, std::size_t cursor);

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t cursor_ = 0;
};

}  // namespace irsnoma
