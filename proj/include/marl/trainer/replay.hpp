#pragma once

#include "marl/common.hpp"
#include "marl/rng.hpp"

#include <vector>

namespace marl::trainer {

/// One environment step as stored for off-policy updates. Recurrent state is
/// not stored: updates run the networks from a zero carry, so the buffer
/// stays a plain SARS ring.
struct Transition {
  Vector observation;
  std::vector<int> actions;
  Scalar reward = 0.0;
  Vector next_observation;
  bool terminal = false;  // environment termination only; truncation still bootstraps
};

/// Fixed-capacity FIFO ring. Sampling is uniform with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition transition);
  std::vector<const Transition*> sample(int batch_size, Rng& rng) const;

  size_t size() const { return storage_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& operator[](size_t i) const { return storage_[i]; }

 private:
  size_t capacity_;
  size_t next_overwrite_ = 0;
  std::vector<Transition> storage_;
};

}  // namespace marl::trainer
