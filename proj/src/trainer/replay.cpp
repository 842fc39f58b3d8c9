#include "marl/trainer/replay.hpp"

#include <stdexcept>

namespace marl::trainer {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
  storage_.reserve(capacity);
}

void ReplayBuffer::push(Transition transition) {
  if (storage_.size() < capacity_) {
    storage_.push_back(std::move(transition));
    return;
  }
  storage_[next_overwrite_] = std::move(transition);
  next_overwrite_ = (next_overwrite_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(int batch_size, Rng& rng) const {
  if (storage_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    out.push_back(&storage_[rng.uniform_int(static_cast<int>(storage_.size()))]);
  }
  return out;
}

}  // namespace marl::trainer
