#pragma once

#include "marl/common.hpp"
#include "marl/nn/layers.hpp"

#include <cstdint>
#include <vector>

namespace marl::nn {

struct AdamConfig {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
};

/// Optimizer state for one parameter group; moment buffers are aligned
/// index-for-index with the parameter list they were built from.
struct AdamState {
  AdamConfig config;
  int64_t step_count = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

AdamState make_adam_state(const std::vector<ParamTensor*>& params, const AdamConfig& config);

/// One bias-corrected Adam update. Throws NumericError on non-finite grads;
/// zeroes all grads afterwards.
void adam_step(const std::vector<ParamTensor*>& params, AdamState& state);

}  // namespace marl::nn
