#pragma once

#include "marl/common.hpp"
#include "marl/nn/layers.hpp"

#include <functional>
#include <string>
#include <vector>

namespace marl::nn {

struct GradCheckReport {
  Scalar max_rel_error = 0.0;
  std::string worst_param;
  Index worst_row = 0;
  Index worst_col = 0;
  long n_checked = 0;

  bool within(Scalar tolerance) const { return max_rel_error < tolerance; }
};

/// Compares analytic gradients against central finite differences.
///
/// `forward_backward` must zero the grads, run a full forward+backward pass,
/// and leave analytic grads in the params. `loss` must evaluate the same
/// scalar without touching grads. Every parameter entry is perturbed by
/// +/- fd_step. The relative error denominator is floored at 1e-6 so that
/// dead entries (both grads ~ 0) do not divide roundoff noise by itself.
GradCheckReport grad_check(const std::function<Scalar()>& loss,
                           const std::function<void()>& forward_backward,
                           const std::vector<ParamTensor*>& params,
                           Scalar fd_step = 1e-5);

}  // namespace marl::nn
