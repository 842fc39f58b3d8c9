#include "marl/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace marl::nn {

GradCheckReport grad_check(const std::function<Scalar()>& loss,
                           const std::function<void()>& forward_backward,
                           const std::vector<ParamTensor*>& params,
                           Scalar fd_step) {
  forward_backward();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const ParamTensor* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    ParamTensor& p = *params[pi];
    for (Index j = 0; j < p.value.cols(); ++j) {
      for (Index i = 0; i < p.value.rows(); ++i) {
        const Scalar original = p.value(i, j);
        p.value(i, j) = original + fd_step;
        const Scalar plus = loss();
        p.value(i, j) = original - fd_step;
        const Scalar minus = loss();
        p.value(i, j) = original;

        const Scalar fd = (plus - minus) / (2 * fd_step);
        const Scalar a = analytic[pi](i, j);
        const Scalar denom = std::max({std::abs(a), std::abs(fd), Scalar(1e-6)});
        const Scalar rel = std::abs(a - fd) / denom;
        ++report.n_checked;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = p.name;
          report.worst_row = i;
          report.worst_col = j;
        }
      }
    }
  }
  return report;
}

}  // namespace marl::nn
