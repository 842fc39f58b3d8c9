#include "marl/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace marl::nn {

AdamState make_adam_state(const std::vector<ParamTensor*>& params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  state.first_moment.reserve(params.size());
  state.second_moment.reserve(params.size());
  for (const ParamTensor* p : params) {
    state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    state.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return state;
}

void adam_step(const std::vector<ParamTensor*>& params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: state built for a different parameter list");
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;
  const Scalar correction1 = Scalar(1) - std::pow(c.beta1, static_cast<Scalar>(state.step_count));
  const Scalar correction2 = Scalar(1) - std::pow(c.beta2, static_cast<Scalar>(state.step_count));

  for (size_t i = 0; i < params.size(); ++i) {
    ParamTensor& p = *params[i];
    check_finite(p.grad, "adam_step grad of " + p.name);
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = c.beta1 * m + (Scalar(1) - c.beta1) * p.grad;
    v = c.beta2 * v + (Scalar(1) - c.beta2) * p.grad.cwiseProduct(p.grad);
    const Matrix m_hat = m / correction1;
    const Matrix v_hat = v / correction2;
    p.value.array() -= c.learning_rate * m_hat.array() / (v_hat.array().sqrt() + c.epsilon);
    check_finite(p.value, "adam_step value of " + p.name);
    p.zero_grad();
  }
}

}  // namespace marl::nn
