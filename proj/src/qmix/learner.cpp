#include "marl/qmix/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace marl::qmix {

Vector td_targets(Scalar gamma, const Vector& rewards, const std::vector<bool>& terminal,
                  const Vector& q_tot_next) {
  const Index batch = rewards.size();
  if (q_tot_next.size() != batch || static_cast<Index>(terminal.size()) != batch) {
    throw std::invalid_argument("td_targets: batch size mismatch");
  }
  Vector y(batch);
  for (Index b = 0; b < batch; ++b) {
    y(b) = rewards(b) + (terminal[b] ? Scalar(0) : gamma * q_tot_next(b));
  }
  return y;
}

Scalar population_std(const std::vector<Scalar>& values) {
  if (values.empty()) throw std::invalid_argument("population_std: empty input");
  Scalar mean = 0;
  for (Scalar v : values) mean += v;
  mean /= static_cast<Scalar>(values.size());
  Scalar var = 0;
  for (Scalar v : values) var += (v - mean) * (v - mean);
  var /= static_cast<Scalar>(values.size());
  return std::sqrt(var);
}

namespace {

/// Per-agent argmax over a kNumActions x n block; ties go to the lowest action.
std::vector<int> greedy_from_q(const Matrix& q) {
  std::vector<int> actions(q.cols());
  for (Index a = 0; a < q.cols(); ++a) {
    int best = 0;
    for (int act = 1; act < kNumActions; ++act) {
      if (q(act, a) > q(best, a)) best = act;
    }
    actions[a] = best;
  }
  return actions;
}

struct BatchArrays {
  Matrix states, next_states;   // state_dim x B
  Matrix tokens, next_tokens;   // agent_input_dim x (B * n)
  Vector rewards;
  std::vector<bool> terminal;
};

BatchArrays assemble(const QmixModel& model, const std::vector<const trainer::Transition*>& batch) {
  const int n = model.n_agents();
  const Index b_size = static_cast<Index>(batch.size());
  BatchArrays arrays;
  arrays.states.resize(model.state_dim(), b_size);
  arrays.next_states.resize(model.state_dim(), b_size);
  arrays.tokens.resize(model.agent_input_dim(), b_size * n);
  arrays.next_tokens.resize(model.agent_input_dim(), b_size * n);
  arrays.rewards.resize(b_size);
  arrays.terminal.resize(b_size);
  for (Index b = 0; b < b_size; ++b) {
    const trainer::Transition& t = *batch[b];
    arrays.states.col(b) = t.observation;
    arrays.next_states.col(b) = t.next_observation;
    arrays.rewards(b) = t.reward;
    arrays.terminal[b] = t.terminal;
    arrays.tokens.middleCols(b * n, n) =
        model.agent_tokens(env::state_from_observation(t.observation, n));
    arrays.next_tokens.middleCols(b * n, n) =
        model.agent_tokens(env::state_from_observation(t.next_observation, n));
  }
  return arrays;
}

/// Bootstrap targets through the frozen copies: decentralized argmax per
/// agent, mixed by the target mixer.
Vector bootstrap_targets(QmixModel& model, const BatchArrays& arrays) {
  const int n = model.n_agents();
  const Index b_size = arrays.rewards.size();
  const Matrix q_next = model.target_agent_net().forward(arrays.next_tokens);
  Matrix max_next(n, b_size);
  for (Index b = 0; b < b_size; ++b) {
    for (int a = 0; a < n; ++a) max_next(a, b) = q_next.col(b * n + a).maxCoeff();
  }
  const Vector q_tot_next = model.target_mixer().forward(max_next, arrays.next_states);
  return td_targets(model.algorithm().gamma, arrays.rewards, arrays.terminal, q_tot_next);
}

}  // namespace

TdLossResult td_loss(QmixModel& model, const std::vector<const trainer::Transition*>& batch) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  const int n = model.n_agents();
  const Index b_size = static_cast<Index>(batch.size());
  const BatchArrays arrays = assemble(model, batch);
  const Vector y = bootstrap_targets(model, arrays);

  auto params = model.main_parameters();
  nn::zero_grads(params);
  const Matrix q_live = model.agent_net().forward(arrays.tokens);
  Matrix chosen(n, b_size);
  for (Index b = 0; b < b_size; ++b) {
    for (int a = 0; a < n; ++a) chosen(a, b) = q_live(batch[b]->actions[a], b * n + a);
  }
  const Vector q_tot = model.mixer().forward(chosen, arrays.states);
  const Vector td_error = q_tot - y;

  const Vector d_q_tot = (2.0 / static_cast<Scalar>(b_size)) * td_error;
  const Matrix d_chosen = model.mixer().backward(d_q_tot);
  Matrix d_q_live = Matrix::Zero(kNumActions, b_size * n);
  for (Index b = 0; b < b_size; ++b) {
    for (int a = 0; a < n; ++a) d_q_live(batch[b]->actions[a], b * n + a) = d_chosen(a, b);
  }
  model.agent_net().backward(d_q_live);

  TdLossResult result;
  result.loss = td_error.squaredNorm() / static_cast<Scalar>(b_size);
  result.q_tot_mean = q_tot.mean();
  result.mean_abs_td_error = td_error.cwiseAbs().mean();
  return result;
}

Learner::Learner(const env::WorldConfig& world, const AlgorithmConfig& algo, uint64_t init_seed)
    : model_(world, algo, init_seed) {
  main_opt_ = nn::make_adam_state(model_.main_parameters(), {.learning_rate = algo.learning_rate});
  ensemble_opts_.reserve(model_.ensemble().size());
  for (auto& member : model_.ensemble()) {
    ensemble_opts_.push_back(
        nn::make_adam_state(member.parameters(), {.learning_rate = algo.critic_learning_rate}));
  }
}

ActionSelection Learner::select_actions(const env::WorldState& state, RecurrentState* recurrent,
                                        bool with_uncertainty) {
  ActionSelection out;
  out.q_values = model_.agent_net().forward(model_.agent_tokens(state), recurrent);
  out.actions = greedy_from_q(out.q_values);
  if (with_uncertainty) {
    const Vector joint = env::joint_observation(state);
    const Matrix input = model_.ensemble_input(joint);
    std::vector<Scalar> estimates;
    estimates.reserve(model_.ensemble().size() + 1);
    for (auto& member : model_.ensemble()) {
      estimates.push_back(member.forward(input)(0, 0));
    }
    Matrix chosen(model_.n_agents(), 1);
    for (int a = 0; a < model_.n_agents(); ++a) chosen(a, 0) = out.q_values(out.actions[a], a);
    estimates.push_back(model_.mixer().forward(chosen, joint)(0));
    out.uncertainty = population_std(estimates);
  }
  return out;
}

void Learner::apply_epsilon(std::vector<int>& actions, Scalar epsilon, Rng& rng) {
  for (int& action : actions) {
    if (rng.uniform() < epsilon) action = rng.uniform_int(kNumActions);
  }
}

UpdateMetrics Learner::update(const trainer::ReplayBuffer& replay, Rng& sample_rng) {
  const int batch_size = model_.algorithm().batch_size;
  const auto main_batch = replay.sample(batch_size, sample_rng);
  const TdLossResult main_result = td_loss(model_, main_batch);
  auto main_params = model_.main_parameters();
  nn::adam_step(main_params, main_opt_);

  UpdateMetrics metrics;
  metrics.loss = main_result.loss;
  metrics.q_tot_mean = main_result.q_tot_mean;
  metrics.mean_abs_td_error = main_result.mean_abs_td_error;

  // Each member regresses toward the bootstrap target on its own draw.
  Scalar ensemble_loss = 0;
  for (size_t m = 0; m < model_.ensemble().size(); ++m) {
    const auto member_batch = replay.sample(batch_size, sample_rng);
    const BatchArrays arrays = assemble(model_, member_batch);
    const Vector y = bootstrap_targets(model_, arrays);
    Matrix inputs(model_.state_dim() + model_.n_agents() * model_.n_agents(),
                  static_cast<Index>(member_batch.size()));
    for (Index b = 0; b < inputs.cols(); ++b) {
      inputs.col(b) = model_.ensemble_input(member_batch[b]->observation);
    }
    nn::Mlp& member = model_.ensemble()[m];
    auto member_params = member.parameters();
    nn::zero_grads(member_params);
    const Matrix v = member.forward(inputs);  // 1 x batch
    const Matrix err = v - y.transpose();
    ensemble_loss += err.squaredNorm() / static_cast<Scalar>(member_batch.size());
    member.backward((2.0 / static_cast<Scalar>(member_batch.size())) * err);
    nn::adam_step(member_params, ensemble_opts_[m]);
  }
  metrics.ensemble_loss = ensemble_loss / static_cast<Scalar>(model_.ensemble().size());

  ++update_count_;
  if (update_count_ % model_.algorithm().target_sync_interval == 0) model_.sync_targets();
  metrics.update_index = update_count_;
  return metrics;
}

namespace {

void save_adam(nn::Checkpoint& checkpoint, const std::string& prefix,
               const std::vector<nn::ParamTensor*>& params, const nn::AdamState& opt) {
  checkpoint.put_tensor(prefix + "/step_count",
                        Matrix::Constant(1, 1, static_cast<Scalar>(opt.step_count)));
  for (size_t i = 0; i < params.size(); ++i) {
    checkpoint.put_tensor(prefix + "/m/" + params[i]->name, opt.first_moment[i]);
    checkpoint.put_tensor(prefix + "/v/" + params[i]->name, opt.second_moment[i]);
  }
}

void load_adam(const nn::Checkpoint& checkpoint, const std::string& prefix,
               const std::vector<nn::ParamTensor*>& params, nn::AdamState& opt) {
  opt.step_count =
      static_cast<int64_t>(std::llround(checkpoint.tensor(prefix + "/step_count")(0, 0)));
  for (size_t i = 0; i < params.size(); ++i) {
    opt.first_moment[i] = checkpoint.tensor(prefix + "/m/" + params[i]->name);
    opt.second_moment[i] = checkpoint.tensor(prefix + "/v/" + params[i]->name);
  }
}

}  // namespace

void Learner::save(nn::Checkpoint& checkpoint) {
  for (const nn::ParamTensor* p : model_.all_parameters()) {
    checkpoint.put_tensor(p->name, p->value);
  }
  checkpoint.put_tensor("learner/update_count",
                        Matrix::Constant(1, 1, static_cast<Scalar>(update_count_)));
  save_adam(checkpoint, "adam/main", model_.main_parameters(), main_opt_);
  for (size_t m = 0; m < model_.ensemble().size(); ++m) {
    save_adam(checkpoint, "adam/ensemble/" + std::to_string(m),
              model_.ensemble()[m].parameters(), ensemble_opts_[m]);
  }
}

void Learner::load(const nn::Checkpoint& checkpoint) {
  for (nn::ParamTensor* p : model_.all_parameters()) {
    const Matrix& stored = checkpoint.tensor(p->name);
    if (stored.rows() != p->value.rows() || stored.cols() != p->value.cols()) {
      throw ConfigError("checkpoint tensor " + p->name + " has mismatched shape");
    }
    p->value = stored;
    p->grad.setZero();
  }
  update_count_ =
      static_cast<int64_t>(std::llround(checkpoint.tensor("learner/update_count")(0, 0)));
  load_adam(checkpoint, "adam/main", model_.main_parameters(), main_opt_);
  for (size_t m = 0; m < model_.ensemble().size(); ++m) {
    load_adam(checkpoint, "adam/ensemble/" + std::to_string(m),
              model_.ensemble()[m].parameters(), ensemble_opts_[m]);
  }
}

}  // namespace marl::qmix
