#pragma once

#include "marl/nn/adam.hpp"
#include "marl/nn/checkpoint.hpp"
#include "marl/qmix/model.hpp"
#include "marl/trainer/replay.hpp"

namespace marl::qmix {

/// y = r + gamma * (1 - terminal) * q_tot_next, elementwise over the batch.
Vector td_targets(Scalar gamma, const Vector& rewards, const std::vector<bool>& terminal,
                  const Vector& q_tot_next);

/// Std over the population (divides by n, not n-1); the uncertainty gate
/// compares this against the threshold.
Scalar population_std(const std::vector<Scalar>& values);

struct TdLossResult {
  Scalar loss = 0.0;
  Scalar q_tot_mean = 0.0;
  Scalar mean_abs_td_error = 0.0;
};

/// Squared Bellman error of Q_tot on an explicit batch: targets come from
/// the frozen copies (per-agent argmax through the target net, then the
/// target mixer). Zeroes and then fills the live networks' gradients; does
/// not step the optimizer.
TdLossResult td_loss(QmixModel& model, const std::vector<const trainer::Transition*>& batch);

/// What one acting step computed, before any exploration or expert override.
struct ActionSelection {
  std::vector<int> actions;  // per-agent greedy argmax, ties to the lowest action
  Matrix q_values;           // kNumActions x n_agents from the live network
  Scalar uncertainty = 0.0;  // population std over the value-estimate ensemble
};

struct UpdateMetrics {
  Scalar loss = 0.0;           // mean squared TD error of Q_tot
  Scalar ensemble_loss = 0.0;  // mean over ensemble members of their own MSE
  Scalar q_tot_mean = 0.0;
  Scalar mean_abs_td_error = 0.0;
  int64_t update_index = 0;
};

/// Owns the QMIX networks and their optimizer state; exposes action
/// selection for rollouts and one gradient update per call.
class Learner {
 public:
  Learner(const env::WorldConfig& world, const AlgorithmConfig& algo, uint64_t init_seed);

  QmixModel& model() { return model_; }
  const QmixModel& model() const { return model_; }
  int64_t update_count() const { return update_count_; }

  /// Greedy joint action plus the ensemble uncertainty at this state.
  /// Advances `recurrent` for the lstm trunk. `with_uncertainty` skips the
  /// ensemble/mixer passes when false (evaluation does not gate).
  ActionSelection select_actions(const env::WorldState& state, RecurrentState* recurrent,
                                 bool with_uncertainty);

  /// Per-agent coin flip: with probability epsilon the agent's action is
  /// resampled uniformly. Draws (coin[, action]) per agent in index order.
  static void apply_epsilon(std::vector<int>& actions, Scalar epsilon, Rng& rng);

  /// One TD step on the main networks, then one step per ensemble member,
  /// each on its own independently sampled minibatch (kept separate so the
  /// members stay diverse). Syncs targets every target_sync_interval updates.
  UpdateMetrics update(const trainer::ReplayBuffer& replay, Rng& sample_rng);

  /// All network parameters, Adam moments, and counters, keyed by name.
  void save(nn::Checkpoint& checkpoint);
  void load(const nn::Checkpoint& checkpoint);

 private:
  QmixModel model_;
  nn::AdamState main_opt_;
  std::vector<nn::AdamState> ensemble_opts_;  // one per member
  int64_t update_count_ = 0;
};

}  // namespace marl::qmix
