#pragma once

#include "marl/common.hpp"
#include "marl/env/world.hpp"
#include "marl/nn/layers.hpp"
#include "marl/rng.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace marl::qmix {

enum class TrunkKind { lstm, attention };

struct EpsilonSchedule {
  Scalar start = 1.0;
  Scalar end = 0.05;
  int64_t decay_steps = 10000;

  Scalar at(int64_t step) const {
    if (decay_steps <= 0) return end;
    const Scalar frac = std::min<Scalar>(1.0, static_cast<Scalar>(step) / decay_steps);
    return start + (end - start) * frac;
  }

  bool operator==(const EpsilonSchedule&) const = default;
};

struct AlgorithmConfig {
  Scalar gamma = 0.99;
  Scalar learning_rate = 5e-4;
  Scalar critic_learning_rate = 5e-4;  // ensemble members
  int batch_size = 32;
  int target_sync_interval = 200;
  EpsilonSchedule epsilon;
  int ensemble_size = 2;
  // Std-of-estimates gate; +inf never fires (the "disabled" sentinel).
  Scalar uncertainty_threshold = 0.5;
  TrunkKind trunk = TrunkKind::attention;
  int hidden_dim = 64;
  int mixer_embed_dim = 32;
  bool agent_id_onehot = true;

  bool operator==(const AlgorithmConfig&) const = default;
};

void validate(const AlgorithmConfig& config);

/// Per-agent LSTM carry, one column per agent. Ignored by the attention trunk.
struct RecurrentState {
  Matrix hidden;
  Matrix cell;
};

/// Shared-parameter per-agent utility network: encoder -> trunk (lstm cell or
/// self-attention over the agents' tokens) -> linear head with one Q per
/// action. Inputs are sample-major token columns, n_agents per sample.
class AgentNetwork {
 public:
  AgentNetwork(const std::string& name, int input_dim, int n_agents, TrunkKind trunk,
               int hidden_dim, Rng& init_rng);

  /// tokens: input_dim x (n_samples * n_agents). For the lstm trunk, `state`
  /// (when non-null) is consumed and replaced; a null state means zeros.
  /// Returns kNumActions x (n_samples * n_agents).
  Matrix forward(const Matrix& tokens, RecurrentState* state = nullptr);
  /// Accumulates parameter grads from the last forward (zero-state path).
  void backward(const Matrix& upstream);

  std::vector<nn::ParamTensor*> parameters();
  void copy_from(AgentNetwork& other);

  RecurrentState zero_state() const;
  TrunkKind trunk() const { return trunk_; }
  int input_dim() const { return encoder_.in_dim(); }
  int n_agents() const { return n_agents_; }

 private:
  TrunkKind trunk_;
  int n_agents_;
  nn::Dense encoder_;
  std::optional<nn::LstmCell> lstm_;
  std::optional<nn::Attention> attention_;
  nn::Dense head_;
};

/// State-conditioned monotonic mixer. The hypernetworks map the joint
/// observation to mixing weights; taking their absolute value keeps
/// dQ_tot/dq_i >= 0 for every agent.
class Mixer {
 public:
  Mixer(const std::string& name, int state_dim, int n_agents, int embed_dim, Rng& init_rng);

  /// chosen_q: n_agents x batch; state: state_dim x batch. Returns Q_tot per
  /// batch column.
  Vector forward(const Matrix& chosen_q, const Matrix& state);
  /// upstream: dL/dQ_tot per batch column. Returns dL/d chosen_q.
  Matrix backward(const Vector& upstream);

  std::vector<nn::ParamTensor*> parameters();
  void copy_from(Mixer& other);
  int embed_dim() const { return embed_dim_; }
  int n_agents() const { return n_agents_; }

  nn::Dense& hypernet_w1() { return hyper_w1_; }
  nn::Dense& hypernet_b1() { return hyper_b1_; }
  nn::Dense& hypernet_w2() { return hyper_w2_; }
  nn::Mlp& hypernet_b2() { return hyper_b2_; }

 private:
  int n_agents_;
  int embed_dim_;
  nn::Dense hyper_w1_;  // state -> embed*n_agents (flattened W1)
  nn::Dense hyper_b1_;  // state -> embed
  nn::Dense hyper_w2_;  // state -> embed
  nn::Mlp hyper_b2_;    // state -> embed -> 1

  Matrix q_cache_, w1_raw_cache_, w2_raw_cache_, pre_cache_, hidden_cache_;
};

/// All networks of one QMIX learner: live and target copies plus the
/// ensemble of scalar value estimators used for the uncertainty signal.
class QmixModel {
 public:
  QmixModel(const env::WorldConfig& world, const AlgorithmConfig& algo, uint64_t init_seed);

  int n_agents() const { return n_agents_; }
  int state_dim() const { return state_dim_; }
  int agent_input_dim() const { return agent_input_dim_; }
  const AlgorithmConfig& algorithm() const { return algo_; }

  AgentNetwork& agent_net() { return agent_net_; }
  AgentNetwork& target_agent_net() { return target_agent_net_; }
  Mixer& mixer() { return mixer_; }
  Mixer& target_mixer() { return target_mixer_; }
  std::vector<nn::Mlp>& ensemble() { return ensemble_; }

  /// Hard copy live -> target.
  void sync_targets();

  /// Live agent net + mixer parameters (one Adam group).
  std::vector<nn::ParamTensor*> main_parameters();
  /// Every tensor, including targets and ensemble (for checkpointing).
  std::vector<nn::ParamTensor*> all_parameters();

  /// Token columns for every agent: per-agent observation plus the agent
  /// one-hot when configured. One column per agent.
  Matrix agent_tokens(const env::WorldState& state) const;
  /// Ensemble-member input: joint observation followed by the stacked agent
  /// one-hot block.
  Vector ensemble_input(const Vector& joint_observation) const;

  RecurrentState zero_state() { return agent_net_.zero_state(); }

 private:
  AlgorithmConfig algo_;
  int n_agents_;
  int state_dim_;
  int agent_input_dim_;
  AgentNetwork agent_net_, target_agent_net_;
  Mixer mixer_, target_mixer_;
  std::vector<nn::Mlp> ensemble_;
};

}  // namespace marl::qmix
