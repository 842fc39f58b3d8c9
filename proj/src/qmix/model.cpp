#include "marl/qmix/model.hpp"

#include <cmath>
#include <stdexcept>

namespace marl::qmix {

void validate(const AlgorithmConfig& config) {
  if (!(config.gamma >= 0 && config.gamma < 1)) throw ConfigError("algorithm.gamma must be in [0,1)");
  if (!(config.learning_rate > 0)) throw ConfigError("algorithm.learning_rate must be > 0");
  if (!(config.critic_learning_rate > 0)) {
    throw ConfigError("algorithm.critic_learning_rate must be > 0");
  }
  if (config.batch_size < 1) throw ConfigError("algorithm.batch_size must be >= 1");
  if (config.target_sync_interval < 1) {
    throw ConfigError("algorithm.target_sync_interval must be >= 1");
  }
  if (config.ensemble_size < 1) throw ConfigError("algorithm.ensemble_size must be >= 1");
  if (std::isnan(config.uncertainty_threshold) || config.uncertainty_threshold < 0) {
    throw ConfigError("algorithm.uncertainty_threshold must be >= 0 (or .inf to disable)");
  }
  if (config.hidden_dim < 1) throw ConfigError("algorithm.hidden_dim must be >= 1");
  if (config.mixer_embed_dim < 1) throw ConfigError("algorithm.mixer_embed_dim must be >= 1");
  if (config.epsilon.start < 0 || config.epsilon.start > 1 || config.epsilon.end < 0 ||
      config.epsilon.end > 1) {
    throw ConfigError("algorithm.epsilon start/end must be in [0,1]");
  }
  if (config.epsilon.decay_steps < 1) throw ConfigError("algorithm.epsilon decay_steps must be >= 1");
}

AgentNetwork::AgentNetwork(const std::string& name, int input_dim, int n_agents, TrunkKind trunk,
                           int hidden_dim, Rng& init_rng)
    : trunk_(trunk),
      n_agents_(n_agents),
      encoder_(name + "/encoder", input_dim, hidden_dim, nn::Activation::relu, init_rng),
      head_(name + "/head", hidden_dim, kNumActions, nn::Activation::identity, init_rng) {
  if (trunk_ == TrunkKind::lstm) {
    lstm_.emplace(name + "/lstm", hidden_dim, hidden_dim, init_rng);
  } else {
    attention_.emplace(name + "/attention", hidden_dim, init_rng);
  }
}

RecurrentState AgentNetwork::zero_state() const {
  const int h = encoder_.out_dim();
  return {Matrix::Zero(h, n_agents_), Matrix::Zero(h, n_agents_)};
}

Matrix AgentNetwork::forward(const Matrix& tokens, RecurrentState* state) {
  if (tokens.cols() % n_agents_ != 0) {
    throw std::invalid_argument("AgentNetwork: token count not a multiple of n_agents");
  }
  Matrix encoded = encoder_.forward(tokens);
  Matrix trunk_out;
  if (trunk_ == TrunkKind::lstm) {
    nn::LstmCell::State prev;
    if (state != nullptr) {
      prev = {state->hidden, state->cell};
    } else {
      prev = nn::LstmCell::State::zero(lstm_->hidden_dim(), encoded.cols());
    }
    nn::LstmCell::State next = lstm_->forward(encoded, prev);
    if (state != nullptr) {
      state->hidden = next.hidden;
      state->cell = next.cell;
    }
    trunk_out = next.hidden;
  } else {
    trunk_out = attention_->forward(encoded, n_agents_);
  }
  return head_.forward(trunk_out);
}

void AgentNetwork::backward(const Matrix& upstream) {
  Matrix g = head_.backward(upstream);
  if (trunk_ == TrunkKind::lstm) {
    Matrix d_cell = Matrix::Zero(g.rows(), g.cols());
    g = lstm_->backward(g, d_cell).input;
  } else {
    g = attention_->backward(g);
  }
  encoder_.backward(g);
}

std::vector<nn::ParamTensor*> AgentNetwork::parameters() {
  auto out = encoder_.parameters();
  auto trunk_params = trunk_ == TrunkKind::lstm ? lstm_->parameters() : attention_->parameters();
  out.insert(out.end(), trunk_params.begin(), trunk_params.end());
  auto head_params = head_.parameters();
  out.insert(out.end(), head_params.begin(), head_params.end());
  return out;
}

void AgentNetwork::copy_from(AgentNetwork& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) {
    throw std::logic_error("AgentNetwork::copy_from: structurally different networks");
  }
  for (size_t i = 0; i < mine.size(); ++i) mine[i]->value = theirs[i]->value;
}

Mixer::Mixer(const std::string& name, int state_dim, int n_agents, int embed_dim, Rng& init_rng)
    : n_agents_(n_agents),
      embed_dim_(embed_dim),
      hyper_w1_(name + "/hyper_w1", state_dim, embed_dim * n_agents, nn::Activation::identity,
                init_rng),
      hyper_b1_(name + "/hyper_b1", state_dim, embed_dim, nn::Activation::identity, init_rng),
      hyper_w2_(name + "/hyper_w2", state_dim, embed_dim, nn::Activation::identity, init_rng),
      hyper_b2_(name + "/hyper_b2", state_dim,
                {{embed_dim, nn::Activation::relu}, {1, nn::Activation::identity}}, init_rng) {}

Vector Mixer::forward(const Matrix& chosen_q, const Matrix& state) {
  if (chosen_q.rows() != n_agents_ || chosen_q.cols() != state.cols()) {
    throw std::invalid_argument("Mixer: chosen_q must be n_agents x batch, aligned with state");
  }
  const Index batch = state.cols();
  q_cache_ = chosen_q;
  w1_raw_cache_ = hyper_w1_.forward(state);  // (embed*n) x batch
  Matrix b1 = hyper_b1_.forward(state);      // embed x batch
  w2_raw_cache_ = hyper_w2_.forward(state);  // embed x batch
  Matrix b2 = hyper_b2_.forward(state);      // 1 x batch

  pre_cache_.resize(embed_dim_, batch);
  for (Index b = 0; b < batch; ++b) {
    Eigen::Map<const Matrix> w1(w1_raw_cache_.col(b).data(), embed_dim_, n_agents_);
    pre_cache_.col(b) = w1.cwiseAbs() * chosen_q.col(b) + b1.col(b);
  }
  hidden_cache_ = nn::activate(nn::Activation::elu, pre_cache_);

  Vector q_tot(batch);
  for (Index b = 0; b < batch; ++b) {
    q_tot(b) = w2_raw_cache_.col(b).cwiseAbs().dot(hidden_cache_.col(b)) + b2(0, b);
  }
  check_finite(q_tot, "Mixer Q_tot");
  return q_tot;
}

Matrix Mixer::backward(const Vector& upstream) {
  const Index batch = upstream.size();
  if (batch != q_cache_.cols()) {
    throw std::invalid_argument("Mixer backward: upstream size does not match last forward");
  }
  Matrix elu_grad = nn::activate_derivative(nn::Activation::elu, pre_cache_);
  auto sign = [](Scalar v) { return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0)); };

  Matrix d_w1_raw(embed_dim_ * n_agents_, batch);
  Matrix d_b1(embed_dim_, batch);
  Matrix d_w2_raw(embed_dim_, batch);
  Matrix d_b2(1, batch);
  Matrix d_q(n_agents_, batch);

  for (Index b = 0; b < batch; ++b) {
    const Scalar u = upstream(b);
    Eigen::Map<const Matrix> w1(w1_raw_cache_.col(b).data(), embed_dim_, n_agents_);
    const Matrix w1_abs = w1.cwiseAbs();

    d_b2(0, b) = u;
    d_w2_raw.col(b) =
        (u * hidden_cache_.col(b)).cwiseProduct(w2_raw_cache_.col(b).unaryExpr(sign));
    Vector d_hidden = u * w2_raw_cache_.col(b).cwiseAbs();
    Vector d_pre = d_hidden.cwiseProduct(elu_grad.col(b));
    d_b1.col(b) = d_pre;
    Matrix d_w1_abs = d_pre * q_cache_.col(b).transpose();  // embed x n_agents
    Eigen::Map<Matrix> d_w1_block(d_w1_raw.col(b).data(), embed_dim_, n_agents_);
    d_w1_block = d_w1_abs.cwiseProduct(w1.unaryExpr(sign));
    d_q.col(b) = w1_abs.transpose() * d_pre;
  }

  hyper_w1_.backward(d_w1_raw);
  hyper_b1_.backward(d_b1);
  hyper_w2_.backward(d_w2_raw);
  hyper_b2_.backward(d_b2);
  return d_q;
}

std::vector<nn::ParamTensor*> Mixer::parameters() {
  return nn::concat_params({hyper_w1_.parameters(), hyper_b1_.parameters(), hyper_w2_.parameters(),
                            hyper_b2_.parameters()});
}

void Mixer::copy_from(Mixer& other) {
  auto mine = parameters();
  auto theirs = other.parameters();
  if (mine.size() != theirs.size()) {
    throw std::logic_error("Mixer::copy_from: structurally different mixers");
  }
  for (size_t i = 0; i < mine.size(); ++i) mine[i]->value = theirs[i]->value;
}

namespace {

int agent_input_dim_for(const env::WorldConfig& world, const AlgorithmConfig& algo) {
  const int obs_dim = 2 * (world.n_agents + world.n_landmarks);
  return obs_dim + (algo.agent_id_onehot ? world.n_agents : 0);
}

AlgorithmConfig validated(const env::WorldConfig& world, const AlgorithmConfig& algo) {
  env::validate(world);
  validate(algo);
  return algo;
}

}  // namespace

QmixModel::QmixModel(const env::WorldConfig& world, const AlgorithmConfig& algo, uint64_t init_seed)
    : algo_(validated(world, algo)),
      n_agents_(world.n_agents),
      state_dim_(2 * (world.n_agents + world.n_landmarks)),
      agent_input_dim_(agent_input_dim_for(world, algo)),
      agent_net_([&] {
        Rng rng(init_seed, 0x6167656E74ULL);  // stream: agent net init
        return AgentNetwork("agent", agent_input_dim_for(world, algo), world.n_agents, algo.trunk,
                            algo.hidden_dim, rng);
      }()),
      target_agent_net_([&] {
        Rng rng(init_seed, 0x6167656E74ULL);
        return AgentNetwork("target_agent", agent_input_dim_for(world, algo), world.n_agents,
                            algo.trunk, algo.hidden_dim, rng);
      }()),
      mixer_([&] {
        Rng rng(init_seed, 0x6D69786572ULL);  // stream: mixer init
        return Mixer("mixer", 2 * (world.n_agents + world.n_landmarks), world.n_agents,
                     algo.mixer_embed_dim, rng);
      }()),
      target_mixer_([&] {
        Rng rng(init_seed, 0x6D69786572ULL);
        return Mixer("target_mixer", 2 * (world.n_agents + world.n_landmarks), world.n_agents,
                     algo.mixer_embed_dim, rng);
      }()) {
  const int ens_input = state_dim_ + n_agents_ * n_agents_;
  ensemble_.reserve(algo.ensemble_size);
  for (int i = 0; i < algo.ensemble_size; ++i) {
    Rng rng(init_seed, 0xE500ULL + static_cast<uint64_t>(i));  // per-member init stream
    ensemble_.emplace_back("ensemble/" + std::to_string(i), ens_input,
                           std::vector<nn::Mlp::LayerSpec>{{algo.hidden_dim, nn::Activation::relu},
                                                           {1, nn::Activation::identity}},
                           rng);
  }
  sync_targets();
}

void QmixModel::sync_targets() {
  target_agent_net_.copy_from(agent_net_);
  target_mixer_.copy_from(mixer_);
}

std::vector<nn::ParamTensor*> QmixModel::main_parameters() {
  return nn::concat_params({agent_net_.parameters(), mixer_.parameters()});
}

std::vector<nn::ParamTensor*> QmixModel::all_parameters() {
  auto out = nn::concat_params({agent_net_.parameters(), mixer_.parameters(),
                                target_agent_net_.parameters(), target_mixer_.parameters()});
  for (auto& member : ensemble_) {
    auto p = member.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Matrix QmixModel::agent_tokens(const env::WorldState& state) const {
  const int obs_dim = state_dim_;
  Matrix tokens = Matrix::Zero(agent_input_dim_, n_agents_);
  for (int a = 0; a < n_agents_; ++a) {
    tokens.col(a).head(obs_dim) = env::per_agent_observation(state, a);
    if (algo_.agent_id_onehot) tokens(obs_dim + a, a) = 1.0;
  }
  return tokens;
}

Vector QmixModel::ensemble_input(const Vector& joint_observation) const {
  if (joint_observation.size() != state_dim_) {
    throw std::invalid_argument("ensemble_input: observation length mismatch");
  }
  Vector input = Vector::Zero(state_dim_ + n_agents_ * n_agents_);
  input.head(state_dim_) = joint_observation;
  for (int a = 0; a < n_agents_; ++a) input(state_dim_ + a * n_agents_ + a) = 1.0;
  return input;
}

}  // namespace marl::qmix
