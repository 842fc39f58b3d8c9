#include "marl/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace marl::nn {

namespace {

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

void check_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Matrix activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::identity:
      return z;
    case Activation::relu:
      return z.cwiseMax(Scalar(0));
    case Activation::elu:
      return z.unaryExpr([](Scalar v) { return v > 0 ? v : std::expm1(v); });
    case Activation::abs:
      return z.cwiseAbs();
  }
  throw std::logic_error("unknown activation");
}

Matrix activate_derivative(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::identity:
      return Matrix::Ones(z.rows(), z.cols());
    case Activation::relu:
      return z.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); });
    case Activation::elu:
      return z.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : std::exp(v); });
    case Activation::abs:
      return z.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : (v < 0 ? Scalar(-1) : Scalar(0)); });
  }
  throw std::logic_error("unknown activation");
}

void init_uniform(ParamTensor& p, int fan_in, Rng& rng) {
  const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(fan_in));
  for (Index j = 0; j < p.value.cols(); ++j) {
    for (Index i = 0; i < p.value.rows(); ++i) {
      p.value(i, j) = rng.uniform(-bound, bound);
    }
  }
}

Dense::Dense(const std::string& name, int in_dim, int out_dim, Activation act, Rng& init_rng)
    : weight_(name + "/W", out_dim, in_dim),
      bias_(name + "/b", out_dim, 1),
      activation_(act) {
  if (in_dim <= 0 || out_dim <= 0) {
    throw std::invalid_argument("Dense " + name + ": dims must be positive");
  }
  init_uniform(weight_, in_dim, init_rng);
}

Matrix Dense::forward(const Matrix& input) {
  if (input.rows() != weight_.value.cols()) {
    throw std::invalid_argument("Dense " + weight_.name + ": input rows " +
                                std::to_string(input.rows()) + " != in_dim " +
                                std::to_string(weight_.value.cols()));
  }
  input_cache_ = input;
  preact_cache_ = weight_.value * input;
  preact_cache_.colwise() += bias_.value.col(0);
  Matrix out = activate(activation_, preact_cache_);
  check_finite(out, "Dense " + weight_.name + " output");
  return out;
}

Matrix Dense::backward(const Matrix& upstream) {
  check_cols(upstream, preact_cache_, "Dense backward");
  Matrix dz = upstream.cwiseProduct(activate_derivative(activation_, preact_cache_));
  weight_.grad.noalias() += dz * input_cache_.transpose();
  bias_.grad.col(0) += dz.rowwise().sum();
  return weight_.value.transpose() * dz;
}

std::vector<ParamTensor*> Dense::parameters() { return {&weight_, &bias_}; }

LstmCell::LstmCell(const std::string& name, int in_dim, int hidden_dim, Rng& init_rng) {
  static const char* gate_names[4] = {"i", "f", "g", "o"};
  for (int g = 0; g < 4; ++g) {
    input_weights_[g] = ParamTensor(name + "/W" + gate_names[g], hidden_dim, in_dim);
    recurrent_weights_[g] = ParamTensor(name + "/U" + gate_names[g], hidden_dim, hidden_dim);
    biases_[g] = ParamTensor(name + "/b" + gate_names[g], hidden_dim, 1);
    init_uniform(input_weights_[g], in_dim, init_rng);
    init_uniform(recurrent_weights_[g], hidden_dim, init_rng);
  }
}

LstmCell::State LstmCell::forward(const Matrix& input, const State& prev) {
  if (prev.hidden.rows() != hidden_dim() || prev.cell.rows() != hidden_dim() ||
      prev.hidden.cols() != input.cols() || prev.cell.cols() != input.cols()) {
    throw std::invalid_argument("LstmCell: state shape does not match input batch");
  }
  input_cache_ = input;
  hidden_prev_cache_ = prev.hidden;
  cell_prev_cache_ = prev.cell;

  auto preact = [&](int g) -> Matrix {
    Matrix z = input_weights_[g].value * input;
    z.noalias() += recurrent_weights_[g].value * prev.hidden;
    z.colwise() += biases_[g].value.col(0);
    return z;
  };
  gate_i_ = sigmoid(preact(0));
  gate_f_ = sigmoid(preact(1));
  gate_g_ = preact(2).array().tanh();
  gate_o_ = sigmoid(preact(3));

  cell_cache_ = gate_f_.cwiseProduct(prev.cell) + gate_i_.cwiseProduct(gate_g_);
  cell_tanh_cache_ = cell_cache_.array().tanh();
  State out{gate_o_.cwiseProduct(cell_tanh_cache_), cell_cache_};
  check_finite(out.hidden, "LstmCell hidden");
  return out;
}

LstmCell::InputGrads LstmCell::backward(const Matrix& d_hidden, const Matrix& d_cell) {
  check_cols(d_hidden, gate_o_, "LstmCell backward");

  Matrix d_o = d_hidden.cwiseProduct(cell_tanh_cache_);
  Matrix dc = d_cell +
              d_hidden.cwiseProduct(gate_o_).cwiseProduct(
                  (Scalar(1) - cell_tanh_cache_.array().square()).matrix());

  Matrix d_f = dc.cwiseProduct(cell_prev_cache_);
  Matrix d_i = dc.cwiseProduct(gate_g_);
  Matrix d_g = dc.cwiseProduct(gate_i_);

  // through the gate nonlinearities
  Matrix dz[4];
  dz[0] = d_i.cwiseProduct(gate_i_).cwiseProduct((Scalar(1) - gate_i_.array()).matrix());
  dz[1] = d_f.cwiseProduct(gate_f_).cwiseProduct((Scalar(1) - gate_f_.array()).matrix());
  dz[2] = d_g.cwiseProduct((Scalar(1) - gate_g_.array().square()).matrix());
  dz[3] = d_o.cwiseProduct(gate_o_).cwiseProduct((Scalar(1) - gate_o_.array()).matrix());

  InputGrads grads;
  grads.input = Matrix::Zero(input_cache_.rows(), input_cache_.cols());
  grads.hidden_prev = Matrix::Zero(hidden_prev_cache_.rows(), hidden_prev_cache_.cols());
  grads.cell_prev = dc.cwiseProduct(gate_f_);
  for (int g = 0; g < 4; ++g) {
    input_weights_[g].grad.noalias() += dz[g] * input_cache_.transpose();
    recurrent_weights_[g].grad.noalias() += dz[g] * hidden_prev_cache_.transpose();
    biases_[g].grad.col(0) += dz[g].rowwise().sum();
    grads.input.noalias() += input_weights_[g].value.transpose() * dz[g];
    grads.hidden_prev.noalias() += recurrent_weights_[g].value.transpose() * dz[g];
  }
  return grads;
}

std::vector<ParamTensor*> LstmCell::parameters() {
  std::vector<ParamTensor*> out;
  for (int g = 0; g < 4; ++g) {
    out.push_back(&input_weights_[g]);
    out.push_back(&recurrent_weights_[g]);
    out.push_back(&biases_[g]);
  }
  return out;
}

Attention::Attention(const std::string& name, int dim, Rng& init_rng)
    : query_(name + "/Wq", dim, dim), key_(name + "/Wk", dim, dim), value_(name + "/Wv", dim, dim) {
  init_uniform(query_, dim, init_rng);
  init_uniform(key_, dim, init_rng);
  init_uniform(value_, dim, init_rng);
}

Matrix Attention::forward(const Matrix& tokens, int tokens_per_sample) {
  const int d = dim();
  if (tokens.rows() != d) {
    throw std::invalid_argument("Attention: token dim " + std::to_string(tokens.rows()) +
                                " != projection dim " + std::to_string(d));
  }
  if (tokens_per_sample <= 0 || tokens.cols() % tokens_per_sample != 0) {
    throw std::invalid_argument("Attention: column count not a multiple of tokens_per_sample");
  }
  tokens_per_sample_ = tokens_per_sample;
  tokens_cache_ = tokens;
  const Index n_samples = tokens.cols() / tokens_per_sample;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d));

  q_cache_.assign(n_samples, {});
  k_cache_.assign(n_samples, {});
  v_cache_.assign(n_samples, {});
  attn_cache_.assign(n_samples, {});

  Matrix out(d, tokens.cols());
  for (Index s = 0; s < n_samples; ++s) {
    auto block = tokens.middleCols(s * tokens_per_sample, tokens_per_sample);
    Matrix q = query_.value * block;
    Matrix k = key_.value * block;
    Matrix v = value_.value * block;

    Matrix scores = (q.transpose() * k) * scale;  // row i: query i over all keys
    Matrix attn(scores.rows(), scores.cols());
    for (Index i = 0; i < scores.rows(); ++i) {
      Eigen::RowVectorXd row = scores.row(i);
      row.array() -= row.maxCoeff();
      Eigen::RowVectorXd e = row.array().exp();
      attn.row(i) = e / e.sum();
    }

    out.middleCols(s * tokens_per_sample, tokens_per_sample) = v * attn.transpose() + block;

    q_cache_[s] = std::move(q);
    k_cache_[s] = std::move(k);
    v_cache_[s] = std::move(v);
    attn_cache_[s] = std::move(attn);
  }
  check_finite(out, "Attention output");
  return out;
}

Matrix Attention::backward(const Matrix& upstream) {
  check_cols(upstream, tokens_cache_, "Attention backward");
  const int d = dim();
  const int n = tokens_per_sample_;
  const Index n_samples = tokens_cache_.cols() / n;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d));

  Matrix d_tokens = upstream;  // residual path
  for (Index s = 0; s < n_samples; ++s) {
    auto d_out = upstream.middleCols(s * n, n);
    auto block = tokens_cache_.middleCols(s * n, n);
    const Matrix& attn = attn_cache_[s];

    Matrix d_v = d_out * attn;                       // out = v * attn^T
    Matrix d_attn = d_out.transpose() * v_cache_[s];  // n x n

    Matrix d_scores(n, n);
    for (Index i = 0; i < n; ++i) {
      const auto a = attn.row(i);
      const Scalar dot = d_attn.row(i).cwiseProduct(a).sum();
      d_scores.row(i) = (d_attn.row(i).array() - dot) * a.array();
    }
    d_scores *= scale;

    Matrix d_q = k_cache_[s] * d_scores.transpose();
    Matrix d_k = q_cache_[s] * d_scores;

    query_.grad.noalias() += d_q * block.transpose();
    key_.grad.noalias() += d_k * block.transpose();
    value_.grad.noalias() += d_v * block.transpose();

    d_tokens.middleCols(s * n, n) += query_.value.transpose() * d_q +
                                     key_.value.transpose() * d_k +
                                     value_.value.transpose() * d_v;
  }
  return d_tokens;
}

std::vector<ParamTensor*> Attention::parameters() { return {&query_, &key_, &value_}; }

Mlp::Mlp(const std::string& name, int in_dim, const std::vector<LayerSpec>& layers, Rng& init_rng) {
  if (layers.empty()) throw std::invalid_argument("Mlp " + name + ": needs at least one layer");
  int d = in_dim;
  for (size_t i = 0; i < layers.size(); ++i) {
    layers_.emplace_back(name + "/" + std::to_string(i), d, layers[i].out_dim,
                         layers[i].activation, init_rng);
    d = layers[i].out_dim;
  }
}

Matrix Mlp::forward(const Matrix& input) {
  Matrix x = input;
  for (Dense& layer : layers_) x = layer.forward(x);
  return x;
}

Matrix Mlp::backward(const Matrix& upstream) {
  Matrix g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

std::vector<ParamTensor*> Mlp::parameters() {
  std::vector<ParamTensor*> out;
  for (Dense& layer : layers_) {
    auto p = layer.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<ParamTensor*> concat_params(std::initializer_list<std::vector<ParamTensor*>> lists) {
  std::vector<ParamTensor*> out;
  for (const auto& list : lists) out.insert(out.end(), list.begin(), list.end());
  return out;
}

}  // namespace marl::nn
