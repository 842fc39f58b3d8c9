#pragma once

#include "marl/common.hpp"
#include "marl/rng.hpp"

#include <string>
#include <vector>

namespace marl::nn {

/// A named parameter with its gradient buffer. Vectors are stored n x 1.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  ParamTensor(std::string name_, Index rows, Index cols)
      : name(std::move(name_)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

enum class Activation { identity, relu, elu, abs };

Matrix activate(Activation act, const Matrix& z);
/// Elementwise derivative with respect to the pre-activation z.
Matrix activate_derivative(Activation act, const Matrix& z);

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), the shared init for all
/// weight matrices. Biases stay zero.
void init_uniform(ParamTensor& p, int fan_in, Rng& rng);

/// Fully connected layer over column-batched inputs: Y = act(W X + b) with
/// X shaped (in_dim x batch). forward caches what backward needs; backward
/// accumulates into the parameter grads and returns dL/dX.
class Dense {
 public:
  Dense(const std::string& name, int in_dim, int out_dim, Activation act, Rng& init_rng);

  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& upstream);

  std::vector<ParamTensor*> parameters();
  int in_dim() const { return static_cast<int>(weight_.value.cols()); }
  int out_dim() const { return static_cast<int>(weight_.value.rows()); }

  ParamTensor& weight() { return weight_; }
  ParamTensor& bias() { return bias_; }

 private:
  ParamTensor weight_;  // out_dim x in_dim
  ParamTensor bias_;    // out_dim x 1
  Activation activation_;
  Matrix input_cache_;
  Matrix preact_cache_;
};

/// Single LSTM step with sigmoid input/forget/output gates and tanh
/// candidate. Columns are batch entries.
class LstmCell {
 public:
  struct State {
    Matrix hidden;  // hidden_dim x batch
    Matrix cell;    // hidden_dim x batch

    static State zero(int hidden_dim, Index batch) {
      return {Matrix::Zero(hidden_dim, batch), Matrix::Zero(hidden_dim, batch)};
    }
  };

  struct InputGrads {
    Matrix input;
    Matrix hidden_prev;
    Matrix cell_prev;
  };

  LstmCell(const std::string& name, int in_dim, int hidden_dim, Rng& init_rng);

  State forward(const Matrix& input, const State& prev);
  /// d_hidden/d_cell are the upstream grads on the step's outputs.
  InputGrads backward(const Matrix& d_hidden, const Matrix& d_cell);

  std::vector<ParamTensor*> parameters();
  int hidden_dim() const { return static_cast<int>(input_weights_[0].value.rows()); }
  int in_dim() const { return static_cast<int>(input_weights_[0].value.cols()); }

 private:
  // gate order: input, forget, candidate, output
  ParamTensor input_weights_[4];      // hidden x in
  ParamTensor recurrent_weights_[4];  // hidden x hidden
  ParamTensor biases_[4];             // hidden x 1

  Matrix input_cache_, hidden_prev_cache_, cell_prev_cache_;
  Matrix gate_i_, gate_f_, gate_g_, gate_o_;
  Matrix cell_cache_, cell_tanh_cache_;
};

/// Single-head scaled dot-product self-attention with a residual connection.
/// Tokens are columns; a batch is passed as sample-major blocks of
/// tokens_per_sample columns each.
class Attention {
 public:
  Attention(const std::string& name, int dim, Rng& init_rng);

  Matrix forward(const Matrix& tokens, int tokens_per_sample);
  Matrix backward(const Matrix& upstream);

  std::vector<ParamTensor*> parameters();
  int dim() const { return static_cast<int>(query_.value.rows()); }

 private:
  ParamTensor query_, key_, value_;  // dim x dim

  int tokens_per_sample_ = 0;
  Matrix tokens_cache_;
  std::vector<Matrix> q_cache_, k_cache_, v_cache_, attn_cache_;
};

/// Plain stack of Dense layers.
class Mlp {
 public:
  struct LayerSpec {
    int out_dim;
    Activation activation;
  };

  Mlp(const std::string& name, int in_dim, const std::vector<LayerSpec>& layers, Rng& init_rng);

  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& upstream);
  std::vector<ParamTensor*> parameters();

  Dense& layer(size_t i) { return layers_[i]; }
  size_t n_layers() const { return layers_.size(); }

 private:
  std::vector<Dense> layers_;
};

inline void zero_grads(const std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) p->zero_grad();
}

/// Concatenates parameter lists (used when assembling whole models).
std::vector<ParamTensor*> concat_params(std::initializer_list<std::vector<ParamTensor*>> lists);

}  // namespace marl::nn
