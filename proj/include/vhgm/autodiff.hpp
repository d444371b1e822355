/* Copyright 2026 The VHGM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef VHGM_AUTODIFF_HPP_
#define VHGM_AUTODIFF_HPP_

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vhgm/schema.hpp"

// Reverse-mode differentiation over dense fp64 matrices. A Tape records the
// forward pass; every node owns its value and (lazily) its adjoint. Batched
// data is laid out one example per row.
namespace vhgm::ad {

using Rng = std::mt19937_64;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Insertion-ordered named parameters. References stay valid for the lifetime
// of the set.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  void zero_grad();
  size_t size() const { return params_.size(); }
  int64_t num_scalars() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> index_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  // Adjoint after Tape::backward; zero matrix when the node got no gradient.
  Matrix grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  // With `record = false` no backward closures are kept (inference mode).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // Differentiable input whose adjoint can be read back with Var::grad().
  Var leaf(Matrix value);
  // Parameter leaf; backward() adds its adjoint into `p.grad`.
  Var param(Parameter& p);

  // Registers an op result. `parents` lists the node ids `backward` will
  // propagate into; the node requires grad iff any parent does.
  Var push(Matrix value, std::vector<int> parents, Backward backward);

  void backward(const Var& root);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Adjoint of node `id` (must be called from a backward closure).
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

  template <typename Derived>
  void accumulate(int id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }
  // Adjoint buffer for in-place accumulation (allocated as zeros).
  Matrix& grad_buffer(int id);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  bool record_;
  std::vector<Node> nodes_;
};

// ---- elementwise / structural ops -----------------------------------------

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a (n x c) + row (1 x c) broadcast over rows.
Var add_row(const Var& a, const Var& row);
Var relu(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var sum(const Var& a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, const std::vector<int>& rows);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// x W + b with W (in x out), b (1 x out).
Var linear(const Var& x, const Var& w, const Var& b);
// Block-diagonal product. Input block k is x.middleCols(k * block_in, block_in);
// output columns [out_offsets[k], out_offsets[k] + out_widths[k]) equal that
// block times the matching columns of w (block_in x total_out).
Var block_linear(const Var& x, const Var& w, int block_in, const std::vector<int>& out_offsets,
                 const std::vector<int>& out_widths);

// Stable scalar helpers shared with the likelihood code.
double softplus(double x);
double sigmoid(double x);
double log_sigmoid(double x);

// ---- sampling --------------------------------------------------------------

// Gumbel(0, 1) noise matrix.
Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng);
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// softmax((log_softmax(logits) + noise) / temperature), row-wise.
Var gumbel_softmax(const Var& logits, double temperature, const Matrix& noise);
Var gumbel_softmax_sample(const Var& logits, double temperature, Rng& rng);

// mu + sqrt(sigma2) * eps. Throws NonpositiveVariance if any sigma2 <= 0.
Var gaussian_reparam(const Var& mu, const Var& sigma2, const Matrix& eps);
Var gaussian_reparam_sample(const Var& mu, const Var& sigma2, Rng& rng);

// ---- attention -------------------------------------------------------------

// q x k booleans, true = query may attend key.
using AttentionPairMask = MissMask;

// One attention problem inside a packed batch: queries `q_rows` attend keys
// `k_rows` (row indices into the Q and K/V matrices). `allowed`, when
// non-empty, further restricts pairs.
struct AttentionGroup {
  std::vector<int> q_rows;
  std::vector<int> k_rows;
  AttentionPairMask allowed;
};

// Scaled dot-product attention split into `heads` column blocks. Disallowed
// pairs get -inf logits. Query rows outside every group produce zeros.
// Throws EmptyKeyRow when a query has no allowed key.
Var grouped_attention(const Var& q, const Var& k, const Var& v,
                      const std::vector<AttentionGroup>& groups, int heads);

// Single-problem form: every query row against every key row under `mask`.
Var multi_head_attention(const Var& q, const Var& k, const Var& v, const AttentionPairMask& mask,
                         int heads);
Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads);

// ---- optimizer -------------------------------------------------------------

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam moments with decoupled weight decay: the decay multiplies parameters
// directly by (1 - lr * wd) and never enters the moment estimates.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(ParameterSet& params);
  // Lower-level form over explicit values/gradients. Throws ShapeMismatch.
  void step(std::vector<Matrix*> values, const std::vector<const Matrix*>& grads);

  int64_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  AdamWConfig& config() { return config_; }

 private:
  AdamWConfig config_;
  int64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// ---- gradient checking -----------------------------------------------------

using ScalarFn = std::function<Var(Tape&, const Var&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  Matrix analytic;
  Matrix numeric;
};

// Reverse-mode gradient of scalar `f` at `point` against central differences.
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const ScalarFn& f, const Matrix& point, double h = 1e-5,
                           double floor = 1e-6);

// Same check for a function of a parameter set (all parameters perturbed).
GradCheckResult grad_check_params(const std::function<Var(Tape&)>& f, ParameterSet& params,
                                  double h = 1e-5, double floor = 1e-6);

// ---- layers ----------------------------------------------------------------

struct Linear {
  Parameter* w = nullptr;
  Parameter* b = nullptr;
  Var operator()(Tape& t, const Var& x) const;
};

struct LayerNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Var operator()(Tape& t, const Var& x) const;
};

// He-uniform style init, deterministic under `rng`.
Linear make_linear(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng);
LayerNorm make_layer_norm(ParameterSet& ps, const std::string& name, int dim);

// Stack of ReLU hidden layers followed by a linear output layer.
struct Mlp {
  std::vector<Linear> layers;
  Var operator()(Tape& t, const Var& x) const;
};
Mlp make_mlp(ParameterSet& ps, const std::string& name, int in, const std::vector<int>& hidden,
             int out, Rng& rng);

}  // namespace vhgm::ad

#endif  // VHGM_AUTODIFF_HPP_
