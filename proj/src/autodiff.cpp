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
#include "vhgm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vhgm::ad {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(const std::string& name, Matrix init) {
  if (index_.count(name)) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate parameter '" + name + "'");
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  index_[name] = raw;
  return *raw;
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "no parameter '" + name + "'");
  return *it->second;
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "no parameter '" + name + "'");
  return *it->second;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

int64_t ParameterSet::num_scalars() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(id_); }

Matrix Var::grad() const {
  if (tape_->has_grad(id_)) return tape_->grad(id_);
  return Matrix::Zero(rows(), cols());
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = record_;
  n.param = record_ ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, std::vector<int> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (int p : parents) {
      if (nodes_[p].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(const Var& root) {
  if (!record_) throw Error(ErrorCode::kInvalidArgument, "backward on a non-recording tape");
  if (root.value().size() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "backward needs a scalar root");
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops

namespace {

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(op) + ": shape (" + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + ") vs (" + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + ")");
  }
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) { return -softplus(-x); }

Var matmul(const Var& a, const Var& b) {
  Tape& t = *a.tape();
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "matmul: inner dimensions differ");
  }
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "add");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var sub(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "sub");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, -t.grad(self));
  });
}

Var mul(const Var& a, const Var& b) {
  RequireSameShape(a.value(), b.value(), "mul");
  const int ia = a.id(), ib = b.id();
  return a.tape()->push(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(ib)));
    t.accumulate(ib, t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var scale(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value() * s, {ia},
                        [ia, s](Tape& t, int self) { t.accumulate(ia, t.grad(self) * s); });
}

Var add_scalar(const Var& a, double s) {
  const int ia = a.id();
  return a.tape()->push(a.value().array() + s, {ia},
                        [ia](Tape& t, int self) { t.accumulate(ia, t.grad(self)); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "add_row: bias must be 1 x cols");
  }
  const int ia = a.id(), ir = row.id();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->push(std::move(out), {ia, ir}, [ia, ir](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ir, t.grad(self).colwise().sum());
  });
}

Var relu(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().cwiseMax(0.0), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, (t.value(ia).array() > 0.0).select(t.grad(self), 0.0));
  });
}

Var softplus(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return softplus(x); });
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(
                         t.value(ia).unaryExpr([](double x) { return sigmoid(x); })));
  });
}

Var sigmoid(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) { return sigmoid(x); });
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var exp(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().exp().matrix(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var log(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().array().log().matrix(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, t.grad(self).cwiseQuotient(t.value(ia)));
  });
}

Var sqrt(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().cwiseSqrt(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, (t.grad(self).array() / (2.0 * t.value(self).array())).matrix());
  });
}

Var square(const Var& a) {
  const int ia = a.id();
  return a.tape()->push(a.value().cwiseAbs2(), {ia}, [ia](Tape& t, int self) {
    t.accumulate(ia, 2.0 * t.grad(self).cwiseProduct(t.value(ia)));
  });
}

Var sum(const Var& a) {
  const int ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& x = t.value(ia);
    t.accumulate(ia, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error(ErrorCode::kShapeMismatch, "concat_cols: row mismatch");
    cols += p.cols();
    ids.push_back(p.id());
    widths.push_back(p.cols());
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return parts.front().tape()->push(std::move(out), ids, [ids, widths](Tape& t, int self) {
    Eigen::Index off = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], t.grad(self).middleCols(off, widths[k]));
      off += widths[k];
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw Error(ErrorCode::kShapeMismatch, "concat_rows: col mismatch");
    rows += p.rows();
    ids.push_back(p.id());
    heights.push_back(p.rows());
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return parts.front().tape()->push(std::move(out), ids, [ids, heights](Tape& t, int self) {
    Eigen::Index off = 0;
    for (size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], t.grad(self).middleRows(off, heights[k]));
      off += heights[k];
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "slice_cols: out of range");
  }
  const int ia = a.id();
  return a.tape()->push(a.value().middleCols(start, count), {ia},
                        [ia, start, count](Tape& t, int self) {
                          t.grad_buffer(ia).middleCols(start, count) += t.grad(self);
                        });
}

Var gather_rows(const Var& a, const std::vector<int>& rows) {
  const int ia = a.id();
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.rows()) {
      throw Error(ErrorCode::kShapeMismatch, "gather_rows: index out of range");
    }
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  }
  return a.tape()->push(std::move(out), {ia}, [ia, rows](Tape& t, int self) {
    if (!t.requires_grad(ia)) return;
    Matrix& g = t.grad_buffer(ia);
    const Matrix& gs = t.grad(self);
    for (size_t r = 0; r < rows.size(); ++r) g.row(rows[r]) += gs.row(static_cast<Eigen::Index>(r));
  });
}

Var softmax_rows(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    out.row(i) = (out.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, y.cwiseProduct((g.colwise() - dot)));
  });
}

Var log_softmax_rows(const Var& a) {
  const int ia = a.id();
  Matrix out = a.value();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double m = out.row(i).maxCoeff();
    const double lse = m + std::log((out.row(i).array() - m).exp().sum());
    out.row(i).array() -= lse;
  }
  return a.tape()->push(std::move(out), {ia}, [ia](Tape& t, int self) {
    const Matrix p = t.value(self).array().exp().matrix();
    const Matrix& g = t.grad(self);
    const Eigen::VectorXd gs = g.rowwise().sum();
    t.accumulate(ia, g - (p.array().colwise() * gs.array()).matrix());
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw Error(ErrorCode::kShapeMismatch, "layer_norm_rows: gamma/beta must be 1 x d");
  }
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mean) * inv_std(i);
  }
  Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape()->push(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Eigen::Index d = g.cols();
        t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        t.accumulate(ib, g.colwise().sum());
        if (!t.requires_grad(ix)) return;
        const Matrix gh = g.array().rowwise() * t.value(ig).row(0).array();
        Matrix dx(g.rows(), d);
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const double m1 = gh.row(i).mean();
          const double m2 = gh.row(i).cwiseProduct(xhat.row(i)).mean();
          dx.row(i) = inv_std(i) * (gh.row(i).array() - m1 - xhat.row(i).array() * m2);
        }
        t.accumulate(ix, dx);
      });
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_row(matmul(x, w), b); }

Var block_linear(const Var& x, const Var& w, int block_in, const std::vector<int>& out_offsets,
                 const std::vector<int>& out_widths) {
  const auto blocks = static_cast<Eigen::Index>(out_offsets.size());
  if (x.cols() != blocks * block_in || w.rows() != block_in ||
      out_widths.size() != out_offsets.size()) {
    throw Error(ErrorCode::kShapeMismatch, "block_linear: block layout does not match inputs");
  }
  Matrix out = Matrix::Zero(x.rows(), w.cols());
  for (Eigen::Index k = 0; k < blocks; ++k) {
    out.middleCols(out_offsets[k], out_widths[k]).noalias() =
        x.value().middleCols(k * block_in, block_in) *
        w.value().middleCols(out_offsets[k], out_widths[k]);
  }
  const int ix = x.id(), iw = w.id();
  return x.tape()->push(
      std::move(out), {ix, iw},
      [ix, iw, block_in, out_offsets, out_widths](Tape& t, int self) {
        const Matrix& g = t.grad(self);
        const Matrix& xv = t.value(ix);
        const Matrix& wv = t.value(iw);
        if (t.requires_grad(ix)) {
          Matrix& gx = t.grad_buffer(ix);
          for (size_t k = 0; k < out_offsets.size(); ++k) {
            gx.middleCols(k * block_in, block_in).noalias() +=
                g.middleCols(out_offsets[k], out_widths[k]) *
                wv.middleCols(out_offsets[k], out_widths[k]).transpose();
          }
        }
        if (t.requires_grad(iw)) {
          Matrix& gw = t.grad_buffer(iw);
          for (size_t k = 0; k < out_offsets.size(); ++k) {
            gw.middleCols(out_offsets[k], out_widths[k]).noalias() +=
                xv.middleCols(k * block_in, block_in).transpose() *
                g.middleCols(out_offsets[k], out_widths[k]);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Sampling

Matrix gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      double u = unif(rng);
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      g(i, j) = -std::log(-std::log(u));
    }
  }
  return g;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix e(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) e(i, j) = normal(rng);
  }
  return e;
}

Var gumbel_softmax(const Var& logits, double temperature, const Matrix& noise) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gumbel_softmax: temperature must be > 0");
  }
  Tape& t = *logits.tape();
  Var perturbed = add(log_softmax_rows(logits), t.constant(noise));
  return softmax_rows(scale(perturbed, 1.0 / temperature));
}

Var gumbel_softmax_sample(const Var& logits, double temperature, Rng& rng) {
  return gumbel_softmax(logits, temperature, gumbel_noise(logits.rows(), logits.cols(), rng));
}

Var gaussian_reparam(const Var& mu, const Var& sigma2, const Matrix& eps) {
  if ((sigma2.value().array() <= 0.0).any()) {
    throw Error(ErrorCode::kNonpositiveVariance, "gaussian_reparam: sigma2 must be > 0");
  }
  Tape& t = *mu.tape();
  return add(mu, mul(sqrt(sigma2), t.constant(eps)));
}

Var gaussian_reparam_sample(const Var& mu, const Var& sigma2, Rng& rng) {
  return gaussian_reparam(mu, sigma2, standard_normal(mu.rows(), mu.cols(), rng));
}

// ---------------------------------------------------------------------------
// Attention

namespace {

struct HeadCache {
  Matrix probs;  // nq x nk
};

}  // namespace

Var grouped_attention(const Var& q, const Var& k, const Var& v,
                      const std::vector<AttentionGroup>& groups, int heads) {
  const Eigen::Index d = q.cols();
  if (heads < 1 || d % heads != 0) {
    throw Error(ErrorCode::kShapeMismatch, "attention: model dim not divisible by heads");
  }
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "attention: q/k/v shapes disagree");
  }
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out = Matrix::Zero(Q.rows(), d);
  auto cache = std::make_shared<std::vector<Matrix>>();
  cache->reserve(groups.size() * heads);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  for (const auto& grp : groups) {
    const Eigen::Index nq = static_cast<Eigen::Index>(grp.q_rows.size());
    const Eigen::Index nk = static_cast<Eigen::Index>(grp.k_rows.size());
    const bool masked = grp.allowed.size() > 0;
    if (masked && (grp.allowed.rows() != nq || grp.allowed.cols() != nk)) {
      throw Error(ErrorCode::kShapeMismatch, "attention: pair mask shape mismatch");
    }
    for (Eigen::Index a = 0; a < nq; ++a) {
      const bool any = nk > 0 && (!masked || grp.allowed.row(a).any());
      if (!any) throw Error(ErrorCode::kEmptyKeyRow, "attention: query row has no allowed key");
    }
    for (int h = 0; h < heads; ++h) {
      Matrix Kg(nk, dh), Vg(nk, dh);
      for (Eigen::Index b = 0; b < nk; ++b) {
        Kg.row(b) = K.block(grp.k_rows[b], h * dh, 1, dh);
        Vg.row(b) = V.block(grp.k_rows[b], h * dh, 1, dh);
      }
      Matrix P(nq, nk);
      // One query at a time so each output row depends only on its own
      // query and the key set.
      for (Eigen::Index a = 0; a < nq; ++a) {
        const RowVector qa = Q.block(grp.q_rows[a], h * dh, 1, dh);
        RowVector s = (Kg * qa.transpose()).transpose() * inv_sqrt;
        if (masked) {
          for (Eigen::Index b = 0; b < nk; ++b) {
            if (!grp.allowed(a, b)) s(b) = neg_inf;
          }
        }
        const double m = s.maxCoeff();
        RowVector e = (s.array() - m).exp();
        e /= e.sum();
        P.row(a) = e;
        out.block(grp.q_rows[a], h * dh, 1, dh) = (Vg.transpose() * e.transpose()).transpose();
      }
      cache->push_back(std::move(P));
    }
  }

  const int iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->push(
      std::move(out), {iq, ik, iv},
      [iq, ik, iv, groups, heads, dh, inv_sqrt, cache](Tape& t, int self) {
        const Matrix& G = t.grad(self);
        const Matrix& Q = t.value(iq);
        const Matrix& K = t.value(ik);
        const Matrix& V = t.value(iv);
        const bool need_q = t.requires_grad(iq);
        const bool need_k = t.requires_grad(ik);
        const bool need_v = t.requires_grad(iv);
        Matrix* dQ = need_q ? &t.grad_buffer(iq) : nullptr;
        Matrix* dK = need_k ? &t.grad_buffer(ik) : nullptr;
        Matrix* dV = need_v ? &t.grad_buffer(iv) : nullptr;
        size_t c = 0;
        for (const auto& grp : groups) {
          const Eigen::Index nq = static_cast<Eigen::Index>(grp.q_rows.size());
          const Eigen::Index nk = static_cast<Eigen::Index>(grp.k_rows.size());
          for (int h = 0; h < heads; ++h, ++c) {
            const Matrix& P = (*cache)[c];
            Matrix Qg(nq, dh), Kg(nk, dh), Vg(nk, dh), Gg(nq, dh);
            for (Eigen::Index a = 0; a < nq; ++a) {
              Qg.row(a) = Q.block(grp.q_rows[a], h * dh, 1, dh);
              Gg.row(a) = G.block(grp.q_rows[a], h * dh, 1, dh);
            }
            for (Eigen::Index b = 0; b < nk; ++b) {
              Kg.row(b) = K.block(grp.k_rows[b], h * dh, 1, dh);
              Vg.row(b) = V.block(grp.k_rows[b], h * dh, 1, dh);
            }
            const Matrix dP = Gg * Vg.transpose();
            const Eigen::VectorXd rowdot = dP.cwiseProduct(P).rowwise().sum();
            const Matrix dS = (P.array() * (dP.colwise() - rowdot).array()).matrix() * inv_sqrt;
            if (dQ) {
              const Matrix g = dS * Kg;
              for (Eigen::Index a = 0; a < nq; ++a) dQ->block(grp.q_rows[a], h * dh, 1, dh) += g.row(a);
            }
            if (dK) {
              const Matrix g = dS.transpose() * Qg;
              for (Eigen::Index b = 0; b < nk; ++b) dK->block(grp.k_rows[b], h * dh, 1, dh) += g.row(b);
            }
            if (dV) {
              const Matrix g = P.transpose() * Gg;
              for (Eigen::Index b = 0; b < nk; ++b) dV->block(grp.k_rows[b], h * dh, 1, dh) += g.row(b);
            }
          }
        }
      });
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, const AttentionPairMask& mask,
                         int heads) {
  AttentionGroup g;
  for (int i = 0; i < q.rows(); ++i) g.q_rows.push_back(i);
  for (int i = 0; i < k.rows(); ++i) g.k_rows.push_back(i);
  g.allowed = mask;
  return grouped_attention(q, k, v, {g}, heads);
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, int heads) {
  return multi_head_attention(q, k, v, AttentionPairMask(), heads);
}

// ---------------------------------------------------------------------------
// AdamW

void AdamW::step(std::vector<Matrix*> values, const std::vector<const Matrix*>& grads) {
  if (values.size() != grads.size()) {
    throw Error(ErrorCode::kShapeMismatch, "AdamW: value/grad count mismatch");
  }
  if (m_.empty()) {
    for (auto* v : values) {
      m_.push_back(Matrix::Zero(v->rows(), v->cols()));
      v_.push_back(Matrix::Zero(v->rows(), v->cols()));
    }
  }
  if (m_.size() != values.size()) {
    throw Error(ErrorCode::kShapeMismatch, "AdamW: parameter count changed between steps");
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i]->rows() != grads[i]->rows() || values[i]->cols() != grads[i]->cols() ||
        m_[i].rows() != values[i]->rows() || m_[i].cols() != values[i]->cols()) {
      throw Error(ErrorCode::kShapeMismatch, "AdamW: shape mismatch at parameter " +
                                                 std::to_string(i));
    }
  }
  ++step_;
  const auto& c = config_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  for (size_t i = 0; i < values.size(); ++i) {
    Matrix& p = *values[i];
    const Matrix& g = *grads[i];
    m_[i] = c.beta1 * m_[i] + (1.0 - c.beta1) * g;
    v_[i] = c.beta2 * v_[i] + (1.0 - c.beta2) * g.cwiseAbs2();
    p *= (1.0 - c.learning_rate * c.weight_decay);
    p.array() -= c.learning_rate * (m_[i].array() / bc1) /
                 ((v_[i].array() / bc2).sqrt() + c.epsilon);
  }
}

void AdamW::step(ParameterSet& params) {
  std::vector<Matrix*> values;
  std::vector<const Matrix*> grads;
  for (auto* p : params.all()) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  step(std::move(values), grads);
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace {

GradCheckResult Compare(const Matrix& analytic, const Matrix& numeric, double floor) {
  GradCheckResult r;
  r.analytic = analytic;
  r.numeric = numeric;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double abs_err = std::abs(a - n);
    r.max_abs_error = std::max(r.max_abs_error, abs_err);
    r.max_rel_error =
        std::max(r.max_rel_error, abs_err / std::max({std::abs(a), std::abs(n), floor}));
  }
  return r;
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const Matrix& point, double h, double floor) {
  Matrix analytic;
  {
    Tape t;
    Var x = t.leaf(point);
    Var y = f(t, x);
    t.backward(y);
    analytic = x.grad();
  }
  Matrix numeric(point.rows(), point.cols());
  Matrix probe = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    double fp, fm;
    {
      Tape t(false);
      fp = f(t, t.constant(probe)).scalar();
    }
    probe.data()[i] = orig - h;
    {
      Tape t(false);
      fm = f(t, t.constant(probe)).scalar();
    }
    probe.data()[i] = orig;
    numeric.data()[i] = (fp - fm) / (2.0 * h);
  }
  return Compare(analytic, numeric, floor);
}

GradCheckResult grad_check_params(const std::function<Var(Tape&)>& f, ParameterSet& params,
                                  double h, double floor) {
  params.zero_grad();
  {
    Tape t;
    Var y = f(t);
    t.backward(y);
  }
  int64_t total = params.num_scalars();
  Matrix analytic(total, 1), numeric(total, 1);
  int64_t k = 0;
  for (auto* p : params.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i, ++k) {
      analytic(k, 0) = p->grad.data()[i];
      const double orig = p->value.data()[i];
      p->value.data()[i] = orig + h;
      double fp, fm;
      {
        Tape t(false);
        fp = f(t).scalar();
      }
      p->value.data()[i] = orig - h;
      {
        Tape t(false);
        fm = f(t).scalar();
      }
      p->value.data()[i] = orig;
      numeric(k, 0) = (fp - fm) / (2.0 * h);
    }
  }
  return Compare(analytic, numeric, floor);
}

// ---------------------------------------------------------------------------
// Layers

Var Linear::operator()(Tape& t, const Var& x) const {
  return linear(x, t.param(*w), t.param(*b));
}

Var LayerNorm::operator()(Tape& t, const Var& x) const {
  return layer_norm_rows(x, t.param(*gamma), t.param(*beta));
}

Linear make_linear(ParameterSet& ps, const std::string& name, int in, int out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> unif(-bound, bound);
  Matrix w(in, out);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = unif(rng);
  }
  Linear l;
  l.w = &ps.add(name + ".weight", std::move(w));
  l.b = &ps.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

LayerNorm make_layer_norm(ParameterSet& ps, const std::string& name, int dim) {
  LayerNorm ln;
  ln.gamma = &ps.add(name + ".gamma", Matrix::Ones(1, dim));
  ln.beta = &ps.add(name + ".beta", Matrix::Zero(1, dim));
  return ln;
}

Var Mlp::operator()(Tape& t, const Var& x) const {
  Var h = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](t, h);
    if (i + 1 < layers.size()) h = relu(h);
  }
  return h;
}

Mlp make_mlp(ParameterSet& ps, const std::string& name, int in, const std::vector<int>& hidden,
             int out, Rng& rng) {
  Mlp m;
  int prev = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    m.layers.push_back(make_linear(ps, name + "." + std::to_string(i), prev, hidden[i], rng));
    prev = hidden[i];
  }
  m.layers.push_back(make_linear(ps, name + "." + std::to_string(hidden.size()), prev, out, rng));
  return m;
}

}  // namespace vhgm::ad
