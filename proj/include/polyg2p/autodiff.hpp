// Copyright (c) 2026 polyg2p authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "polyg2p/common.hpp"
#include "polyg2p/tensor.hpp"

namespace polyg2p {

constexpr double kLayerNormEpsilon = 1e-6;

template <typename S>
S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// log(sigmoid(x)) without underflow: -softplus(-x).
template <typename S>
S log_sigmoid(S x) {
  if (x >= S(0)) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

template <typename S>
S gelu_scalar(S x) {
  return S(0.5) * x * (S(1) + std::erf(x * S(0.70710678118654752440)));
}

template <typename S>
S gelu_grad_scalar(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x * S(0.70710678118654752440)));
  const S pdf = S(0.39894228040143267794) * std::exp(S(-0.5) * x * x);
  return cdf + x * pdf;
}

// Reverse-mode tape over dense matrices. Nodes are created in forward order,
// so creation order doubles as the topological order for backward(). Ops are
// single-consumer of earlier nodes; gradients accumulate, so reusing a node
// as input to several ops is fine.
template <typename S>
class Graph {
 public:
  using Matrix = Mat<S>;

  struct NodeRef {
    int id = -1;
  };

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

  const Matrix& value(NodeRef n) const { return nodes_.at(checked(n)).value; }
  const Matrix& grad(NodeRef n) const { return nodes_.at(checked(n)).grad; }

  // ---- leaves ----

  NodeRef constant(Matrix value) {
    return push(std::move(value), {});
  }

  // Dense parameter leaf; backward adds into p.grad.
  NodeRef leaf(Param<S>& p) {
    NodeRef n = push(p.value, {});
    Param<S>* param = &p;
    nodes_[n.id].backward = [this, n, param]() {
      param->grad += nodes_[n.id].grad;
    };
    return n;
  }

  // Selected rows of an embedding table; backward scatters into table.grad.
  NodeRef gather(Param<S>& table, std::vector<int> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), table.value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      check_row(table.value, rows[i]);
      out.row(static_cast<Eigen::Index>(i)) = table.value.row(rows[i]);
    }
    NodeRef n = push(std::move(out), {});
    Param<S>* param = &table;
    nodes_[n.id].backward = [this, n, param, rows = std::move(rows)]() {
      const Matrix& g = nodes_[n.id].grad;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        param->grad.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
      }
    };
    return n;
  }

  // ---- structural ----

  NodeRef select_row(NodeRef a, int row) {
    check_row(value(a), row);
    NodeRef n = push(value(a).row(row), {a});
    nodes_[n.id].backward = [this, n, a, row]() {
      nodes_[a.id].grad.row(row) += nodes_[n.id].grad;
    };
    return n;
  }

  NodeRef slice_cols(NodeRef a, Eigen::Index begin, Eigen::Index count) {
    const Matrix& v = value(a);
    if (begin < 0 || begin + count > v.cols()) {
      throw std::invalid_argument("slice_cols out of range");
    }
    NodeRef n = push(v.middleCols(begin, count), {a});
    nodes_[n.id].backward = [this, n, a, begin, count]() {
      nodes_[a.id].grad.middleCols(begin, count) += nodes_[n.id].grad;
    };
    return n;
  }

  NodeRef concat_cols(const std::vector<NodeRef>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    Eigen::Index cols = 0;
    const Eigen::Index rows = value(parts[0]).rows();
    for (NodeRef p : parts) {
      if (value(p).rows() != rows) {
        throw std::invalid_argument("concat_cols: row mismatch");
      }
      cols += value(p).cols();
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (NodeRef p : parts) {
      out.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    NodeRef n = push(std::move(out), parts);
    std::vector<NodeRef> inputs = parts;
    nodes_[n.id].backward = [this, n, inputs]() {
      const Matrix& g = nodes_[n.id].grad;
      Eigen::Index at = 0;
      for (NodeRef p : inputs) {
        const Eigen::Index w = nodes_[p.id].value.cols();
        nodes_[p.id].grad += g.middleCols(at, w);
        at += w;
      }
    };
    return n;
  }

  // ---- arithmetic ----

  NodeRef add(NodeRef a, NodeRef b) {
    check_same_shape(value(a), value(b), "add");
    NodeRef n = push(value(a) + value(b), {a, b});
    nodes_[n.id].backward = [this, n, a, b]() {
      nodes_[a.id].grad += nodes_[n.id].grad;
      nodes_[b.id].grad += nodes_[n.id].grad;
    };
    return n;
  }

  // a + beta * b, elementwise over identical shapes.
  NodeRef axpy(NodeRef a, NodeRef b, S beta) {
    check_same_shape(value(a), value(b), "axpy");
    NodeRef n = push(value(a) + beta * value(b), {a, b});
    nodes_[n.id].backward = [this, n, a, b, beta]() {
      nodes_[a.id].grad += nodes_[n.id].grad;
      nodes_[b.id].grad += beta * nodes_[n.id].grad;
    };
    return n;
  }

  NodeRef mul_scalar(NodeRef a, S c) {
    NodeRef n = push(c * value(a), {a});
    nodes_[n.id].backward = [this, n, a, c]() {
      nodes_[a.id].grad += c * nodes_[n.id].grad;
    };
    return n;
  }

  // Broadcast a 1 x cols bias over every row.
  NodeRef add_bias(NodeRef a, NodeRef bias) {
    const Matrix& v = value(a);
    const Matrix& b = value(bias);
    if (b.rows() != 1 || b.cols() != v.cols()) {
      throw std::invalid_argument("add_bias: bias must be 1 x cols");
    }
    Matrix out = v;
    out.rowwise() += b.row(0);
    NodeRef n = push(std::move(out), {a, bias});
    nodes_[n.id].backward = [this, n, a, bias]() {
      const Matrix& g = nodes_[n.id].grad;
      nodes_[a.id].grad += g;
      nodes_[bias.id].grad.row(0) += g.colwise().sum();
    };
    return n;
  }

  NodeRef matmul(NodeRef a, NodeRef b) {
    if (value(a).cols() != value(b).rows()) {
      throw std::invalid_argument("matmul: inner dimension mismatch");
    }
    NodeRef n = push(value(a) * value(b), {a, b});
    nodes_[n.id].backward = [this, n, a, b]() {
      const Matrix& g = nodes_[n.id].grad;
      nodes_[a.id].grad += g * nodes_[b.id].value.transpose();
      nodes_[b.id].grad += nodes_[a.id].value.transpose() * g;
    };
    return n;
  }

  // a * b^T
  NodeRef matmul_nt(NodeRef a, NodeRef b) {
    if (value(a).cols() != value(b).cols()) {
      throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    }
    NodeRef n = push(value(a) * value(b).transpose(), {a, b});
    nodes_[n.id].backward = [this, n, a, b]() {
      const Matrix& g = nodes_[n.id].grad;
      nodes_[a.id].grad += g * nodes_[b.id].value;
      nodes_[b.id].grad += g.transpose() * nodes_[a.id].value;
    };
    return n;
  }

  // ---- nonlinearities ----

  NodeRef gelu(NodeRef a) {
    NodeRef n = push(value(a).unaryExpr([](S x) { return gelu_scalar(x); }), {a});
    nodes_[n.id].backward = [this, n, a]() {
      const Matrix& x = nodes_[a.id].value;
      nodes_[a.id].grad.array() +=
          nodes_[n.id].grad.array() *
          x.unaryExpr([](S v) { return gelu_grad_scalar(v); }).array();
    };
    return n;
  }

  // Softmax along each row.
  NodeRef row_softmax(NodeRef a) {
    const Matrix& v = value(a);
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const S m = v.row(r).maxCoeff();
      out.row(r) = (v.row(r).array() - m).exp().matrix();
      out.row(r) /= out.row(r).sum();
    }
    NodeRef n = push(std::move(out), {a});
    nodes_[n.id].backward = [this, n, a]() {
      const Matrix& p = nodes_[n.id].value;
      const Matrix& g = nodes_[n.id].grad;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const S dot = g.row(r).cwiseProduct(p.row(r)).sum();
        nodes_[a.id].grad.row(r).array() +=
            p.row(r).array() * (g.row(r).array() - dot);
      }
    };
    return n;
  }

  // Per-row normalization to zero mean and unit variance, then scale/offset.
  NodeRef layer_norm(NodeRef a, NodeRef gamma, NodeRef beta) {
    const Matrix& x = value(a);
    const Matrix& gm = value(gamma);
    const Matrix& bt = value(beta);
    if (gm.rows() != 1 || gm.cols() != x.cols() || bt.rows() != 1 ||
        bt.cols() != x.cols()) {
      throw std::invalid_argument("layer_norm: scale/offset must be 1 x cols");
    }
    const S d = static_cast<S>(x.cols());
    Matrix normalized(x.rows(), x.cols());
    Eigen::Matrix<S, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const S mean = x.row(r).mean();
      const S var = (x.row(r).array() - mean).square().sum() / d;
      inv_std(r) = S(1) / std::sqrt(var + S(kLayerNormEpsilon));
      normalized.row(r) = ((x.row(r).array() - mean) * inv_std(r)).matrix();
    }
    Matrix out = normalized;
    out.array().rowwise() *= gm.row(0).array();
    out.rowwise() += bt.row(0);
    NodeRef n = push(std::move(out), {a, gamma, beta});
    nodes_[n.id].backward = [this, n, a, gamma, beta,
                             normalized = std::move(normalized),
                             inv_std = std::move(inv_std), d]() {
      const Matrix& g = nodes_[n.id].grad;
      const Matrix& gm = nodes_[gamma.id].value;
      nodes_[beta.id].grad.row(0) += g.colwise().sum();
      nodes_[gamma.id].grad.row(0) +=
          g.cwiseProduct(normalized).colwise().sum();
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const auto gh = (g.row(r).array() * gm.row(0).array()).eval();
        const S mean_gh = gh.sum() / d;
        const S mean_gh_y = (gh * normalized.row(r).array()).sum() / d;
        nodes_[a.id].grad.row(r).array() +=
            inv_std(r) *
            (gh - mean_gh - normalized.row(r).array() * mean_gh_y);
      }
    };
    return n;
  }

  // Inverted dropout; scales kept entries by 1/(1-rate).
  NodeRef dropout(NodeRef a, double rate, Rng& rng) {
    if (rate <= 0.0) return a;
    if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
    const Matrix& v = value(a);
    Matrix mask(v.rows(), v.cols());
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        mask(r, c) = rng.uniform() < rate ? S(0) : keep_scale;
      }
    }
    NodeRef n = push(v.cwiseProduct(mask), {a});
    nodes_[n.id].backward = [this, n, a, mask = std::move(mask)]() {
      nodes_[a.id].grad += nodes_[n.id].grad.cwiseProduct(mask);
    };
    return n;
  }

  // ---- losses (1 x n logits -> 1 x 1 loss) ----

  NodeRef softmax_ce(NodeRef logits, int gold) {
    const Matrix& z = value(logits);
    if (z.rows() != 1) throw std::invalid_argument("softmax_ce: logits must be 1 x n");
    check_col(z, gold);
    const S m = z.row(0).maxCoeff();
    const S lse = m + std::log((z.row(0).array() - m).exp().sum());
    Matrix probs = (z.row(0).array() - lse).exp().matrix();
    Matrix loss(1, 1);
    loss(0, 0) = lse - z(0, gold);
    NodeRef n = push(std::move(loss), {logits});
    nodes_[n.id].backward = [this, n, logits, gold,
                             probs = std::move(probs)]() {
      const S g = nodes_[n.id].grad(0, 0);
      nodes_[logits.id].grad.row(0) += g * probs.row(0);
      nodes_[logits.id].grad(0, gold) -= g;
    };
    return n;
  }

  // Cross entropy of the candidate-weighted softmax. Off-mask classes carry
  // zero probability; on-mask classes are weighted by sigmoid(soft weights)
  // when `soft` is present and by 1 otherwise. Evaluated in log space:
  // z_i = logit_i + log_sigmoid(ws_i) on the candidate support.
  NodeRef weighted_ce(NodeRef logits, std::optional<NodeRef> soft,
                      const std::vector<std::uint8_t>& mask, int gold) {
    const Matrix& z = value(logits);
    if (z.rows() != 1) throw std::invalid_argument("weighted_ce: logits must be 1 x n");
    if (static_cast<Eigen::Index>(mask.size()) != z.cols()) {
      throw std::invalid_argument("weighted_ce: mask length mismatch");
    }
    check_col(z, gold);
    if (!mask[static_cast<std::size_t>(gold)]) {
      throw DataError("gold phoneme outside candidate support");
    }
    std::vector<int> support;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) support.push_back(static_cast<int>(i));
    }
    if (support.empty()) throw DataError("empty candidate support");

    Eigen::Matrix<S, 1, Eigen::Dynamic> zs(1, support.size());
    for (std::size_t k = 0; k < support.size(); ++k) {
      S zi = z(0, support[k]);
      if (soft) zi += log_sigmoid(value(*soft)(0, support[k]));
      zs(0, static_cast<Eigen::Index>(k)) = zi;
    }
    const S m = zs.maxCoeff();
    const S lse = m + std::log((zs.array() - m).exp().sum());
    Eigen::Matrix<S, 1, Eigen::Dynamic> probs =
        (zs.array() - lse).exp().matrix();

    int gold_slot = -1;
    for (std::size_t k = 0; k < support.size(); ++k) {
      if (support[k] == gold) gold_slot = static_cast<int>(k);
    }
    Matrix loss(1, 1);
    loss(0, 0) = lse - zs(0, gold_slot);

    std::vector<NodeRef> parents = {logits};
    if (soft) parents.push_back(*soft);
    NodeRef n = push(std::move(loss), parents);
    nodes_[n.id].backward = [this, n, logits, soft, gold_slot,
                             support = std::move(support),
                             probs = std::move(probs)]() {
      const S g = nodes_[n.id].grad(0, 0);
      for (std::size_t k = 0; k < support.size(); ++k) {
        S delta = probs(0, static_cast<Eigen::Index>(k));
        if (static_cast<int>(k) == gold_slot) delta -= S(1);
        nodes_[logits.id].grad(0, support[k]) += g * delta;
        if (soft) {
          // d/dw log_sigmoid(w) = sigmoid(-w)
          const S w = nodes_[soft->id].value(0, support[k]);
          nodes_[soft->id].grad(0, support[k]) +=
              g * delta * stable_sigmoid(-w);
        }
      }
    };
    return n;
  }

  // Runs all backward closures in reverse creation order, seeding the loss
  // gradient with 1.
  void backward(NodeRef loss) {
    if (value(loss).size() != 1) {
      throw std::invalid_argument("backward: loss must be a scalar node");
    }
    for (auto& node : nodes_) {
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    }
    nodes_[checked(loss)].grad(0, 0) = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->backward) it->backward();
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void()> backward;
  };

  int checked(NodeRef n) const {
    if (n.id < 0 || static_cast<std::size_t>(n.id) >= nodes_.size()) {
      throw std::invalid_argument("invalid node reference");
    }
    return n.id;
  }

  static void check_same_shape(const Matrix& a, const Matrix& b,
                               const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
  }

  static void check_row(const Matrix& m, int row) {
    if (row < 0 || row >= m.rows()) {
      throw std::invalid_argument("row index out of range");
    }
  }

  static void check_col(const Matrix& m, int col) {
    if (col < 0 || col >= m.cols()) {
      throw std::invalid_argument("column index out of range");
    }
  }

  NodeRef push(Matrix value, const std::vector<NodeRef>&) {
    nodes_.push_back(Node{std::move(value), Matrix(), nullptr});
    return NodeRef{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace polyg2p
