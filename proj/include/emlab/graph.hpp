#pragma once

#include "emlab/tensor.hpp"

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace emlab {

// Named persistent parameter tensors. A Graph binds to one store; gradients
// from backward() are indexed by parameter handle.
class ParamStore {
 public:
  int add(std::string name, Tensor value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return static_cast<int>(values_.size()) - 1;
  }

  int size() const { return static_cast<int>(values_.size()); }
  Tensor& value(int handle) { return values_.at(static_cast<size_t>(handle)); }
  const Tensor& value(int handle) const { return values_.at(static_cast<size_t>(handle)); }
  const std::string& name(int handle) const { return names_.at(static_cast<size_t>(handle)); }

  /// Zero tensors shaped like every parameter (gradient accumulators).
  std::vector<Tensor> zeros_like() const {
    std::vector<Tensor> out;
    out.reserve(values_.size());
    for (const Tensor& t : values_) out.push_back(Tensor::zeros(t.shape));
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Pure Gumbel-Softmax relaxation: softmax((logits + noise) / temperature),
/// row-wise. noise holds standard-Gumbel samples (zeros in deterministic
/// test mode).
inline Tensor gumbel_softmax(const Tensor& logits, double temperature, const Tensor& noise) {
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_softmax: temperature must be > 0");
  check_same_shape(logits, noise, "gumbel_softmax");
  Tensor out = Tensor::zeros(logits.shape);
  const int m = logits.rows(), n = logits.cols();
  const double inv_t = 1.0 / temperature;
  for (int r = 0; r < m; ++r) {
    double mx = -HUGE_VAL;
    for (int c = 0; c < n; ++c)
      mx = std::max(mx, (static_cast<double>(logits.at(r, c)) + noise.at(r, c)) * inv_t);
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
      double e = std::exp((static_cast<double>(logits.at(r, c)) + noise.at(r, c)) * inv_t - mx);
      out.at(r, c) = static_cast<float>(e);
      sum += e;
    }
    const float inv_sum = static_cast<float>(1.0 / sum);
    for (int c = 0; c < n; ++c) out.at(r, c) *= inv_sum;
  }
  return out;
}

// Reverse-mode tape. Operations append nodes eagerly (forward values computed
// at build time); backward() walks the tape in reverse creation order, which
// is a valid topological order by construction.
class Graph {
 public:
  /// `grads` false builds a forward-only tape (no backward closures).
  explicit Graph(ParamStore* params = nullptr, bool grads = true)
      : params_(params), grads_enabled_(grads) {}

  // -- leaves ----------------------------------------------------------

  /// Constant input (no gradient flows into it).
  int constant(Tensor t) { return add_node(std::move(t), false, -1); }

  /// Leaf bound to a stored parameter. Memoized: one node per handle.
  int param(int handle) {
    auto it = param_nodes_.find(handle);
    if (it != param_nodes_.end()) return it->second;
    int id = add_node(Tensor{}, true, handle);
    param_nodes_.emplace(handle, id);
    return id;
  }

  const Tensor& val(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    if (n.param >= 0) return params_->value(n.param);
    return n.value;
  }

  bool needs(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }

  /// Gradient accumulator for a node, zero-initialized on first touch.
  Tensor& grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) n.grad = Tensor::zeros({val(id).rows(), val(id).cols()});
    return n.grad;
  }

  size_t size() const { return nodes_.size(); }

  // -- operations ------------------------------------------------------

  int matmul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dimensions disagree");
    Tensor out = Tensor::zeros({A.rows(), B.cols()});
    mat(out).noalias() = mat(A) * mat(B);
    int id = add_node(std::move(out), needs(a) || needs(b), -1);
    if (needs(id))
      nodes_.back().back = [a, b, id](Graph& g) {
        const Tensor& dO = g.node_grad(id);
        if (g.needs(a)) mat(g.grad(a)).noalias() += mat(dO) * mat(g.val(b)).transpose();
        if (g.needs(b)) mat(g.grad(b)).noalias() += mat(g.val(a)).transpose() * mat(dO);
      };
    return id;
  }

  int add(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "add");
    Tensor out = A;
    mat(out) += mat(B);
    return elementwise_binary(std::move(out), a, b,
                              [](Graph& g, int a_, int b_, const Tensor& dO) {
                                if (g.needs(a_)) mat(g.grad(a_)) += mat(dO);
                                if (g.needs(b_)) mat(g.grad(b_)) += mat(dO);
                              });
  }

  int sub(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "sub");
    Tensor out = A;
    mat(out) -= mat(B);
    return elementwise_binary(std::move(out), a, b,
                              [](Graph& g, int a_, int b_, const Tensor& dO) {
                                if (g.needs(a_)) mat(g.grad(a_)) += mat(dO);
                                if (g.needs(b_)) mat(g.grad(b_)) -= mat(dO);
                              });
  }

  int mul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    check_same_shape(A, B, "mul");
    Tensor out = A;
    mat(out).array() *= mat(B).array();
    return elementwise_binary(std::move(out), a, b,
                              [](Graph& g, int a_, int b_, const Tensor& dO) {
                                if (g.needs(a_))
                                  mat(g.grad(a_)).array() += mat(dO).array() * mat(g.val(b_)).array();
                                if (g.needs(b_))
                                  mat(g.grad(b_)).array() += mat(dO).array() * mat(g.val(a_)).array();
                              });
  }

  /// y = alpha * x + beta (scalars broadcast over every element).
  int affine(int a, float alpha, float beta) {
    Tensor out = val(a);
    mat(out).array() = alpha * mat(out).array() + beta;
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id, alpha](Graph& g) {
        mat(g.grad(a)) += alpha * mat(g.node_grad(id));
      };
    return id;
  }

  /// Broadcast-add a row vector b[n] to every row of a[m, n].
  int add_rowvec(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw std::invalid_argument("add_rowvec: bias shape mismatch");
    Tensor out = A;
    mat(out).rowwise() += Eigen::Map<const Eigen::RowVectorXf>(B.v.data(), B.cols());
    int id = add_node(std::move(out), needs(a) || needs(b), -1);
    if (needs(id))
      nodes_.back().back = [a, b, id](Graph& g) {
        const Tensor& dO = g.node_grad(id);
        if (g.needs(a)) mat(g.grad(a)) += mat(dO);
        if (g.needs(b))
          Eigen::Map<Eigen::RowVectorXf>(g.grad(b).v.data(), g.grad(b).cols()) +=
              mat(dO).colwise().sum();
      };
    return id;
  }

  int tanh_op(int a) {
    Tensor out = val(a);
    mat(out).array() = mat(out).array().tanh();
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id](Graph& g) {
        const auto y = mat(g.val(id)).array();
        mat(g.grad(a)).array() += mat(g.node_grad(id)).array() * (1.0f - y * y);
      };
    return id;
  }

  int sigmoid_op(int a) {
    Tensor out = val(a);
    mat(out).array() = 0.5f * (0.5f * mat(out).array()).tanh() + 0.5f;  // stable logistic
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id](Graph& g) {
        const auto y = mat(g.val(id)).array();
        mat(g.grad(a)).array() += mat(g.node_grad(id)).array() * y * (1.0f - y);
      };
    return id;
  }

  /// Columns [c0, c0+len) of a [m, n] tensor.
  int slice_cols(int a, int c0, int len) {
    const Tensor& A = val(a);
    if (c0 < 0 || len <= 0 || c0 + len > A.cols())
      throw std::invalid_argument("slice_cols: range out of bounds");
    Tensor out = Tensor::zeros({A.rows(), len});
    mat(out) = mat(A).middleCols(c0, len);
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id, c0, len](Graph& g) {
        mat(g.grad(a)).middleCols(c0, len) += mat(g.node_grad(id));
      };
    return id;
  }

  /// Rows of M[V, E] selected by integer ids; the embedding-lookup primitive.
  int gather_rows(int m_id, std::vector<int> ids) {
    const Tensor& M = val(m_id);
    for (int i : ids)
      if (i < 0 || i >= M.rows()) throw std::invalid_argument("gather_rows: id out of range");
    Tensor out = Tensor::zeros({static_cast<int>(ids.size()), M.cols()});
    for (size_t r = 0; r < ids.size(); ++r)
      mat(out).row(static_cast<int>(r)) = mat(M).row(ids[r]);
    int id = add_node(std::move(out), needs(m_id), -1);
    if (needs(id))
      nodes_.back().back = [m_id, id, ids = std::move(ids)](Graph& g) {
        const Tensor& dO = g.node_grad(id);
        auto gM = mat(g.grad(m_id));
        for (size_t r = 0; r < ids.size(); ++r)
          gM.row(ids[r]) += mat(dO).row(static_cast<int>(r));
      };
    return id;
  }

  /// out[i, c] = dot(a.row(i), b.row(i*group + c)); scores one query row
  /// against its group of candidate rows.
  int grouped_dot(int a, int b, int group) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (group <= 0 || B.rows() != A.rows() * group || B.cols() != A.cols())
      throw std::invalid_argument("grouped_dot: shape mismatch");
    Tensor out = Tensor::zeros({A.rows(), group});
    for (int i = 0; i < A.rows(); ++i)
      for (int c = 0; c < group; ++c)
        out.at(i, c) = mat(A).row(i).dot(mat(B).row(i * group + c));
    int id = add_node(std::move(out), needs(a) || needs(b), -1);
    if (needs(id))
      nodes_.back().back = [a, b, id, group](Graph& g) {
        const Tensor& dO = g.node_grad(id);
        const auto A_ = mat(g.val(a));
        const auto B_ = mat(g.val(b));
        for (int i = 0; i < A_.rows(); ++i)
          for (int c = 0; c < group; ++c) {
            const float d = dO.at(i, c);
            if (d == 0.0f) continue;
            if (g.needs(a)) mat(g.grad(a)).row(i) += d * B_.row(i * group + c);
            if (g.needs(b)) mat(g.grad(b)).row(i * group + c) += d * A_.row(i);
          }
      };
    return id;
  }

  /// Differentiable Gumbel-Softmax over rows; noise is a constant input.
  int gumbel_softmax_rows(int logits, double temperature, const Tensor& noise) {
    Tensor out = gumbel_softmax(val(logits), temperature, noise);
    int id = add_node(std::move(out), needs(logits), -1);
    if (needs(id))
      nodes_.back().back = [logits, id, temperature](Graph& g) {
        const Tensor& y = g.val(id);
        const Tensor& dY = g.node_grad(id);
        Tensor& dL = g.grad(logits);
        const float inv_t = static_cast<float>(1.0 / temperature);
        for (int r = 0; r < y.rows(); ++r) {
          float s = 0.0f;
          for (int c = 0; c < y.cols(); ++c) s += dY.at(r, c) * y.at(r, c);
          for (int c = 0; c < y.cols(); ++c)
            dL.at(r, c) += y.at(r, c) * (dY.at(r, c) - s) * inv_t;
        }
      };
    return id;
  }

  /// Mean negative log-likelihood (nats) of integer targets under
  /// softmax(logits) rows. Numerically stable; fused forward/backward.
  int cross_entropy_rows(int logits, std::vector<int> targets) {
    const Tensor& L = val(logits);
    if (static_cast<int>(targets.size()) != L.rows())
      throw std::invalid_argument("cross_entropy_rows: one target per row required");
    auto probs = std::make_shared<Tensor>(Tensor::zeros({L.rows(), L.cols()}));
    double total = 0.0;
    for (int r = 0; r < L.rows(); ++r) {
      const int t = targets[static_cast<size_t>(r)];
      if (t < 0 || t >= L.cols()) throw std::invalid_argument("cross_entropy_rows: target out of range");
      float mx = L.at(r, 0);
      for (int c = 1; c < L.cols(); ++c) mx = std::max(mx, L.at(r, c));
      double sum = 0.0;
      for (int c = 0; c < L.cols(); ++c) {
        double e = std::exp(static_cast<double>(L.at(r, c)) - mx);
        probs->at(r, c) = static_cast<float>(e);
        sum += e;
      }
      const float inv_sum = static_cast<float>(1.0 / sum);
      for (int c = 0; c < L.cols(); ++c) probs->at(r, c) *= inv_sum;
      total += -(static_cast<double>(L.at(r, t)) - mx - std::log(sum));
    }
    Tensor out = Tensor::scalar(static_cast<float>(total / L.rows()));
    int id = add_node(std::move(out), needs(logits), -1);
    if (needs(id))
      nodes_.back().back = [logits, id, probs, targets = std::move(targets)](Graph& g) {
        const float d = g.node_grad(id).v[0] / static_cast<float>(probs->rows());
        Tensor& dL = g.grad(logits);
        for (int r = 0; r < probs->rows(); ++r) {
          for (int c = 0; c < probs->cols(); ++c) dL.at(r, c) += d * probs->at(r, c);
          dL.at(r, targets[static_cast<size_t>(r)]) -= d;
        }
      };
    return id;
  }

  int mean_all(int a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (float x : A.v) s += x;
    Tensor out = Tensor::scalar(static_cast<float>(s / A.numel()));
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id](Graph& g) {
        const float d = g.node_grad(id).v[0] / static_cast<float>(g.val(a).numel());
        mat(g.grad(a)).array() += d;
      };
    return id;
  }

  int sum_all(int a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (float x : A.v) s += x;
    Tensor out = Tensor::scalar(static_cast<float>(s));
    int id = add_node(std::move(out), needs(a), -1);
    if (needs(id))
      nodes_.back().back = [a, id](Graph& g) {
        mat(g.grad(a)).array() += g.node_grad(id).v[0];
      };
    return id;
  }

  // -- reverse pass ------------------------------------------------------

  /// Gradients of a scalar loss w.r.t. every parameter in the bound store.
  /// Parameters the loss does not depend on get zero gradients.
  std::vector<Tensor> backward(int loss) {
    if (!params_) throw std::invalid_argument("backward: graph has no parameter store");
    std::vector<Tensor> grads = params_->zeros_like();
    backward_accumulate(loss, grads);
    return grads;
  }

  /// Same as backward() but accumulates into caller-owned buffers (hot path).
  void backward_accumulate(int loss, std::vector<Tensor>& grads) {
    const Tensor& L = val(loss);
    if (L.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!std::isfinite(L.v[0])) throw NumericError("backward: loss is not finite");
    grad(loss).v[0] = 1.0f;
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.grad.empty() || !n.back) continue;
      n.back(*this);
    }
    for (auto& [handle, node_id] : param_nodes_) {
      Node& n = nodes_[static_cast<size_t>(node_id)];
      if (n.grad.empty()) continue;
      if (!n.grad.all_finite()) throw NumericError("backward: NaN in gradient of " + params_->name(handle));
      check_same_shape(grads.at(static_cast<size_t>(handle)), n.grad, "backward");
      mat(grads[static_cast<size_t>(handle)]) += mat(n.grad);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    int param = -1;
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  const Tensor& node_grad(int id) const { return nodes_[static_cast<size_t>(id)].grad; }

  int add_node(Tensor value, bool needs_grad, int param) {
    Node n;
    n.value = std::move(value);
    n.param = param;
    n.needs_grad = grads_enabled_ && (needs_grad || param >= 0);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  template <typename Back>
  int elementwise_binary(Tensor out, int a, int b, Back back) {
    int id = add_node(std::move(out), needs(a) || needs(b), -1);
    if (needs(id))
      nodes_.back().back = [a, b, id, back](Graph& g) { back(g, a, b, g.node_grad(id)); };
    return id;
  }

  ParamStore* params_;
  bool grads_enabled_ = true;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
};

}  // namespace emlab
