// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Graph owns a tape of matrix-valued nodes created in topological
// order; backward() walks the tape in reverse and accumulates adjoints.
// Batched activations store one sample per column, so a linear layer is
// a single matrix product. Parameters live outside the graph in Tensor
// objects and receive their gradients directly. Back closures read
// operand values from the tape instead of copying them; the tape is
// append-only, so those references stay valid for the graph's lifetime.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::ad {

using Mat = Eigen::MatrixXd;

/// A learnable parameter: value plus gradient accumulator. The gradient
/// buffer is mutable so a logically const model can accumulate adjoints.
struct Tensor {
  Mat value;
  mutable Mat grad;

  explicit Tensor(Mat v = Mat()) : value(std::move(v)) { zero_grad(); }
  void zero_grad() const { grad = Mat::Zero(value.rows(), value.cols()); }
};

class Graph;

/// Lightweight handle to a node owned by a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  int id() const { return id_; }
  Graph* graph() const { return graph_; }

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using BackFn = std::function<void(const Mat&)>;

  Graph() { nodes_.reserve(4096); }

  Var constant(Mat v) { return make_node(std::move(v), false); }

  Var param(const Tensor& t) {
    Var v = make_node(t.value, true);
    nodes_.back().external = &t;
    return v;
  }

  /// Leaf copy of v's value with gradient flow blocked.
  Var detach(const Var& v) { return constant(value(v)); }

  const Mat& value(const Var& v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }
  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  /// Adjoint of a node; valid after backward(), zero if untouched.
  Mat grad(const Var& v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id())];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Seeds d(root)/d(root) = 1 and accumulates adjoints down the tape.
  /// Parameter gradients are ADDED to their Tensor's grad, so callers
  /// control zeroing.
  void backward(const Var& root) {
    if (value(root).size() != 1) throw ContractError("backward: root must be a 1x1 scalar");
    std::size_t root_id = static_cast<std::size_t>(root.id());
    accum(root.id(), Mat::Ones(1, 1));
    for (std::size_t i = root_id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.size() == 0) continue;
      if (n.external != nullptr) n.external->grad += n.grad;
      if (n.back) n.back(n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

  Var make_node(Mat v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
  }

  void set_back(const Var& v, BackFn back) {
    nodes_[static_cast<std::size_t>(v.id())].back = std::move(back);
  }

  bool needs_grad(const Var& v) const {
    return nodes_[static_cast<std::size_t>(v.id())].needs_grad;
  }

  void accum(int id, const Mat& delta) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = delta;
    else
      n.grad += delta;
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
    const Tensor* external = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return graph_->value(*this); }

namespace detail {
inline Graph& same_graph(const Var& a, const Var& b) {
  if (a.graph() != b.graph()) throw ContractError("ad: operands from different graphs");
  return *a.graph();
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra ops. Each creates one node; the back
// closure pulls the output adjoint and pushes contributions to parents.
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  Var out = g.make_node(a.value() + b.value(), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id()](const Mat& gout) {
    g.accum(ia, gout);
    g.accum(ib, gout);
  });
  return out;
}

inline Var sub(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  Var out = g.make_node(a.value() - b.value(), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id()](const Mat& gout) {
    g.accum(ia, gout);
    g.accum(ib, -gout);
  });
  return out;
}

/// a + b with b an (m x 1) column broadcast over a's columns.
inline Var add_colwise(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (b.cols() != 1 || b.rows() != a.rows())
    throw ContractError("add_colwise: bias must be (rows(a) x 1)");
  Mat v = a.value();
  v.colwise() += b.value().col(0);
  Var out = g.make_node(std::move(v), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id()](const Mat& gout) {
    g.accum(ia, gout);
    g.accum(ib, gout.rowwise().sum());
  });
  return out;
}

inline Var matmul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimension mismatch");
  Var out = g.make_node(a.value() * b.value(), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id()](const Mat& gout) {
    g.accum(ia, gout * g.value(ib).transpose());
    g.accum(ib, g.value(ia).transpose() * gout);
  });
  return out;
}

inline Var cmul(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  Var out = g.make_node(a.value().cwiseProduct(b.value()), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id()](const Mat& gout) {
    g.accum(ia, gout.cwiseProduct(g.value(ib)));
    g.accum(ib, gout.cwiseProduct(g.value(ia)));
  });
  return out;
}

inline Var cdiv(const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  Var out = g.make_node(a.value().cwiseQuotient(b.value()), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id(), io = out.id()](const Mat& gout) {
    g.accum(ia, gout.cwiseQuotient(g.value(ib)));
    g.accum(ib, -gout.cwiseProduct(g.value(io)).cwiseQuotient(g.value(ib)));
  });
  return out;
}

/// alpha * a + beta, elementwise.
inline Var affine(const Var& a, double alpha, double beta = 0.0) {
  Graph& g = *a.graph();
  Var out = g.make_node((a.value().array() * alpha + beta).matrix(), g.needs_grad(a));
  g.set_back(out,
             [&g, ia = a.id(), alpha](const Mat& gout) { g.accum(ia, alpha * gout); });
  return out;
}

inline Var neg(const Var& a) { return affine(a, -1.0); }

inline Var tanh(const Var& a) {
  Graph& g = *a.graph();
  Var out = g.make_node(a.value().array().tanh().matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), io = out.id()](const Mat& gout) {
    g.accum(ia, gout.cwiseProduct((1.0 - g.value(io).array().square()).matrix()));
  });
  return out;
}

inline Var sigmoid(const Var& a) {
  Graph& g = *a.graph();
  Var out =
      g.make_node((0.5 * (0.5 * a.value().array()).tanh() + 0.5).matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), io = out.id()](const Mat& gout) {
    const auto& y = g.value(io).array();
    g.accum(ia, gout.cwiseProduct((y * (1.0 - y)).matrix()));
  });
  return out;
}

inline Var exp(const Var& a) {
  Graph& g = *a.graph();
  Var out = g.make_node(a.value().array().exp().matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), io = out.id()](const Mat& gout) {
    g.accum(ia, gout.cwiseProduct(g.value(io)));
  });
  return out;
}

inline Var log(const Var& a) {
  Graph& g = *a.graph();
  Var out = g.make_node(a.value().array().log().matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id()](const Mat& gout) {
    g.accum(ia, gout.cwiseQuotient(g.value(ia)));
  });
  return out;
}

inline Var square(const Var& a) {
  Graph& g = *a.graph();
  Var out = g.make_node(a.value().array().square().matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id()](const Mat& gout) {
    g.accum(ia, 2.0 * gout.cwiseProduct(g.value(ia)));
  });
  return out;
}

/// Hard clamp; the adjoint passes only where the input is interior.
inline Var clamp(const Var& a, double lo, double hi) {
  Graph& g = *a.graph();
  Var out = g.make_node(a.value().array().max(lo).min(hi).matrix(), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), lo, hi](const Mat& gout) {
    const auto& x = g.value(ia).array();
    Mat mask = ((x > lo) && (x < hi)).cast<double>().matrix();
    g.accum(ia, gout.cwiseProduct(mask));
  });
  return out;
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  Graph& g = *parts.front().graph();
  Eigen::Index total = 0, cols = parts.front().cols();
  bool ng = false;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column-count mismatch");
    total += p.rows();
    ng = ng || g.needs_grad(p);
  }
  Mat v(total, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  layout.reserve(parts.size());
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    layout.emplace_back(p.id(), p.rows());
    r += p.rows();
  }
  Var out = g.make_node(std::move(v), ng);
  g.set_back(out, [&g, layout](const Mat& gout) {
    Eigen::Index r = 0;
    for (auto [id, n] : layout) {
      g.accum(id, gout.middleRows(r, n));
      r += n;
    }
  });
  return out;
}

inline Var slice_rows(const Var& a, Eigen::Index r0, Eigen::Index n) {
  Graph& g = *a.graph();
  if (r0 < 0 || n < 1 || r0 + n > a.rows()) throw ContractError("slice_rows: range out of bounds");
  Var out = g.make_node(a.value().middleRows(r0, n), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), r0, n](const Mat& gout) {
    Mat full = Mat::Zero(g.value(ia).rows(), g.value(ia).cols());
    full.middleRows(r0, n) = gout;
    g.accum(ia, full);
  });
  return out;
}

inline Var sum_all(const Var& a) {
  Graph& g = *a.graph();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id()](const Mat& gout) {
    g.accum(ia, Mat::Constant(g.value(ia).rows(), g.value(ia).cols(), gout(0, 0)));
  });
  return out;
}

/// Keeps a's column j where mask[j] != 0, b's column otherwise.
inline Var select_cols(const Eigen::ArrayXd& mask, const Var& a, const Var& b) {
  Graph& g = detail::same_graph(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols() || mask.size() != a.cols())
    throw ContractError("select_cols: shape mismatch");
  Mat v = b.value();
  for (Eigen::Index j = 0; j < mask.size(); ++j)
    if (mask[j] != 0.0) v.col(j) = a.value().col(j);
  Var out = g.make_node(std::move(v), g.needs_grad(a) || g.needs_grad(b));
  g.set_back(out, [&g, ia = a.id(), ib = b.id(), mask](const Mat& gout) {
    Mat ga = Mat::Zero(gout.rows(), gout.cols());
    Mat gb = Mat::Zero(gout.rows(), gout.cols());
    for (Eigen::Index j = 0; j < mask.size(); ++j)
      (mask[j] != 0.0 ? ga : gb).col(j) = gout.col(j);
    g.accum(ia, ga);
    g.accum(ib, gb);
  });
  return out;
}

/// Scales each column j by the constant mask[j] (0/1 presence masks).
inline Var scale_cols(const Var& a, const Eigen::ArrayXd& mask) {
  Graph& g = *a.graph();
  if (mask.size() != a.cols()) throw ContractError("scale_cols: mask length mismatch");
  Mat v = a.value();
  for (Eigen::Index j = 0; j < mask.size(); ++j) v.col(j) *= mask[j];
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), mask](const Mat& gout) {
    Mat gp = gout;
    for (Eigen::Index j = 0; j < mask.size(); ++j) gp.col(j) *= mask[j];
    g.accum(ia, gp);
  });
  return out;
}

/// out.col(j) = a.col(indices[j]), with index -1 producing a zero column
/// (padded im2col gathers); the adjoint scatter-adds.
inline Var gather_cols(const Var& a, const std::vector<int>& indices) {
  Graph& g = *a.graph();
  Eigen::Index rows = a.rows(), cols = a.cols();
  Mat v(rows, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= cols) throw ContractError("gather_cols: index out of range");
    if (indices[j] < 0)
      v.col(static_cast<Eigen::Index>(j)).setZero();
    else
      v.col(static_cast<Eigen::Index>(j)) = a.value().col(indices[j]);
  }
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), indices](const Mat& gout) {
    Mat ga = Mat::Zero(g.value(ia).rows(), g.value(ia).cols());
    for (std::size_t j = 0; j < indices.size(); ++j)
      if (indices[j] >= 0) ga.col(indices[j]) += gout.col(static_cast<Eigen::Index>(j));
    g.accum(ia, ga);
  });
  return out;
}

/// Layout change for grid convolutions: ((channels * P) x B) activations
/// with rows ordered channel-major become (channels x (P * B)) with
/// columns ordered position-major. Bijective, so the adjoint is the
/// inverse permutation.
inline Var to_channel_layout(const Var& a, Eigen::Index channels) {
  Graph& g = *a.graph();
  if (a.rows() % channels != 0) throw ContractError("to_channel_layout: row count not divisible");
  const Eigen::Index p = a.rows() / channels, b = a.cols();
  Mat v(channels, p * b);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index pos = 0; pos < p; ++pos)
      for (Eigen::Index s = 0; s < b; ++s) v(c, pos * b + s) = a.value()(c * p + pos, s);
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), channels, p, b](const Mat& gout) {
    Mat ga(channels * p, b);
    for (Eigen::Index c = 0; c < channels; ++c)
      for (Eigen::Index pos = 0; pos < p; ++pos)
        for (Eigen::Index s = 0; s < b; ++s) ga(c * p + pos, s) = gout(c, pos * b + s);
    g.accum(ia, ga);
  });
  return out;
}

/// Inverse of to_channel_layout.
inline Var from_channel_layout(const Var& a, Eigen::Index batch) {
  Graph& g = *a.graph();
  if (a.cols() % batch != 0) throw ContractError("from_channel_layout: column count not divisible");
  const Eigen::Index channels = a.rows(), p = a.cols() / batch;
  Mat v(channels * p, batch);
  for (Eigen::Index c = 0; c < channels; ++c)
    for (Eigen::Index pos = 0; pos < p; ++pos)
      for (Eigen::Index s = 0; s < batch; ++s) v(c * p + pos, s) = a.value()(c, pos * batch + s);
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), channels, p, batch](const Mat& gout) {
    Mat ga(channels, p * batch);
    for (Eigen::Index c = 0; c < channels; ++c)
      for (Eigen::Index pos = 0; pos < p; ++pos)
        for (Eigen::Index s = 0; s < batch; ++s) ga(c, pos * batch + s) = gout(c * p + pos, s);
    g.accum(ia, ga);
  });
  return out;
}

/// out.row(i) = a.row(indices[i]), with index -1 producing a zero row
/// (padded im2col gathers, nearest-neighbor upsampling).
inline Var gather_rows(const Var& a, const std::vector<int>& indices) {
  Graph& g = *a.graph();
  Eigen::Index rows = a.rows(), cols = a.cols();
  Mat v(static_cast<Eigen::Index>(indices.size()), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw ContractError("gather_rows: index out of range");
    if (indices[i] < 0)
      v.row(static_cast<Eigen::Index>(i)).setZero();
    else
      v.row(static_cast<Eigen::Index>(i)) = a.value().row(indices[i]);
  }
  Var out = g.make_node(std::move(v), g.needs_grad(a));
  g.set_back(out, [&g, ia = a.id(), indices](const Mat& gout) {
    Mat ga = Mat::Zero(g.value(ia).rows(), g.value(ia).cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
      if (indices[i] >= 0) ga.row(indices[i]) += gout.row(static_cast<Eigen::Index>(i));
    g.accum(ia, ga);
  });
  return out;
}

inline Var detach(const Var& a) { return a.graph()->detach(a); }

}  // namespace cmlf::ad
