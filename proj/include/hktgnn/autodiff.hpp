#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hktgnn/supply_graph.hpp"

// Reverse-mode differentiation over dense row-major matrices. Every value is a
// 2-D matrix; vectors are 1 x n rows, scalars 1 x 1. Ops are recorded on a
// Tape in execution order, so replaying the list backwards is a reverse
// topological traversal.
namespace hktgnn::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient accumulated by Tape::backward; zero-sized if none reached this node.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1 x 1.
  void backward(const Var& loss);

  // Op-author API.
  Var record(Matrix value, bool requires_grad, Backward backward);
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient slot for id, zero-initialized on first access.
  Matrix& grad_slot(std::size_t id);
  void accumulate(std::size_t id, const Matrix& g);
  void accumulate(std::size_t id, Matrix&& g);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

using Index = std::vector<std::size_t>;

// Linear algebra and structure.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);             // elementwise
Var add_row(const Var& a, const Var& row);       // a (n x d) + row (1 x d) broadcast
Var mul_col(const Var& a, const Var& col);       // a (n x d) * col (n x 1) broadcast
Var scale(const Var& a, double factor);
Var mul_scalar(const Var& a, const Var& s);      // s is 1 x 1
Var concat_cols(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
Var gather_rows(const Var& a, const Index& rows);
Var scatter_add_rows(const Var& a, const Index& rows, std::size_t n);
Var repeat_rows(const Var& row, std::size_t n);
Var column(const Var& a, Eigen::Index j);
Var detach(const Var& a);

// Fused kernels (one tape node each).
/// leaky_relu(x w + b) with the given slope; slope 1 leaves the map affine.
Var linear(const Var& x, const Var& w, const Var& b, double slope = 1.0);
/// (1 + eps) h + sum over edges e of h[src_e] added into row dst_e; eps is 1 x 1.
Var neighbor_sum(const Var& h, const Var& eps, const Index& src, const Index& dst);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
Var squared_l2(const Var& a);

// Activations.
Var softsign(const Var& a);
Var sigmoid(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.01);
Var prelu(const Var& a, const Var& slope);        // slope is a learned 1 x 1

// Normalizations.
/// Softmax of a column of scores (E x 1) within groups of equal segment id.
Var segment_softmax(const Var& scores, const Index& segments, std::size_t n_segments);
Var softmax_rows(const Var& a);
/// Per-column (x - mean) / sqrt(var + eps) with the population variance.
Var standardize_columns(const Var& a, double eps = 1e-5);

// Losses (probabilities clamped to [1e-12, 1 - 1e-12]).
inline constexpr double kProbClamp = 1e-12;
/// Mean binary cross-entropy of p (n x 1) against labels over the given rows.
Var binary_cross_entropy(const Var& p, const std::vector<int>& labels, const Index& rows);
/// Mean over rows of KL(p_r || q_r) for row-stochastic p, q.
Var kl_divergence_rows(const Var& p, const Var& q);

std::string shape_of(const Matrix& m);

}  // namespace hktgnn::ad
