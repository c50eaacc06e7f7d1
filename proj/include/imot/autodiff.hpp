#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a graph node. Operations build new nodes that keep
// their inputs alive; backward() walks the graph in reverse topological
// order and accumulates gradients into every node that requires them.
//
// Batched layout convention used throughout the model: a batch of B
// windows is stored row-stacked, window b owning rows [b*g, (b+1)*g) for
// a per-tensor group size g. The grouped_* operations respect that layout.

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace imot::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  /// Gradient after backward(); a zero matrix if nothing flowed here.
  Matrix grad() const;
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  double item() const { return node_->value(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var leaf(Matrix value);  // requires grad
Var zeros(Index rows, Index cols);

/// Seeds d(out)/d(out) = 1 for a 1x1 output, or with `seed` otherwise.
void backward(const Var& out);
void backward(const Var& out, const Matrix& seed);

// ---- elementwise / shape ---------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // Hadamard
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
/// s is 1x1; out = s * a.
Var scale_by(const Var& a, const Var& s);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// b is 1 x cols, broadcast over rows.
Var add_row(const Var& a, const Var& b);
/// b is 1 x cols, broadcast over rows.
Var mul_row(const Var& a, const Var& b);
/// w is rows x 1, broadcast over columns.
Var mul_col(const Var& a, const Var& w);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
/// out.row(i) = a.row(idx[i]); gradient scatters back with accumulation.
Var gather_rows(const Var& a, const std::vector<Index>& idx);

Var gelu(const Var& a);  // exact erf form
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
/// Gradient is taken as zero where the input is exactly zero.
Var sqrt(const Var& a);
Var sin(const Var& a);
Var square(const Var& a);
/// a must be nonnegative.
Var pow(const Var& a, double exponent);

Var sum(const Var& a);       // 1x1
Var mean(const Var& a);      // 1x1
Var row_sum(const Var& a);   // rows x 1
Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// ---- grouped (batched) layout ----------------------------------------------
/// [B*g x c] -> [B x c], summing each group of g rows.
Var group_sum_rows(const Var& a, Index g);
Var group_mean_rows(const Var& a, Index g);
/// [B*g x c] -> [B*c x g], transposing every g x c block.
Var group_transpose(const Var& a, Index g);
/// [B*g x c] -> [B x g*c], each block flattened row-major.
Var group_flatten(const Var& a, Index g);
/// w is [r x g]; x is [B*g x c]; out block b = w * x_b, shape [B*r x c].
Var group_left_matmul(const Var& w, const Var& x, Index g);

struct AttentionProbe {
  // weights[b * heads + h] is the n x m attention matrix.
  std::vector<Matrix> weights;
};

/// Multi-head scaled dot-product attention, independently per group.
/// q: [B*n x d], k: [B*m x d], v: [B*m x dv]; heads split d and dv evenly.
Var grouped_attention(const Var& q, const Var& k, const Var& v, Index n, Index m, Index heads,
                      AttentionProbe* probe = nullptr);

}  // namespace imot::ad
