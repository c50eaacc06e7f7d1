#include "imot/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "imot/errors.hpp"

namespace imot::ad {

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Matrix Var::grad() const {
  if (node_->grad.size() == 0) {
    return Matrix::Zero(rows(), cols());
  }
  return node_->grad;
}

namespace {

using BackwardFn = std::function<void(Node&)>;

Var make(Matrix value, std::vector<Var> inputs, BackwardFn fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      node->requires_grad = true;
    }
  }
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) {
      node->inputs.push_back(in.node());
    }
    node->backward = std::move(fn);
  }
  return Var(std::move(node));
}

Node& in(Node& n, std::size_t i) { return *n.inputs[i]; }

void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Matrix out = a.value().unaryExpr(f);
  return make(out, {a}, [df](Node& n) {
    Node& x = in(n, 0);
    if (x.requires_grad) {
      x.accumulate((n.grad.array() * x.value.binaryExpr(n.value, df).array()).matrix());
    }
  });
}

}  // namespace

Var constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var leaf(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var zeros(Index rows, Index cols) { return constant(Matrix::Zero(rows, cols)); }

void backward(const Var& out) {
  require(out.rows() == 1 && out.cols() == 1, "backward: output must be 1x1 without a seed");
  backward(out, Matrix::Ones(1, 1));
}

void backward(const Var& out, const Matrix& seed) {
  if (!out.requires_grad()) {
    return;
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(out.node().get(), 0);
  visited.insert(out.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  out.node()->accumulate(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) {
      n->backward(*n);
    }
  }
}

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(-n.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.accumulate(n.grad.cwiseProduct(x.value));
  });
}

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad * s);
  });
}

Var add_scalar(const Var& a, double s) {
  return make((a.value().array() + s).matrix(), {a}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
  });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale_by(const Var& a, const Var& s) {
  require(s.rows() == 1 && s.cols() == 1, "scale_by: scalar must be 1x1");
  return make(a.value() * s.item(), {a, s}, [](Node& n) {
    Node& x = in(n, 0);
    Node& k = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * k.value(0, 0));
    if (k.requires_grad) {
      Matrix g(1, 1);
      g(0, 0) = n.grad.cwiseProduct(x.value).sum();
      k.accumulate(g);
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  return make(a.value() * b.value(), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) x.accumulate(n.grad * y.value.transpose());
    if (y.requires_grad) y.accumulate(x.value.transpose() * n.grad);
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad.transpose());
  });
}

Var add_row(const Var& a, const Var& b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return make(std::move(out), {a, b}, [](Node& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) in(n, 1).accumulate(n.grad.colwise().sum());
  });
}

Var mul_row(const Var& a, const Var& b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "mul_row: factor must be 1 x cols");
  Matrix out = a.value().array().rowwise() * b.value().row(0).array();
  return make(std::move(out), {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& r = in(n, 1);
    if (x.requires_grad) x.accumulate((n.grad.array().rowwise() * r.value.row(0).array()).matrix());
    if (r.requires_grad) r.accumulate(n.grad.cwiseProduct(x.value).colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& w) {
  require(w.cols() == 1 && w.rows() == a.rows(), "mul_col: factor must be rows x 1");
  Matrix out = a.value().array().colwise() * w.value().col(0).array();
  return make(std::move(out), {a, w}, [](Node& n) {
    Node& x = in(n, 0);
    Node& c = in(n, 1);
    if (x.requires_grad) x.accumulate((n.grad.array().colwise() * c.value.col(0).array()).matrix());
    if (c.requires_grad) c.accumulate(n.grad.cwiseProduct(x.value).rowwise().sum());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Node& x = in(n, i);
      if (x.requires_grad) x.accumulate(n.grad.middleCols(offsets[i], x.value.cols()));
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Node& x = in(n, i);
      if (x.requires_grad) x.accumulate(n.grad.middleRows(offsets[i], x.value.rows()));
    }
  });
}

Var slice_rows(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: out of range");
  return make(a.value().middleRows(start, count), {a}, [start, count](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleRows(start, count) = n.grad;
    x.accumulate(g);
  });
}

Var slice_cols(const Var& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  return make(a.value().middleCols(start, count), {a}, [start, count](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(start, count) = n.grad;
    x.accumulate(g);
  });
}

Var gather_rows(const Var& a, const std::vector<Index>& idx) {
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return make(std::move(out), {a}, [idx](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(idx[i]) += n.grad.row(static_cast<Index>(i));
    }
    x.accumulate(g);
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
  return unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var sin(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var pow(const Var& a, double exponent) {
  return unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) {
        if (exponent == 0.0) return 0.0;
        return exponent * std::pow(x, exponent - 1.0);
      });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    if (x.requires_grad) x.accumulate(Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / count);
}

Var row_sum(const Var& a) {
  return make(a.value().rowwise().sum(), {a}, [](Node& n) {
    Node& x = in(n, 0);
    if (x.requires_grad) x.accumulate(n.grad.col(0).replicate(1, x.value.cols()));
  });
}

Var softmax_rows(const Var& a) {
  Matrix out = a.value();
  for (Index r = 0; r < out.rows(); ++r) {
    const double mx = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return make(std::move(out), {a}, [](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    const Matrix& y = n.value;
    Eigen::VectorXd dot = n.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.array() * (n.grad.colwise() - dot).array();
    x.accumulate(g);
  });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Index c = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == c && beta.rows() == 1 && beta.cols() == c,
          "layer_norm_rows: gamma/beta must be 1 x cols");
  const Matrix& xv = x.value();
  Eigen::VectorXd mu = xv.rowwise().mean();
  Matrix centered = xv.colwise() - mu;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(c)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return make(std::move(out), {x, gamma, beta}, [xhat, inv_std, c](Node& n) {
    Node& xn = in(n, 0);
    Node& gn = in(n, 1);
    Node& bn = in(n, 2);
    if (gn.requires_grad) gn.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
    if (bn.requires_grad) bn.accumulate(n.grad.colwise().sum());
    if (xn.requires_grad) {
      Matrix dxhat = n.grad.array().rowwise() * gn.value.row(0).array();
      Eigen::VectorXd m1 = dxhat.rowwise().mean();
      Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
      Matrix dx = (dxhat.colwise() - m1) - (xhat.array().colwise() * m2.array()).matrix();
      dx = dx.array().colwise() * inv_std.array();
      xn.accumulate(dx);
    }
    (void)c;
  });
}

Var group_sum_rows(const Var& a, Index g) {
  require(g >= 1 && a.rows() % g == 0, "group_sum_rows: rows not divisible by group");
  const Index groups = a.rows() / g;
  Matrix out(groups, a.cols());
  for (Index b = 0; b < groups; ++b) {
    out.row(b) = a.value().middleRows(b * g, g).colwise().sum();
  }
  return make(std::move(out), {a}, [g, groups](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix grad(x.value.rows(), x.value.cols());
    for (Index b = 0; b < groups; ++b) {
      grad.middleRows(b * g, g) = n.grad.row(b).replicate(g, 1);
    }
    x.accumulate(grad);
  });
}

Var group_mean_rows(const Var& a, Index g) { return scale(group_sum_rows(a, g), 1.0 / static_cast<double>(g)); }

Var group_transpose(const Var& a, Index g) {
  require(g >= 1 && a.rows() % g == 0, "group_transpose: rows not divisible by group");
  const Index groups = a.rows() / g;
  const Index c = a.cols();
  Matrix out(groups * c, g);
  for (Index b = 0; b < groups; ++b) {
    out.middleRows(b * c, c) = a.value().middleRows(b * g, g).transpose();
  }
  return make(std::move(out), {a}, [g, c, groups](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix grad(x.value.rows(), x.value.cols());
    for (Index b = 0; b < groups; ++b) {
      grad.middleRows(b * g, g) = n.grad.middleRows(b * c, c).transpose();
    }
    x.accumulate(grad);
  });
}

Var group_flatten(const Var& a, Index g) {
  require(g >= 1 && a.rows() % g == 0, "group_flatten: rows not divisible by group");
  const Index groups = a.rows() / g;
  const Index c = a.cols();
  Matrix out(groups, g * c);
  for (Index b = 0; b < groups; ++b) {
    for (Index r = 0; r < g; ++r) {
      out.block(b, r * c, 1, c) = a.value().row(b * g + r);
    }
  }
  return make(std::move(out), {a}, [g, c, groups](Node& n) {
    Node& x = in(n, 0);
    if (!x.requires_grad) return;
    Matrix grad(x.value.rows(), x.value.cols());
    for (Index b = 0; b < groups; ++b) {
      for (Index r = 0; r < g; ++r) {
        grad.row(b * g + r) = n.grad.block(b, r * c, 1, c);
      }
    }
    x.accumulate(grad);
  });
}

Var group_left_matmul(const Var& w, const Var& x, Index g) {
  require(w.cols() == g && g >= 1 && x.rows() % g == 0, "group_left_matmul: shape mismatch");
  const Index groups = x.rows() / g;
  const Index r = w.rows();
  Matrix out(groups * r, x.cols());
  for (Index b = 0; b < groups; ++b) {
    out.middleRows(b * r, r).noalias() = w.value() * x.value().middleRows(b * g, g);
  }
  return make(std::move(out), {w, x}, [g, r, groups](Node& n) {
    Node& wn = in(n, 0);
    Node& xn = in(n, 1);
    if (wn.requires_grad) {
      Matrix gw = Matrix::Zero(r, g);
      for (Index b = 0; b < groups; ++b) {
        gw.noalias() += n.grad.middleRows(b * r, r) * xn.value.middleRows(b * g, g).transpose();
      }
      wn.accumulate(gw);
    }
    if (xn.requires_grad) {
      Matrix gx(xn.value.rows(), xn.value.cols());
      for (Index b = 0; b < groups; ++b) {
        gx.middleRows(b * g, g).noalias() = wn.value.transpose() * n.grad.middleRows(b * r, r);
      }
      xn.accumulate(gx);
    }
  });
}

Var grouped_attention(const Var& q, const Var& k, const Var& v, Index n, Index m, Index heads,
                      AttentionProbe* probe) {
  require(n >= 1 && m >= 1 && q.rows() % n == 0 && k.rows() % m == 0 && v.rows() == k.rows(),
          "grouped_attention: row layout mismatch");
  const Index groups = q.rows() / n;
  require(k.rows() / m == groups, "grouped_attention: query/key group counts differ");
  require(q.cols() == k.cols(), "grouped_attention: query/key width mismatch");
  require(heads >= 1 && q.cols() % heads == 0 && v.cols() % heads == 0,
          "grouped_attention: widths not divisible by heads");
  const Index dk = q.cols() / heads;
  const Index dv = v.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));

  auto weights = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(groups * heads));
  Matrix out(groups * n, v.cols());
  for (Index b = 0; b < groups; ++b) {
    for (Index h = 0; h < heads; ++h) {
      Matrix s = q.value().block(b * n, h * dk, n, dk) * k.value().block(b * m, h * dk, m, dk).transpose() * inv;
      for (Index r = 0; r < n; ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      out.block(b * n, h * dv, n, dv).noalias() = s * v.value().block(b * m, h * dv, m, dv);
      (*weights)[static_cast<std::size_t>(b * heads + h)] = std::move(s);
    }
  }
  if (probe) {
    probe->weights = *weights;
  }
  return make(std::move(out), {q, k, v}, [weights, groups, heads, n, m, dk, dv, inv](Node& node) {
    Node& qn = in(node, 0);
    Node& kn = in(node, 1);
    Node& vn = in(node, 2);
    Matrix gq = Matrix::Zero(qn.value.rows(), qn.value.cols());
    Matrix gk = Matrix::Zero(kn.value.rows(), kn.value.cols());
    Matrix gv = Matrix::Zero(vn.value.rows(), vn.value.cols());
    for (Index b = 0; b < groups; ++b) {
      for (Index h = 0; h < heads; ++h) {
        const Matrix& a = (*weights)[static_cast<std::size_t>(b * heads + h)];
        auto dout = node.grad.block(b * n, h * dv, n, dv);
        auto vb = vn.value.block(b * m, h * dv, m, dv);
        gv.block(b * m, h * dv, m, dv).noalias() += a.transpose() * dout;
        Matrix da = dout * vb.transpose();
        Eigen::VectorXd dot = da.cwiseProduct(a).rowwise().sum();
        Matrix ds = a.array() * (da.colwise() - dot).array();
        ds *= inv;
        gq.block(b * n, h * dk, n, dk).noalias() += ds * kn.value.block(b * m, h * dk, m, dk);
        gk.block(b * m, h * dk, m, dk).noalias() += ds.transpose() * qn.value.block(b * n, h * dk, n, dk);
      }
    }
    if (qn.requires_grad) qn.accumulate(gq);
    if (kn.requires_grad) kn.accumulate(gk);
    if (vn.requires_grad) vn.accumulate(gv);
  });
}

}  // namespace imot::ad
