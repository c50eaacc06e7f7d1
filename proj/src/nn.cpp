#include "imot/nn.hpp"

#include <cmath>

#include "imot/errors.hpp"

namespace imot::nn {

ParamId ParameterStore::add(std::string name, Matrix value) {
  for (const auto& n : names_) {
    require(n != name, "duplicate parameter name " + name);
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      return i;
    }
  }
  throw ValidationError("no parameter named " + name);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& v : values_) {
    total += static_cast<std::size_t>(v.size());
  }
  return total;
}

Binding::Binding(const ParameterStore& store, bool track_gradients)
    : store_(store), track_(track_gradients), bound_(store.size()) {}

Var Binding::operator()(ParamId id) {
  Var& slot = bound_.at(id);
  if (!slot.defined()) {
    slot = track_ ? ad::leaf(store_.value(id)) : ad::constant(store_.value(id));
  }
  return slot;
}

std::vector<Matrix> Binding::gradients() const {
  std::vector<Matrix> out;
  out.reserve(bound_.size());
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (bound_[i].defined()) {
      out.push_back(bound_[i].grad());
    } else {
      const Matrix& v = store_.value(i);
      out.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
  }
  return out;
}

Matrix Initializer::uniform(Index rows, Index cols, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  // Fill row-major so the draw order does not depend on Eigen's storage.
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      m(r, c) = dist(rng_);
    }
  }
  return m;
}

Matrix Initializer::xavier(Index fan_in, Index fan_out, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform(fan_in, fan_out, -bound, bound);
}

Linear Linear::create(ParameterStore& store, Initializer& init, const std::string& name, Index in, Index out,
                      double gain) {
  Linear l;
  l.weight = store.add(name + ".weight", init.xavier(in, out, gain));
  l.bias = store.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

Var Linear::operator()(Binding& p, const Var& x) const { return ad::add_row(ad::matmul(x, p(weight)), p(bias)); }

Mlp Mlp::create(ParameterStore& store, Initializer& init, const std::string& name, Index in, Index hidden,
                Index out, double out_gain) {
  Mlp m;
  m.first = Linear::create(store, init, name + ".fc1", in, hidden);
  m.second = Linear::create(store, init, name + ".fc2", hidden, out, out_gain);
  return m;
}

Var Mlp::operator()(Binding& p, const Var& x) const { return second(p, ad::gelu(first(p, x))); }

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, Index width) {
  LayerNorm ln;
  ln.gamma = store.add(name + ".gamma", Matrix::Ones(1, width));
  ln.beta = store.add(name + ".beta", Matrix::Zero(1, width));
  return ln;
}

Var LayerNorm::operator()(Binding& p, const Var& x) const { return ad::layer_norm_rows(x, p(gamma), p(beta)); }

MultiHeadAttention MultiHeadAttention::create(ParameterStore& store, Initializer& init, const std::string& name,
                                              Index query_width, Index key_width, Index value_width,
                                              Index model_width, Index heads) {
  require(model_width % heads == 0, name + ": model width not divisible by heads");
  MultiHeadAttention a;
  a.q = Linear::create(store, init, name + ".q", query_width, model_width);
  a.k = Linear::create(store, init, name + ".k", key_width, model_width);
  a.v = Linear::create(store, init, name + ".v", value_width, model_width);
  a.out = Linear::create(store, init, name + ".out", model_width, model_width);
  a.heads = heads;
  return a;
}

Var MultiHeadAttention::operator()(Binding& p, const Var& query, const Var& key, const Var& value, Index n,
                                   Index m, ad::AttentionProbe* probe) const {
  Var qh = q(p, query);
  Var kh = k(p, key);
  Var vh = v(p, value);
  return out(p, ad::grouped_attention(qh, kh, vh, n, m, heads, probe));
}

Adam::Adam(const ParameterStore& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& v : store.values()) {
    m_.push_back(Matrix::Zero(v.rows(), v.cols()));
    v_.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
}

void Adam::step(ParameterStore& store, const std::vector<Matrix>& grads) {
  require(grads.size() == store.size(), "Adam::step: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    if (lr_ == 0.0) {
      continue;
    }
    store.value(i).array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    sq += g.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) {
      g *= s;
    }
  }
  return norm;
}

}  // namespace imot::nn
