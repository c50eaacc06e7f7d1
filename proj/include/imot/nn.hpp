#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "imot/autodiff.hpp"

namespace imot::nn {

using ad::Index;
using ad::Matrix;
using ad::Var;

using ParamId = std::size_t;

/// Named, ordered collection of trainable tensors. Registration order is
/// the serialization order, so names and order are stable per config.
class ParameterStore {
 public:
  ParamId add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(ParamId id) const { return names_[id]; }
  const Matrix& value(ParamId id) const { return values_[id]; }
  Matrix& value(ParamId id) { return values_[id]; }
  std::size_t find(const std::string& name) const;  // throws if absent
  std::size_t scalar_count() const;

  const std::vector<Matrix>& values() const { return values_; }
  std::vector<Matrix>& values() { return values_; }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

/// Binds parameters into one forward graph. With tracking on, each
/// parameter becomes a gradient leaf the first time it is used.
class Binding {
 public:
  Binding(const ParameterStore& store, bool track_gradients);

  Var operator()(ParamId id);
  bool tracking() const { return track_; }

  /// Gradient per parameter (zeros for parameters unused in this graph).
  std::vector<Matrix> gradients() const;

 private:
  const ParameterStore& store_;
  bool track_;
  std::vector<Var> bound_;
};

/// Deterministic initializer seeded from the run seed.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Matrix xavier(Index fan_in, Index fan_out, double gain = 1.0);
  Matrix uniform(Index rows, Index cols, double lo, double hi);
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// y = x W + b, W in [in x out].
struct Linear {
  ParamId weight = 0;
  ParamId bias = 0;

  static Linear create(ParameterStore& store, Initializer& init, const std::string& name, Index in, Index out,
                       double gain = 1.0);
  Var operator()(Binding& p, const Var& x) const;
};

/// Two-layer perceptron with a GELU between.
struct Mlp {
  Linear first;
  Linear second;

  static Mlp create(ParameterStore& store, Initializer& init, const std::string& name, Index in, Index hidden,
                    Index out, double out_gain = 1.0);
  Var operator()(Binding& p, const Var& x) const;
};

struct LayerNorm {
  ParamId gamma = 0;
  ParamId beta = 0;

  static LayerNorm create(ParameterStore& store, const std::string& name, Index width);
  Var operator()(Binding& p, const Var& x) const;
};

/// Multi-head attention with input and output projections, evaluated
/// per group of rows (one group per window in a batch).
struct MultiHeadAttention {
  Linear q;
  Linear k;
  Linear v;
  Linear out;
  Index heads = 1;

  static MultiHeadAttention create(ParameterStore& store, Initializer& init, const std::string& name,
                                   Index query_width, Index key_width, Index value_width, Index model_width,
                                   Index heads);
  Var operator()(Binding& p, const Var& query, const Var& key, const Var& value, Index n, Index m,
                 ad::AttentionProbe* probe = nullptr) const;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam(const ParameterStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParameterStore& store, const std::vector<Matrix>& grads);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Scales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

}  // namespace imot::nn
