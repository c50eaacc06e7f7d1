#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "imot/autodiff.hpp"
#include "imot/nn.hpp"

namespace imot::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Compares the analytic directional derivative of a scalar graph with a
/// central difference along one random unit direction over every
/// parameter in the store. Returns the relative error.
inline double directional_gradient_error(nn::ParameterStore& store, const std::function<ad::Var(nn::Binding&)>& f,
                                         std::mt19937_64& rng, double h = 1e-5) {
  nn::Binding tape(store, true);
  const ad::Var out = f(tape);
  ad::backward(out);
  const auto grads = tape.gradients();

  std::vector<Eigen::MatrixXd> dir;
  double norm2 = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    dir.push_back(random_matrix(store.value(i).rows(), store.value(i).cols(), rng));
    norm2 += dir.back().squaredNorm();
  }
  const double inv = 1.0 / std::sqrt(norm2);
  double analytic = 0.0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    dir[i] *= inv;
    analytic += (grads[i].array() * dir[i].array()).sum();
  }
  const auto eval_at = [&](double step) {
    for (std::size_t i = 0; i < store.size(); ++i) store.value(i) += step * dir[i];
    nn::Binding p(store, false);
    const double v = f(p).item();
    for (std::size_t i = 0; i < store.size(); ++i) store.value(i) -= step * dir[i];
    return v;
  };
  const double numeric = (eval_at(h) - eval_at(-h)) / (2.0 * h);
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("imot_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace imot::testing
