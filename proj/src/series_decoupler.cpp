#include "imot/series_decoupler.hpp"

#include <algorithm>

#include "imot/errors.hpp"

namespace imot {

namespace {

void check_order(Index T, int k) {
  require(k >= 1, "moving average order must be >= 1");
  require(k <= T, "moving average order exceeds series length");
}

}  // namespace

MatrixXd moving_average_operator(Index T, int k) {
  check_order(T, k);
  MatrixXd m = MatrixXd::Zero(T, T);
  const auto clamp = [T](Index i) { return std::clamp<Index>(i, 0, T - 1); };
  if (k % 2 == 1) {
    const Index half = (k - 1) / 2;
    const double w = 1.0 / k;
    for (Index t = 0; t < T; ++t) {
      for (Index j = -half; j <= half; ++j) {
        m(t, clamp(t + j)) += w;
      }
    }
  } else {
    const Index half = k / 2;
    const double w = 1.0 / k;
    for (Index t = 0; t < T; ++t) {
      for (Index j = -half; j <= half; ++j) {
        const double wj = (j == -half || j == half) ? 0.5 * w : w;
        m(t, clamp(t + j)) += wj;
      }
    }
  }
  return m;
}

VectorXd centered_moving_average(const VectorXd& series, int k) {
  check_order(series.size(), k);
  require(series.allFinite(), "centered_moving_average: non-finite input");
  return moving_average_operator(series.size(), k) * series;
}

MatrixXd trend_operator(Index T, int k1, int k2) {
  require(k2 < k1, "k2 >= k1: k2 must be less than k1");
  require(k1 % 2 == k2 % 2, "parity mismatch: k1 and k2 must both be odd or both even");
  return moving_average_operator(T, k2) * moving_average_operator(T, k1);
}

Decomposition series_break(const MatrixXd& tokens, int k1, int k2) {
  const MatrixXd op = trend_operator(tokens.cols(), k1, k2);
  Decomposition d;
  // Rows of op sum to one only up to rounding; averaging deviations from
  // the first sample keeps constant rows exact.
  const VectorXd ref = tokens.col(0);
  d.trend = (tokens.colwise() - ref) * op.transpose();
  d.trend.colwise() += ref;
  d.seasonal = tokens - d.trend;
  return d;
}

namespace psd {

std::vector<ad::Index> base_rows(ad::Index batch, ad::Index channels) {
  std::vector<ad::Index> idx;
  idx.reserve(static_cast<std::size_t>(batch * 2 * channels));
  for (ad::Index b = 0; b < batch; ++b) {
    for (ad::Index m = 0; m < 2; ++m) {
      for (ad::Index c = 0; c < channels; ++c) {
        idx.push_back(b * 6 * channels + m * 3 * channels + c);
      }
    }
  }
  return idx;
}

ad::Var augment(const ad::Var& base, ad::Index batch, ad::Index channels, const ad::Var& trend_op_t) {
  const ad::Index D = channels;
  require(base.rows() == batch * 2 * D, "psd::augment: base row count mismatch");
  ad::Var trend = ad::matmul(base, trend_op_t);
  ad::Var seasonal = ad::sub(base, trend);
  ad::Var stacked = ad::concat_rows({base, seasonal, trend});
  const ad::Index part = batch * 2 * D;
  std::vector<ad::Index> idx(static_cast<std::size_t>(batch * 6 * D));
  for (ad::Index b = 0; b < batch; ++b) {
    for (ad::Index m = 0; m < 2; ++m) {
      for (ad::Index p = 0; p < 3; ++p) {
        for (ad::Index c = 0; c < D; ++c) {
          idx[static_cast<std::size_t>(b * 6 * D + m * 3 * D + p * D + c)] = p * part + b * 2 * D + m * D + c;
        }
      }
    }
  }
  return ad::gather_rows(stacked, idx);
}

}  // namespace psd

VariateTokens psd_augment(const VariateTokens& tokens, const RunConfig& cfg, int layer) {
  const Index D = cfg.D;
  const Index T = tokens.base.cols();
  require(tokens.base.rows() == 2 * D, "psd_augment: base must have 2D rows");
  VariateTokens out = tokens;
  MatrixXd base = tokens.base;
  if (layer > 0) {
    require(tokens.augmented.rows() == 6 * D && tokens.augmented.cols() == T,
            "psd_augment: augmented tokens must be 6D x T after layer 0");
    base.topRows(D) = tokens.augmented.topRows(D);
    base.bottomRows(D) = tokens.augmented.middleRows(3 * D, D);
  }
  const Decomposition d = series_break(base, cfg.k1, cfg.k2);
  out.base = base;
  out.seasonal = d.seasonal;
  out.trend = d.trend;
  out.augmented.resize(6 * D, T);
  for (Index m = 0; m < 2; ++m) {
    out.augmented.middleRows(m * 3 * D, D) = base.middleRows(m * D, D);
    out.augmented.middleRows(m * 3 * D + D, D) = d.seasonal.middleRows(m * D, D);
    out.augmented.middleRows(m * 3 * D + 2 * D, D) = d.trend.middleRows(m * D, D);
  }
  return out;
}

}  // namespace imot
