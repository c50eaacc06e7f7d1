#pragma once

#include <utility>

#include "imot/autodiff.hpp"
#include "imot/config.hpp"
#include "imot/types.hpp"

namespace imot {

/// Centered moving average of order k with edge replication. Even orders
/// use the 2xk weighting (half weight on the two outermost samples) so the
/// window stays symmetric.
VectorXd centered_moving_average(const VectorXd& series, int k);

/// T x T matrix M with M * series == centered_moving_average(series, k).
MatrixXd moving_average_operator(Index T, int k);

/// Order-k1 average followed by order-k2 average, as one T x T operator.
MatrixXd trend_operator(Index T, int k1, int k2);

struct Decomposition {
  MatrixXd seasonal;
  MatrixXd trend;
};

/// Row-wise decomposition: trend is the double moving average, seasonal
/// is the residual, so seasonal + trend reproduces the input.
Decomposition series_break(const MatrixXd& tokens, int k1, int k2);

/// Layer-facade augmentation of a single window. At layer 0 the base is
/// decomposed into the 6D-row augmented layout; at later layers the base
/// sub-blocks of `tokens.augmented` are re-decomposed and the seasonal and
/// trend sub-blocks overwritten.
VariateTokens psd_augment(const VariateTokens& tokens, const RunConfig& cfg, int layer);

namespace psd {

/// Row indices of the base sub-blocks inside a batch of augmented tokens.
std::vector<ad::Index> base_rows(ad::Index batch, ad::Index channels);

/// Batched augmentation. `base` is [B*2D x T]; `trend_op_t` is the
/// transposed trend operator. Returns [B*6D x T].
ad::Var augment(const ad::Var& base, ad::Index batch, ad::Index channels, const ad::Var& trend_op_t);

}  // namespace psd

}  // namespace imot
