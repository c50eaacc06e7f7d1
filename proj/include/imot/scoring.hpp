#pragma once

#include <utility>

#include "imot/config.hpp"
#include "imot/nn.hpp"
#include "imot/types.hpp"

namespace imot {

struct ScoreList {
  enum class Mode { kSoftmax, kDynamic };
  MatrixXd values;  // [1 x P] softmax, [2 x P] dynamic
  Mode mode = Mode::kSoftmax;
};

inline constexpr double kEntropyEpsilon = 1e-10;

namespace scoring {

// Batched forms. particles: [B*P x 2], v_gt / v_m: [B x 2].

/// S_p = softmax(-||v_p - v_gt||) over the P particles of each window.
ad::Var softmax_scores(const ad::Var& particles, const ad::Var& v_gt, ad::Index P);
/// sum_p (1 - S_p)^gamma v_p; optionally divided by the weight sum.
ad::Var legacy_mean_particle(const ad::Var& particles, const ad::Var& scores, double gamma, ad::Index P,
                             bool normalized = false);
/// (1 / BP) sum -S log(S + eps); scores: [B x P].
ad::Var entropy(const ad::Var& scores);
ad::Var average_pool(const ad::Var& particles, ad::Index P);
/// mean over the batch of ||v_gt - v_m||^2.
ad::Var velocity_loss(const ad::Var& v_m, const ad::Var& v_gt);
/// Axis-wise contraction: v_m[b, a] = sum_p S^d[b*2 + a, p] * v[b*P + p, a].
ad::Var contract_scores(const ad::Var& dynamic_scores, const ad::Var& particles, ad::Index P);

}  // namespace scoring

/// Learned [2 x P] score list over the final particle set.
class DynamicScorer {
 public:
  DynamicScorer(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg);

  const nn::Mlp& mlp() const { return mlp_; }
  /// [B*2 x P] scores from the transposed particle coordinates.
  ad::Var scores(nn::Binding& p, const ad::Var& particles) const;
  /// Returns (scores [B*2 x P], v_m [B x 2]).
  std::pair<ad::Var, ad::Var> operator()(nn::Binding& p, const ad::Var& particles) const;

  std::pair<ScoreList, Eigen::RowVector2d> dynamic_scores(const nn::ParameterStore& store,
                                                          const Matrix2Xd& particles) const;

 private:
  Index P_;
  nn::Mlp mlp_;
};

// Single-sample facades.
ScoreList softmax_scores(const Matrix2Xd& particles, const Eigen::RowVector2d& v_gt);
Eigen::RowVector2d legacy_mean_particle(const Matrix2Xd& particles, const ScoreList& scores, double gamma,
                                        bool normalized = false);
double entropy_loss(const MatrixXd& scores);
double velocity_loss(const Matrix2Xd& v_m, const Matrix2Xd& v_gt);

}  // namespace imot
