#include "imot/scoring.hpp"

#include "imot/errors.hpp"

namespace imot {

using ad::Var;

namespace scoring {

namespace {

std::vector<ad::Index> repeat_each(ad::Index groups, ad::Index times) {
  std::vector<ad::Index> idx(static_cast<std::size_t>(groups * times));
  for (ad::Index i = 0; i < groups * times; ++i) {
    idx[static_cast<std::size_t>(i)] = i / times;
  }
  return idx;
}

}  // namespace

Var softmax_scores(const Var& particles, const Var& v_gt, ad::Index P) {
  const ad::Index B = v_gt.rows();
  require(particles.rows() == B * P && particles.cols() == 2 && v_gt.cols() == 2,
          "softmax_scores: expected [B*P x 2] particles and [B x 2] targets");
  Var diff = ad::sub(particles, ad::gather_rows(v_gt, repeat_each(B, P)));
  Var dist = ad::sqrt(ad::row_sum(ad::square(diff)));  // [B*P x 1]
  return ad::softmax_rows(ad::neg(ad::group_transpose(dist, P)));
}

Var legacy_mean_particle(const Var& particles, const Var& scores, double gamma, ad::Index P, bool normalized) {
  require(gamma >= 0.0, "legacy_mean_particle: gamma must be >= 0");
  require(scores.cols() == P && particles.rows() == scores.rows() * P, "legacy_mean_particle: shape mismatch");
  Var weights = ad::pow(ad::add_scalar(ad::neg(scores), 1.0), gamma);           // [B x P]
  Var column = ad::group_transpose(weights, 1);                                   // [B*P x 1]
  Var pooled = ad::group_sum_rows(ad::mul_col(particles, column), P);            // [B x 2]
  if (!normalized) {
    return pooled;
  }
  Var total = ad::row_sum(weights);  // [B x 1]
  Var inv = ad::pow(total, -1.0);
  return ad::mul_col(pooled, inv);
}

Var entropy(const Var& scores) {
  return ad::neg(ad::mean(ad::mul(scores, ad::log(ad::add_scalar(scores, kEntropyEpsilon)))));
}

Var average_pool(const Var& particles, ad::Index P) { return ad::group_mean_rows(particles, P); }

Var velocity_loss(const Var& v_m, const Var& v_gt) {
  require(v_m.rows() == v_gt.rows() && v_m.cols() == v_gt.cols(), "velocity_loss: batch mismatch");
  return ad::scale(ad::sum(ad::square(ad::sub(v_gt, v_m))), 1.0 / static_cast<double>(v_m.rows()));
}

Var contract_scores(const Var& dynamic_scores, const Var& particles, ad::Index P) {
  Var coords = ad::group_transpose(particles, P);  // [B*2 x P]
  Var per_axis = ad::row_sum(ad::mul(dynamic_scores, coords));  // [B*2 x 1]
  return ad::group_transpose(per_axis, 2);  // [B x 2]
}

}  // namespace scoring

DynamicScorer::DynamicScorer(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg) : P_(cfg.P) {
  mlp_ = nn::Mlp::create(store, init, "dsm", cfg.P, cfg.dsm_width(), cfg.P, 0.1);
  // Start close to a uniform average over the particles.
  store.value(mlp_.second.bias).setOnes();
}

Var DynamicScorer::scores(nn::Binding& p, const Var& particles) const {
  // The 1/P factor keeps the effect of one optimizer step on v_m
  // independent of the particle count.
  return ad::scale(mlp_(p, ad::group_transpose(particles, P_)), 1.0 / static_cast<double>(P_));
}

std::pair<Var, Var> DynamicScorer::operator()(nn::Binding& p, const Var& particles) const {
  Var s = scores(p, particles);
  return {s, scoring::contract_scores(s, particles, P_)};
}

std::pair<ScoreList, Eigen::RowVector2d> DynamicScorer::dynamic_scores(const nn::ParameterStore& store,
                                                                       const Matrix2Xd& particles) const {
  require(particles.rows() == P_, "dynamic_scores: particle count mismatch");
  nn::Binding p(store, false);
  auto [s, vm] = (*this)(p, ad::constant(particles));
  ScoreList list{s.value(), ScoreList::Mode::kDynamic};
  return {list, vm.value().row(0)};
}

ScoreList softmax_scores(const Matrix2Xd& particles, const Eigen::RowVector2d& v_gt) {
  const Var s = scoring::softmax_scores(ad::constant(particles), ad::constant(v_gt), particles.rows());
  return {s.value(), ScoreList::Mode::kSoftmax};
}

Eigen::RowVector2d legacy_mean_particle(const Matrix2Xd& particles, const ScoreList& scores, double gamma,
                                        bool normalized) {
  require(scores.mode == ScoreList::Mode::kSoftmax, "legacy_mean_particle needs softmax scores");
  const Var v = scoring::legacy_mean_particle(ad::constant(particles), ad::constant(scores.values), gamma,
                                              particles.rows(), normalized);
  return v.value().row(0);
}

double entropy_loss(const MatrixXd& scores) { return scoring::entropy(ad::constant(scores)).item(); }

double velocity_loss(const Matrix2Xd& v_m, const Matrix2Xd& v_gt) {
  return scoring::velocity_loss(ad::constant(v_m), ad::constant(v_gt)).item();
}

}  // namespace imot
