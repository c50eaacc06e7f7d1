#include "imot/model.hpp"

#include "imot/errors.hpp"

namespace imot {

using ad::Var;

namespace {

constexpr Index kPredictChunk = 64;

}  // namespace

Model::Model(const RunConfig& cfg, Normalization norm)
    : cfg_(validate_config(cfg)), norm_(norm), init_(cfg.seed), encoder_(store_, init_, cfg_) {
  if (cfg_.toggles.particles) {
    decoder_.emplace(store_, init_, cfg_);
    if (cfg_.toggles.dsm) {
      scorer_.emplace(store_, init_, cfg_);
    }
  } else {
    head_ = nn::Linear::create(store_, init_, "head", static_cast<Index>(cfg_.token_rows()) * cfg_.T, 2, 0.1);
  }
}

Var Model::regress(nn::Binding& p, const EncoderOutput& enc, Index batch) const {
  (void)batch;
  return head_(p, ad::group_flatten(enc.tokens, cfg_.token_rows()));
}

LossTerms Model::loss(nn::Binding& p, const MatrixXd& inputs, const MatrixXd& targets) const {
  const Index batch = targets.rows();
  require(targets.cols() == 2, "loss: targets must be [B x 2]");
  require(inputs.rows() == batch * 2 * cfg_.D && inputs.cols() == cfg_.T, "loss: inputs must be [B*2D x T]");
  const Var v_gt = ad::constant(targets);
  const EncoderOutput enc = encoder_.forward(p, ad::constant(inputs), batch);
  LossTerms out;
  if (!decoder_) {
    Var j_vel = scoring::velocity_loss(regress(p, enc, batch), v_gt);
    out.objective = j_vel;
    out.j_vel = j_vel.item();
    return out;
  }
  const DecoderOutput dec = decoder_->forward(p, enc, batch);
  if (scorer_) {
    const auto [scores, v_m] = (*scorer_)(p, dec.particles);
    Var j_vel = scoring::velocity_loss(v_m, v_gt);
    out.objective = j_vel;
    out.j_vel = j_vel.item();
    return out;
  }
  const Var scores = scoring::softmax_scores(dec.particles, v_gt, cfg_.P);
  const Var v_m =
      scoring::legacy_mean_particle(dec.particles, scores, cfg_.gamma, cfg_.P, cfg_.legacy_normalized_weights);
  const Var j_vel = scoring::velocity_loss(v_m, v_gt);
  const Var j_ent = scoring::entropy(scores);
  // Entropy is maximized, so it enters with a negative sign.
  out.objective = ad::sub(j_vel, j_ent);
  out.j_vel = j_vel.item();
  out.j_ent = j_ent.item();
  return out;
}

Var Model::predict(nn::Binding& p, const Var& inputs, Index batch) const {
  const EncoderOutput enc = encoder_.forward(p, inputs, batch);
  if (!decoder_) {
    return regress(p, enc, batch);
  }
  const DecoderOutput dec = decoder_->forward(p, enc, batch);
  if (scorer_) {
    return (*scorer_)(p, dec.particles).second;
  }
  return scoring::average_pool(dec.particles, cfg_.P);
}

MatrixXd Model::predict(const MatrixXd& inputs) const {
  const Index rows = 2 * cfg_.D;
  require(inputs.rows() % rows == 0 && inputs.cols() == cfg_.T, "predict: inputs must be [B*2D x T]");
  const Index batch = inputs.rows() / rows;
  MatrixXd out(batch, 2);
  for (Index start = 0; start < batch; start += kPredictChunk) {
    const Index n = std::min(kPredictChunk, batch - start);
    nn::Binding p(store_, false);
    out.middleRows(start, n) = predict(p, ad::constant(inputs.middleRows(start * rows, n * rows)), n).value();
  }
  return out;
}

MatrixXd Model::prepare(const ImuWindow& window) const {
  require(window.samples() == cfg_.T, "prepare: window length does not match T");
  MatrixXd x = to_world_frame(window);
  norm_.apply(x);
  return x;
}

}  // namespace imot
