#include "imot/encoder.hpp"

#include <cmath>

#include "imot/errors.hpp"
#include "imot/series_decoupler.hpp"

namespace imot {

using ad::Var;

VariateTokens tokenize(const ImuWindow& window) {
  const Index D = window.channels();
  VariateTokens t;
  t.base.resize(2 * D, window.samples());
  t.base.topRows(D) = window.accel();
  t.base.bottomRows(D) = window.gyro();
  return t;
}

MatrixXd base_positional_embedding(Index D, Index T) {
  Eigen::RowVectorXd row(T);
  for (Index t = 0; t < T; ++t) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(t / 2) / static_cast<double>(T));
    const double angle = static_cast<double>(t) * freq;
    row(t) = (t % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return row.replicate(D, 1);
}

Encoder::Encoder(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg) : cfg_(cfg) {
  const Index T = cfg.T;
  const Index r = cfg.modality_rows();
  base_pe_ = base_positional_embedding(cfg.D, T);
  trend_op_t_ = ad::constant(trend_operator(T, cfg.k1, cfg.k2).transpose());
  for (int j = 0; j < cfg.N; ++j) {
    const std::string pre = "encoder." + std::to_string(j);
    EncoderLayerParams l;
    l.ape_accel = nn::Mlp::create(store, init, pre + ".ape_accel", T, cfg.ape_width(), T, 0.1);
    l.ape_gyro = nn::Mlp::create(store, init, pre + ".ape_gyro", T, cfg.ape_width(), T, 0.1);
    // Scaling factors start near one so the embedding starts near base_pe.
    store.value(l.ape_accel.second.bias).setOnes();
    store.value(l.ape_gyro.second.bias).setOnes();
    l.attention = nn::MultiHeadAttention::create(store, init, pre + ".attn", T, T, T, T, cfg.heads);
    l.norm_attention = nn::LayerNorm::create(store, pre + ".norm_attn", T);
    l.feed_forward = nn::Mlp::create(store, init, pre + ".ffn", T, cfg.ffn_width(), T);
    l.norm_feed_forward = nn::LayerNorm::create(store, pre + ".norm_ffn", T);
    MatrixXd kernel = init.uniform(1, 3, -0.1, 0.1);
    kernel(0, 1) += 1.0;
    l.asc.kernel = store.add(pre + ".asc.kernel", kernel);
    l.asc.kernel_bias = store.add(pre + ".asc.kernel_bias", MatrixXd::Zero(1, 1));
    l.asc.gate_weight = store.add(pre + ".asc.gate_weight", MatrixXd::Ones(1, 1));
    l.asc.gate_bias = store.add(pre + ".asc.gate_bias", MatrixXd::Zero(1, 1));
    l.asc.mix = store.add(pre + ".asc.mix", init.xavier(2 * r, 2 * r, 0.5));
    l.asc.mix_bias = store.add(pre + ".asc.mix_bias", MatrixXd::Zero(2 * r, 1));
    layers_.push_back(l);
  }
}

std::vector<Index> Encoder::modality_index(Index batch, Index m) const {
  const Index r = cfg_.modality_rows();
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(batch * r));
  for (Index b = 0; b < batch; ++b) {
    for (Index c = 0; c < r; ++c) {
      idx.push_back(b * 2 * r + m * r + c);
    }
  }
  return idx;
}

Var Encoder::merge_modalities(const Var& accel, const Var& gyro, Index batch) const {
  const Index r = cfg_.modality_rows();
  std::vector<Index> idx(static_cast<std::size_t>(batch * 2 * r));
  for (Index b = 0; b < batch; ++b) {
    for (Index m = 0; m < 2; ++m) {
      for (Index c = 0; c < r; ++c) {
        idx[static_cast<std::size_t>(b * 2 * r + m * r + c)] = m * batch * r + b * r + c;
      }
    }
  }
  return ad::gather_rows(ad::concat_rows({accel, gyro}), idx);
}

Var Encoder::fixed_pe(Index batch) const {
  const Index r = cfg_.modality_rows();
  return ad::constant(base_pe_.row(0).replicate(batch * 2 * r, 1));
}

Var Encoder::adaptive_pe(nn::Binding& p, int layer, const Var& tokens, Index batch) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  const Index r = cfg_.modality_rows();
  Var base = ad::constant(base_pe_.row(0).replicate(batch * r, 1));
  Var scale_a = l.ape_accel(p, ad::gather_rows(tokens, modality_index(batch, 0)));
  Var scale_g = l.ape_gyro(p, ad::gather_rows(tokens, modality_index(batch, 1)));
  return merge_modalities(ad::mul(scale_a, base), ad::mul(scale_g, base), batch);
}

Var Encoder::asc(nn::Binding& p, int layer, const Var& tokens, Index batch) const {
  const auto& a = layers_.at(static_cast<std::size_t>(layer)).asc;
  const Index r = cfg_.modality_rows();
  const Index rows = batch * 2 * r;
  const Index T = tokens.cols();
  require(tokens.rows() == rows, "asc: token row count mismatch");

  // Stage 1: kernel-3 convolution along channels inside each modality
  // block, replicate padding at the block edges.
  std::vector<Index> prev(static_cast<std::size_t>(rows));
  std::vector<Index> next(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    const Index block = i / r;
    const Index c = i % r;
    prev[static_cast<std::size_t>(i)] = block * r + (c > 0 ? c - 1 : 0);
    next[static_cast<std::size_t>(i)] = block * r + (c + 1 < r ? c + 1 : r - 1);
  }
  Var kernel = p(a.kernel);
  Var ones = ad::constant(MatrixXd::Ones(rows, T));
  Var conv = ad::add(ad::add(ad::scale_by(ad::gather_rows(tokens, prev), ad::slice_cols(kernel, 0, 1)),
                             ad::scale_by(tokens, ad::slice_cols(kernel, 1, 1))),
                     ad::scale_by(ad::gather_rows(tokens, next), ad::slice_cols(kernel, 2, 1)));
  conv = ad::add(conv, ad::scale_by(ones, p(a.kernel_bias)));

  // Stage 2: per-time-step gates from the channel-pooled input.
  Var pooled = ad::group_mean_rows(tokens, r);
  Var pre_gate = ad::add(ad::scale_by(pooled, p(a.gate_weight)),
                         ad::scale_by(ad::constant(MatrixXd::Ones(pooled.rows(), T)), p(a.gate_bias)));
  Var gate = ad::sigmoid(pre_gate);
  std::vector<Index> expand(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    expand[static_cast<std::size_t>(i)] = i / r;
  }
  Var gated = ad::mul(conv, ad::gather_rows(gate, expand));

  // Stage 3: the [r x 2T] concatenation reshaped to [2r x T] is exactly the
  // per-window token layout, so the pointwise map mixes all 2r channels.
  Var mixed = ad::group_left_matmul(p(a.mix), gated, 2 * r);
  std::vector<Index> tile(static_cast<std::size_t>(rows));
  for (Index i = 0; i < rows; ++i) {
    tile[static_cast<std::size_t>(i)] = i % (2 * r);
  }
  Var bias = ad::mul_col(ones, ad::gather_rows(p(a.mix_bias), tile));
  return ad::gelu(ad::add(mixed, bias));
}

Var Encoder::layer_forward(nn::Binding& p, int layer, const Var& tokens, const Var& pos_embed, Index batch,
                           ad::AttentionProbe* probe) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  const Index R = cfg_.token_rows();
  Var query = ad::add(tokens, pos_embed);
  Var attended = l.attention(p, query, query, tokens, R, R, probe);
  Var residual = ad::add(tokens, attended);
  Var sync;
  if (cfg_.toggles.asc) {
    // ASC reads the pre-attention tokens and joins both residuals.
    sync = asc(p, layer, tokens, batch);
    residual = ad::add(residual, sync);
  }
  Var x1 = l.norm_attention(p, residual);
  Var residual2 = ad::add(x1, l.feed_forward(p, x1));
  if (cfg_.toggles.asc) {
    residual2 = ad::add(residual2, sync);
  }
  return l.norm_feed_forward(p, residual2);
}

EncoderOutput Encoder::forward(nn::Binding& p, const Var& base, Index batch, EncoderProbe* probe) const {
  const Index D = cfg_.D;
  require(base.rows() == batch * 2 * D && base.cols() == cfg_.T, "encoder: input must be [B*2D x T]");
  if (probe) {
    probe->attention.assign(static_cast<std::size_t>(cfg_.N), {});
  }
  Var x = base;
  Var pe;
  for (int j = 0; j < cfg_.N; ++j) {
    if (cfg_.toggles.psd) {
      Var b = (j == 0) ? base : ad::gather_rows(x, psd::base_rows(batch, D));
      x = psd::augment(b, batch, D, trend_op_t_);
    }
    pe = cfg_.toggles.ape ? adaptive_pe(p, j, x, batch) : fixed_pe(batch);
    x = layer_forward(p, j, x, pe, batch, probe ? &probe->attention[static_cast<std::size_t>(j)] : nullptr);
  }
  EncoderOutput out;
  out.tokens = x;
  out.tokens_accel = ad::gather_rows(x, modality_index(batch, 0));
  out.tokens_gyro = ad::gather_rows(x, modality_index(batch, 1));
  out.pe_accel = ad::gather_rows(pe, modality_index(batch, 0));
  out.pe_gyro = ad::gather_rows(pe, modality_index(batch, 1));
  return out;
}

MatrixXd Encoder::adaptive_positional_embeddings(const nn::ParameterStore& store, int layer,
                                                 const MatrixXd& aug_accel, const MatrixXd& aug_gyro) const {
  const Index r = cfg_.modality_rows();
  require(aug_accel.rows() == r && aug_gyro.rows() == r && aug_accel.cols() == cfg_.T &&
              aug_gyro.cols() == cfg_.T,
          "adaptive_positional_embeddings: modality tokens must be [r x T]");
  MatrixXd stacked(2 * r, cfg_.T);
  stacked << aug_accel, aug_gyro;
  nn::Binding p(store, false);
  return adaptive_pe(p, layer, ad::constant(stacked), 1).value();
}

MatrixXd Encoder::asc(const nn::ParameterStore& store, int layer, const MatrixXd& tokens_concat) const {
  const Index r = cfg_.modality_rows();
  const Index T = cfg_.T;
  require(tokens_concat.rows() == r && tokens_concat.cols() == 2 * T, "asc: input must be [r x 2T]");
  MatrixXd stacked(2 * r, T);
  stacked << tokens_concat.leftCols(T), tokens_concat.rightCols(T);
  nn::Binding p(store, false);
  const MatrixXd y = asc(p, layer, ad::constant(stacked), 1).value();
  MatrixXd out(r, 2 * T);
  out << y.topRows(r), y.bottomRows(r);
  return out;
}

VariateTokens Encoder::encoder_layer(const nn::ParameterStore& store, const VariateTokens& tokens, int layer) const {
  const MatrixXd& x = cfg_.toggles.psd ? tokens.augmented : tokens.base;
  require(x.rows() == cfg_.token_rows() && x.cols() == cfg_.T, "encoder_layer: token shape mismatch");
  require(tokens.pos_embed.rows() == x.rows() && tokens.pos_embed.cols() == x.cols(),
          "encoder_layer: positional embedding shape mismatch");
  nn::Binding p(store, false);
  const MatrixXd y = layer_forward(p, layer, ad::constant(x), ad::constant(tokens.pos_embed), 1).value();
  VariateTokens out = tokens;
  if (cfg_.toggles.psd) {
    out.augmented = y;
    const Index D = cfg_.D;
    out.base.topRows(D) = y.topRows(D);
    out.base.bottomRows(D) = y.middleRows(3 * D, D);
  } else {
    out.base = y;
    out.augmented = y;
  }
  return out;
}

EncodedWindow Encoder::encode(const nn::ParameterStore& store, const ImuWindow& window) const {
  require(window.channels() == cfg_.D && window.samples() == cfg_.T, "encode: window shape does not match config");
  nn::Binding p(store, false);
  const VariateTokens t = tokenize(window);
  const EncoderOutput o = forward(p, ad::constant(t.base), 1);
  return {o.tokens_accel.value(), o.tokens_gyro.value(), o.pe_accel.value(), o.pe_gyro.value()};
}

}  // namespace imot
