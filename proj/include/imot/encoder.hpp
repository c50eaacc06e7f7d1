#pragma once

#include <vector>

#include "imot/config.hpp"
#include "imot/nn.hpp"
#include "imot/types.hpp"

namespace imot {

/// Stacks acceleration rows over gyro rows into [2D x T] base tokens.
VariateTokens tokenize(const ImuWindow& window);

/// [D x T] base embedding: every row holds the same sinusoid over the T
/// time steps (value at step t uses frequency 1/10000^(2*floor(t/2)/T),
/// sine on even steps and cosine on odd ones).
MatrixXd base_positional_embedding(Index D, Index T);

/// Adaptive Spatial Sync parameters for one encoder layer.
struct AscBlock {
  nn::ParamId kernel = 0;       // 1 x 3 channel-axis convolution
  nn::ParamId kernel_bias = 0;  // 1 x 1
  nn::ParamId gate_weight = 0;  // 1 x 1, pointwise map of the pooled channel
  nn::ParamId gate_bias = 0;    // 1 x 1
  nn::ParamId mix = 0;          // 2r x 2r pointwise map over both modalities
  nn::ParamId mix_bias = 0;     // 2r x 1
};

struct EncoderLayerParams {
  nn::Mlp ape_accel;
  nn::Mlp ape_gyro;
  nn::MultiHeadAttention attention;
  nn::LayerNorm norm_attention;
  nn::Mlp feed_forward;
  nn::LayerNorm norm_feed_forward;
  AscBlock asc;
};

/// Batched encoder output; each tensor is [B*r x T] with r rows per
/// modality (3D with decomposition, D without).
struct EncoderOutput {
  ad::Var tokens;  // [B*2r x T], accel block then gyro block per window
  ad::Var tokens_accel;
  ad::Var tokens_gyro;
  ad::Var pe_accel;
  ad::Var pe_gyro;
};

struct EncoderProbe {
  std::vector<ad::AttentionProbe> attention;  // one per layer
};

struct EncodedWindow {
  MatrixXd tokens_accel;
  MatrixXd tokens_gyro;
  MatrixXd pe_accel;
  MatrixXd pe_gyro;
};

class Encoder {
 public:
  Encoder(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }
  const std::vector<EncoderLayerParams>& layers() const { return layers_; }
  const MatrixXd& base_pe() const { return base_pe_; }

  /// base: [B*2D x T] row-stacked tokens of B windows.
  EncoderOutput forward(nn::Binding& p, const ad::Var& base, Index batch, EncoderProbe* probe = nullptr) const;

  // Batched building blocks.
  ad::Var adaptive_pe(nn::Binding& p, int layer, const ad::Var& tokens, Index batch) const;
  ad::Var fixed_pe(Index batch) const;
  ad::Var asc(nn::Binding& p, int layer, const ad::Var& tokens, Index batch) const;
  ad::Var layer_forward(nn::Binding& p, int layer, const ad::Var& tokens, const ad::Var& pos_embed, Index batch,
                        ad::AttentionProbe* probe = nullptr) const;

  // Single-window facades, evaluated without gradient tracking.
  /// aug_a, aug_g: [r x T] modality tokens. Returns [2r x T].
  MatrixXd adaptive_positional_embeddings(const nn::ParameterStore& store, int layer, const MatrixXd& aug_accel,
                                          const MatrixXd& aug_gyro) const;
  /// tokens_concat: [r x 2T], accel block in the first T columns.
  MatrixXd asc(const nn::ParameterStore& store, int layer, const MatrixXd& tokens_concat) const;
  /// tokens.augmented (or tokens.base with decomposition off) and
  /// tokens.pos_embed must be populated; returns updated augmented tokens.
  VariateTokens encoder_layer(const nn::ParameterStore& store, const VariateTokens& tokens, int layer) const;
  EncodedWindow encode(const nn::ParameterStore& store, const ImuWindow& window) const;

 private:
  std::vector<Index> modality_index(Index batch, Index m) const;
  ad::Var merge_modalities(const ad::Var& accel, const ad::Var& gyro, Index batch) const;

  RunConfig cfg_;
  std::vector<EncoderLayerParams> layers_;
  MatrixXd base_pe_;
  ad::Var trend_op_t_;
};

}  // namespace imot
