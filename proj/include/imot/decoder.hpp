#pragma once

#include <vector>

#include "imot/config.hpp"
#include "imot/encoder.hpp"
#include "imot/nn.hpp"
#include "imot/types.hpp"

namespace imot {

struct DecoderLayerParams {
  nn::MultiHeadAttention self_attention;
  nn::LayerNorm norm_self;
  nn::MultiHeadAttention cross_accel;
  nn::LayerNorm norm_accel;
  nn::MultiHeadAttention cross_gyro;
  nn::LayerNorm norm_gyro;
  nn::Mlp fuse;
};

struct DecoderProbe {
  std::vector<ad::AttentionProbe> self_attention;
  std::vector<ad::AttentionProbe> cross_accel;
  std::vector<ad::AttentionProbe> cross_gyro;
};

struct DecoderOutput {
  ad::Var particles;  // [B*P x 2]
  ad::Var content;    // [B*P x T]
};

/// Uniform grid of P velocities over [-1.5, 1.5]^2 m/s, row-major.
Matrix2Xd particle_grid(Index P, double half_extent = 1.5);

class Decoder {
 public:
  Decoder(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }
  nn::ParamId initial_velocities() const { return initial_velocities_; }
  const nn::Mlp& refinement() const { return refine_; }
  const std::vector<DecoderLayerParams>& layers() const { return layers_; }

  /// Sinusoidal code of each velocity: T/2 features per axis.
  ad::Var velocity_code(const ad::Var& velocities) const;
  ad::Var particle_embeddings(nn::Binding& p, const ad::Var& velocities) const;
  /// Content-conditioned scaling of particle embeddings (per element).
  ad::Var scale_embeddings(nn::Binding& p, const ad::Var& content, const ad::Var& embeddings) const;

  DecoderOutput layer_forward(nn::Binding& p, int layer, const ad::Var& content, const ad::Var& particles,
                              const EncoderOutput& enc, Index batch, DecoderProbe* probe = nullptr) const;
  DecoderOutput forward(nn::Binding& p, const EncoderOutput& enc, Index batch, DecoderProbe* probe = nullptr) const;

  // Single-window facades without gradient tracking.
  MatrixXd particle_embeddings(const nn::ParameterStore& store, const Matrix2Xd& velocities) const;
  ParticleSet decoder_layer(const nn::ParameterStore& store, const ParticleSet& particles,
                            const EncodedWindow& enc, int layer) const;
  ParticleSet decode(const nn::ParameterStore& store, const EncodedWindow& enc) const;

 private:
  RunConfig cfg_;
  MatrixXd frequencies_;  // [2 x T]
  MatrixXd phases_;       // [1 x T]
  nn::ParamId initial_velocities_ = 0;
  nn::Mlp particle_pe_;
  nn::Mlp content_scale_;
  nn::Mlp refine_;
  std::vector<DecoderLayerParams> layers_;
};

/// Wraps single-window encoder matrices as a batch of one.
EncoderOutput as_encoder_output(const EncodedWindow& enc);

}  // namespace imot
