#pragma once

#include <optional>

#include "imot/config.hpp"
#include "imot/data.hpp"
#include "imot/decoder.hpp"
#include "imot/encoder.hpp"
#include "imot/nn.hpp"
#include "imot/scoring.hpp"

namespace imot {

struct LossTerms {
  ad::Var objective;
  double j_vel = 0.0;
  double j_ent = 0.0;  // zero whenever it is not part of the objective
};

/// The full network: encoder, then either the particle decoder with its
/// scoring head or a direct regression head on the flattened tokens.
class Model {
 public:
  explicit Model(const RunConfig& cfg, Normalization norm = {});

  const RunConfig& config() const { return cfg_; }
  const Normalization& normalization() const { return norm_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder* decoder() const { return decoder_ ? &*decoder_ : nullptr; }
  const DynamicScorer* scorer() const { return scorer_ ? &*scorer_ : nullptr; }

  /// inputs: [B*2D x T] normalized world-frame tokens; targets: [B x 2].
  LossTerms loss(nn::Binding& p, const MatrixXd& inputs, const MatrixXd& targets) const;
  /// Test-time velocity per window, [B x 2].
  MatrixXd predict(const MatrixXd& inputs) const;
  ad::Var predict(nn::Binding& p, const ad::Var& inputs, Index batch) const;

  /// World-frame rotation and normalization of one raw window.
  MatrixXd prepare(const ImuWindow& window) const;

  std::size_t parameter_count() const { return store_.scalar_count(); }

 private:
  ad::Var regress(nn::Binding& p, const EncoderOutput& enc, Index batch) const;

  RunConfig cfg_;
  Normalization norm_;
  nn::ParameterStore store_;
  nn::Initializer init_;
  Encoder encoder_;
  std::optional<Decoder> decoder_;
  std::optional<DynamicScorer> scorer_;
  nn::Linear head_;
};

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace imot
