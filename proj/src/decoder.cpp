#include "imot/decoder.hpp"

#include <cmath>
#include <numbers>

#include "imot/errors.hpp"

namespace imot {

using ad::Var;

Matrix2Xd particle_grid(Index P, double half_extent) {
  const Index nx = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(P))));
  const Index ny = (P + nx - 1) / nx;
  const auto axis = [half_extent](Index i, Index n) {
    return n == 1 ? 0.0 : -half_extent + 2.0 * half_extent * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  Matrix2Xd grid(P, 2);
  for (Index i = 0; i < P; ++i) {
    grid(i, 0) = axis(i % nx, nx);
    grid(i, 1) = axis(i / nx, ny);
  }
  return grid;
}

Decoder::Decoder(nn::ParameterStore& store, nn::Initializer& init, const RunConfig& cfg) : cfg_(cfg) {
  const Index T = cfg.T;
  const Index P = cfg.P;
  require(T % 2 == 0, "particle embeddings need an even T");
  const Index half = T / 2;
  frequencies_ = MatrixXd::Zero(2, T);
  phases_ = MatrixXd::Zero(1, T);
  for (Index j = 0; j < T; ++j) {
    const Index axis = j / half;
    const Index i = j % half;
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i / 2) / static_cast<double>(half));
    frequencies_(axis, j) = cfg.velocity_pe_scale * freq;
    phases_(0, j) = (i % 2 == 1) ? std::numbers::pi / 2.0 : 0.0;
  }

  initial_velocities_ = store.add("decoder.initial_velocities", particle_grid(P));
  particle_pe_ = nn::Mlp::create(store, init, "decoder.particle_pe", T, cfg.particle_pe_width(), T);
  content_scale_ = nn::Mlp::create(store, init, "decoder.content_scale", T, cfg.content_scale_width(), T, 0.1);
  store.value(content_scale_.second.bias).setOnes();
  refine_ = nn::Mlp::create(store, init, "decoder.refine", T, cfg.refine_width(), 2, 0.1);
  for (int j = 0; j < cfg.M; ++j) {
    const std::string pre = "decoder." + std::to_string(j);
    DecoderLayerParams l;
    l.self_attention = nn::MultiHeadAttention::create(store, init, pre + ".self_attn", T, T, T, T, cfg.heads);
    l.norm_self = nn::LayerNorm::create(store, pre + ".norm_self", T);
    l.cross_accel = nn::MultiHeadAttention::create(store, init, pre + ".cross_accel", 2 * T, 2 * T, T, T, cfg.heads);
    l.norm_accel = nn::LayerNorm::create(store, pre + ".norm_accel", T);
    l.cross_gyro = nn::MultiHeadAttention::create(store, init, pre + ".cross_gyro", 2 * T, 2 * T, T, T, cfg.heads);
    l.norm_gyro = nn::LayerNorm::create(store, pre + ".norm_gyro", T);
    l.fuse = nn::Mlp::create(store, init, pre + ".fuse", 2 * T, cfg.fuse_width(), T);
    layers_.push_back(l);
  }
}

Var Decoder::velocity_code(const Var& velocities) const {
  require(velocities.cols() == 2, "velocity_code: velocities must have 2 columns");
  return ad::sin(ad::add_row(ad::matmul(velocities, ad::constant(frequencies_)), ad::constant(phases_)));
}

Var Decoder::particle_embeddings(nn::Binding& p, const Var& velocities) const {
  return particle_pe_(p, velocity_code(velocities));
}

Var Decoder::scale_embeddings(nn::Binding& p, const Var& content, const Var& embeddings) const {
  return ad::mul(content_scale_(p, content), embeddings);
}

DecoderOutput Decoder::layer_forward(nn::Binding& p, int layer, const Var& content, const Var& particles,
                                     const EncoderOutput& enc, Index batch, DecoderProbe* probe) const {
  const auto& l = layers_.at(static_cast<std::size_t>(layer));
  const Index P = cfg_.P;
  const Index r = cfg_.modality_rows();
  require(content.rows() == batch * P && particles.rows() == batch * P, "decoder_layer: particle count mismatch");
  const auto slot = [&](std::vector<ad::AttentionProbe>& v) {
    return probe ? &v[static_cast<std::size_t>(layer)] : nullptr;
  };

  Var embed = particle_embeddings(p, particles);
  Var query = ad::add(content, embed);
  Var self = l.self_attention(p, query, query, content, P, P, probe ? slot(probe->self_attention) : nullptr);
  Var content_sa = l.norm_self(p, ad::add(content, self));

  Var cross_query = ad::concat_cols({content_sa, scale_embeddings(p, content, embed)});
  Var key_a = ad::concat_cols({enc.tokens_accel, enc.pe_accel});
  Var key_g = ad::concat_cols({enc.tokens_gyro, enc.pe_gyro});
  Var ca = l.cross_accel(p, cross_query, key_a, enc.tokens_accel, P, r, probe ? slot(probe->cross_accel) : nullptr);
  Var cg = l.cross_gyro(p, cross_query, key_g, enc.tokens_gyro, P, r, probe ? slot(probe->cross_gyro) : nullptr);
  Var content_a = l.norm_accel(p, ad::add(content_sa, ca));
  Var content_g = l.norm_gyro(p, ad::add(content_sa, cg));
  Var fused = l.fuse(p, ad::concat_cols({content_a, content_g}));

  Var delta = refine_(p, fused);
  return {ad::add(particles, delta), fused};
}

DecoderOutput Decoder::forward(nn::Binding& p, const EncoderOutput& enc, Index batch, DecoderProbe* probe) const {
  const Index P = cfg_.P;
  if (probe) {
    probe->self_attention.assign(static_cast<std::size_t>(cfg_.M), {});
    probe->cross_accel.assign(static_cast<std::size_t>(cfg_.M), {});
    probe->cross_gyro.assign(static_cast<std::size_t>(cfg_.M), {});
  }
  std::vector<Index> tile(static_cast<std::size_t>(batch * P));
  for (Index i = 0; i < batch * P; ++i) {
    tile[static_cast<std::size_t>(i)] = i % P;
  }
  DecoderOutput state{ad::gather_rows(p(initial_velocities_), tile), ad::zeros(batch * P, cfg_.T)};
  for (int j = 0; j < cfg_.M; ++j) {
    state = layer_forward(p, j, state.content, state.particles, enc, batch, probe);
  }
  return state;
}

EncoderOutput as_encoder_output(const EncodedWindow& enc) {
  EncoderOutput o;
  o.tokens_accel = ad::constant(enc.tokens_accel);
  o.tokens_gyro = ad::constant(enc.tokens_gyro);
  o.pe_accel = ad::constant(enc.pe_accel);
  o.pe_gyro = ad::constant(enc.pe_gyro);
  MatrixXd all(enc.tokens_accel.rows() * 2, enc.tokens_accel.cols());
  all << enc.tokens_accel, enc.tokens_gyro;
  o.tokens = ad::constant(all);
  return o;
}

MatrixXd Decoder::particle_embeddings(const nn::ParameterStore& store, const Matrix2Xd& velocities) const {
  require(velocities.allFinite(), "particle_embeddings: non-finite velocities");
  nn::Binding p(store, false);
  return particle_embeddings(p, ad::constant(velocities)).value();
}

ParticleSet Decoder::decoder_layer(const nn::ParameterStore& store, const ParticleSet& particles,
                                   const EncodedWindow& enc, int layer) const {
  nn::Binding p(store, false);
  const DecoderOutput o = layer_forward(p, layer, ad::constant(particles.content),
                                        ad::constant(particles.velocities), as_encoder_output(enc), 1);
  ParticleSet out;
  out.velocities = o.particles.value();
  out.content = o.content.value();
  out.pos_embed = particle_embeddings(store, out.velocities);
  return out;
}

ParticleSet Decoder::decode(const nn::ParameterStore& store, const EncodedWindow& enc) const {
  nn::Binding p(store, false);
  const DecoderOutput o = forward(p, as_encoder_output(enc), 1);
  ParticleSet out;
  out.velocities = o.particles.value();
  out.content = o.content.value();
  out.pos_embed = particle_embeddings(store, out.velocities);
  return out;
}

}  // namespace imot
