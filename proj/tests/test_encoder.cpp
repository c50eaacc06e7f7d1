#include <doctest.h>

#include <cmath>

#include "imot/encoder.hpp"
#include "imot/series_decoupler.hpp"
#include "support.hpp"

using namespace imot;
using imot::testing::random_matrix;

namespace {

ImuWindow random_window(std::mt19937_64& rng, Index T = 100) {
  return ImuWindow(random_matrix(3, T, rng), random_matrix(3, T, rng), 1.0 / static_cast<double>(T), 0.0);
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.T = 8;
  cfg.k1 = 5;
  cfg.k2 = 3;
  cfg.N = 1;
  return cfg;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("tokenize stacks accel over gyro") {
  std::mt19937_64 rng(11);
  const ImuWindow w = random_window(rng);
  const VariateTokens t = tokenize(w);
  REQUIRE(t.base.rows() == 6);
  REQUIRE(t.base.cols() == 100);
  CHECK(t.base.topRows(3) == w.accel());
  CHECK(t.base.bottomRows(3) == w.gyro());

  const ImuWindow z(Eigen::MatrixXd::Zero(3, 100), Eigen::MatrixXd::Zero(3, 100), 0.01, 0.0);
  CHECK(tokenize(z).base.cwiseAbs().maxCoeff() == 0.0);

  // Reversing time reverses token columns.
  const ImuWindow r(w.accel().rowwise().reverse(), w.gyro().rowwise().reverse(), 0.01, 0.0);
  CHECK(tokenize(r).base == t.base.rowwise().reverse());
}

TEST_CASE("base positional embedding rows are identical sinusoids") {
  const Eigen::MatrixXd pe = base_positional_embedding(3, 100);
  REQUIRE(pe.rows() == 3);
  CHECK(pe.row(0) == pe.row(1));
  CHECK(pe.row(0) == pe.row(2));
  CHECK(pe(0, 0) == 0.0);
  CHECK(pe(0, 1) == doctest::Approx(std::cos(1.0)));
  CHECK(pe(0, 4) == doctest::Approx(std::sin(4.0 * std::pow(10000.0, -4.0 / 100.0))));
}

TEST_CASE("adaptive positional embeddings") {
  RunConfig cfg;
  cfg.N = 1;
  nn::ParameterStore store;
  nn::Initializer init(1);
  const Encoder enc(store, init, cfg);
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd a = random_matrix(9, 100, rng);
  const Eigen::MatrixXd g = random_matrix(9, 100, rng);

  const auto& l = enc.layers()[0];
  for (const auto* m : {&l.ape_accel, &l.ape_gyro}) {
    store.value(m->second.weight).setZero();
    store.value(m->second.bias).setOnes();
  }
  const Eigen::MatrixXd ones = enc.adaptive_positional_embeddings(store, 0, a, g);
  REQUIRE(ones.rows() == 18);
  CHECK((ones - enc.base_pe().row(0).replicate(18, 1)).cwiseAbs().maxCoeff() < 1e-15);
  for (const auto* m : {&l.ape_accel, &l.ape_gyro}) store.value(m->second.bias).setZero();
  CHECK(enc.adaptive_positional_embeddings(store, 0, a, g).cwiseAbs().maxCoeff() == 0.0);

  // Fresh parameters: the gyro half depends on gyro tokens only.
  nn::ParameterStore s2;
  nn::Initializer i2(2);
  const Encoder e2(s2, i2, cfg);
  const Eigen::MatrixXd a2 = random_matrix(9, 100, rng);
  const Eigen::MatrixXd p1 = e2.adaptive_positional_embeddings(s2, 0, a, g);
  const Eigen::MatrixXd p2 = e2.adaptive_positional_embeddings(s2, 0, a2, g);
  CHECK(p1.bottomRows(9) == p2.bottomRows(9));
  CHECK((p1.topRows(9) - p2.topRows(9)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("asc shape, neutral gates and zero input") {
  RunConfig cfg;
  cfg.N = 1;
  nn::ParameterStore store;
  nn::Initializer init(3);
  const Encoder enc(store, init, cfg);
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd x = random_matrix(9, 200, rng);
  const Eigen::MatrixXd y = enc.asc(store, 0, x);
  CHECK(y.rows() == 9);
  CHECK(y.cols() == 200);

  // Identity convolution and mixing with zero gate pre-activations: every
  // gate is 0.5, so the block reduces to GELU(x / 2).
  const auto& a = enc.layers()[0].asc;
  store.value(a.kernel) << 0.0, 1.0, 0.0;
  store.value(a.kernel_bias).setZero();
  store.value(a.gate_weight).setZero();
  store.value(a.gate_bias).setZero();
  store.value(a.mix).setIdentity();
  store.value(a.mix_bias).setZero();
  const Eigen::MatrixXd h = enc.asc(store, 0, x);
  double err = 0.0;
  for (Index i = 0; i < x.size(); ++i) err = std::max(err, std::abs(h.data()[i] - gelu(0.5 * x.data()[i])));
  CHECK(err < 1e-14);

  nn::ParameterStore s2;
  nn::Initializer i2(4);
  const Encoder e2(s2, i2, cfg);
  CHECK(e2.asc(s2, 0, Eigen::MatrixXd::Zero(9, 200)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder layer preserves shape with every toggle combination") {
  std::mt19937_64 rng(14);
  for (int mask = 0; mask < 8; ++mask) {
    RunConfig cfg;
    cfg.N = 1;
    cfg.toggles.psd = mask & 1;
    cfg.toggles.asc = mask & 2;
    cfg.toggles.ape = mask & 4;
    nn::ParameterStore store;
    nn::Initializer init(5);
    const Encoder enc(store, init, cfg);
    VariateTokens t;
    t.base = random_matrix(6, 100, rng);
    if (cfg.toggles.psd) t = psd_augment(t, cfg, 0);
    const Index rows = cfg.token_rows();
    t.pos_embed = enc.base_pe().row(0).replicate(rows, 1);
    const VariateTokens out = enc.encoder_layer(store, t, 0);
    const Eigen::MatrixXd& y = cfg.toggles.psd ? out.augmented : out.base;
    CHECK(y.rows() == rows);
    CHECK(y.cols() == 100);
    CHECK(y.allFinite());
  }
}

TEST_CASE("encode output shapes, determinism and attention rows") {
  RunConfig cfg;
  nn::ParameterStore store;
  nn::Initializer init(6);
  const Encoder enc(store, init, cfg);
  std::mt19937_64 rng(15);
  const ImuWindow w = random_window(rng);
  const EncodedWindow a = enc.encode(store, w);
  for (const auto* m : {&a.tokens_accel, &a.tokens_gyro, &a.pe_accel, &a.pe_gyro}) {
    CHECK(m->rows() == 9);
    CHECK(m->cols() == 100);
  }
  const EncodedWindow b = enc.encode(store, w);
  CHECK(a.tokens_accel == b.tokens_accel);
  CHECK(a.pe_gyro == b.pe_gyro);

  nn::Binding p(store, false);
  EncoderProbe probe;
  enc.forward(p, ad::constant(tokenize(w).base), 1, &probe);
  REQUIRE(probe.attention.size() == 2);
  for (const auto& layer : probe.attention) {
    for (const auto& m : layer.weights) {
      CHECK(m.rows() == 18);
      CHECK(m.minCoeff() >= 0.0);
      CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("batched forward equals per-window forward") {
  RunConfig cfg;
  nn::ParameterStore store;
  nn::Initializer init(7);
  const Encoder enc(store, init, cfg);
  std::mt19937_64 rng(16);
  const ImuWindow w0 = random_window(rng);
  const ImuWindow w1 = random_window(rng);
  Eigen::MatrixXd both(12, 100);
  both << tokenize(w0).base, tokenize(w1).base;
  nn::Binding p(store, false);
  const EncoderOutput o = enc.forward(p, ad::constant(both), 2);
  const EncodedWindow e1 = enc.encode(store, w1);
  CHECK((o.tokens_accel.value().bottomRows(9) - e1.tokens_accel).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((o.pe_gyro.value().bottomRows(9) - e1.pe_gyro).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permuting gyro channels permutes gyro tokens") {
  // The channel convolution inside ASC deliberately couples neighbouring
  // channels, so equivariance is checked with it disabled.
  RunConfig cfg;
  cfg.toggles.asc = false;
  nn::ParameterStore store;
  nn::Initializer init(8);
  const Encoder enc(store, init, cfg);
  std::mt19937_64 rng(17);
  const ImuWindow w = random_window(rng);
  const std::array<int, 3> perm{2, 0, 1};
  Eigen::MatrixXd g(3, 100);
  for (int c = 0; c < 3; ++c) g.row(c) = w.gyro().row(perm[c]);
  const ImuWindow wp(w.accel(), g, 0.01, 0.0);
  const EncodedWindow a = enc.encode(store, w);
  const EncodedWindow b = enc.encode(store, wp);
  double err = 0.0;
  for (int block = 0; block < 3; ++block) {
    for (int c = 0; c < 3; ++c) {
      err = std::max(err, (b.tokens_gyro.row(3 * block + c) - a.tokens_gyro.row(3 * block + perm[c])).cwiseAbs().maxCoeff());
    }
  }
  CHECK(err < 1e-5);
}

TEST_CASE("full encoder gradient matches finite differences") {
  const RunConfig cfg = small_config();
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    nn::ParameterStore store;
    nn::Initializer init(100 + trial);
    const Encoder enc(store, init, cfg);
    const nn::ParamId input = store.add("input", random_matrix(6, 8, rng));
    const Eigen::MatrixXd probe_t = random_matrix(18, 8, rng);
    const Eigen::MatrixXd probe_e = random_matrix(18, 8, rng);
    const double err = imot::testing::directional_gradient_error(
        store,
        [&](nn::Binding& p) {
          const EncoderOutput o = enc.forward(p, p(input), 1);
          const ad::Var pe = ad::concat_rows({o.pe_accel, o.pe_gyro});
          return ad::add(ad::sum(ad::mul(o.tokens, ad::constant(probe_t))),
                         ad::sum(ad::mul(pe, ad::constant(probe_e))));
        },
        rng);
    CHECK(err < 1e-4);
  }
}
