#include <doctest.h>

#include <numbers>

#include "imot/errors.hpp"
#include "imot/series_decoupler.hpp"
#include "support.hpp"

using namespace imot;
using imot::testing::random_matrix;

namespace {

// Brute-force windowed average with edge replication.
Eigen::VectorXd oracle_ma(const Eigen::VectorXd& x, int k) {
  const Eigen::Index T = x.size();
  const int h = k / 2;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int o = -h; o <= h; ++o) {
      double w = 1.0 / k;
      if (k % 2 == 0 && (o == -h || o == h)) w = 0.5 / k;
      const Eigen::Index i = std::clamp<Eigen::Index>(t + o, 0, T - 1);
      y(t) += w * x(i);
    }
  }
  return y;
}

double total_variation(const Eigen::RowVectorXd& r) {
  double tv = 0.0;
  for (Eigen::Index i = 1; i < r.size(); ++i) tv += std::abs(r(i) - r(i - 1));
  return tv;
}

}  // namespace

TEST_CASE("moving average examples") {
  Eigen::VectorXd ramp(5);
  ramp << 0, 1, 2, 3, 4;
  const Eigen::VectorXd y = centered_moving_average(ramp, 3);
  Eigen::VectorXd expect(5);
  expect << 1.0 / 3.0, 1, 2, 3, 11.0 / 3.0;
  CHECK((y - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((y - oracle_ma(ramp, 3)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(9);
  impulse(4) = 1.0;
  const Eigen::VectorXd z = centered_moving_average(impulse, 3);
  for (int i = 0; i < 9; ++i) {
    CHECK(z(i) == doctest::Approx((i >= 3 && i <= 5) ? 1.0 / 3.0 : 0.0));
  }

  const Eigen::VectorXd c = Eigen::VectorXd::Constant(12, 2.5);
  for (int k : {1, 2, 3, 4, 9, 12}) {
    CHECK((centered_moving_average(c, k).array() - 2.5).abs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(centered_moving_average(c, 0), ValidationError);
  CHECK_THROWS_AS(centered_moving_average(c, 13), ValidationError);
}

TEST_CASE("moving average matches the brute-force oracle, odd and even orders") {
  std::mt19937_64 rng(5);
  for (int k = 1; k <= 10; ++k) {
    const Eigen::VectorXd x = random_matrix(20, 1, rng);
    CHECK((centered_moving_average(x, k) - oracle_ma(x, k)).cwiseAbs().maxCoeff() < 1e-12);
    // Symmetric weights: reversing the input reverses the output.
    const Eigen::VectorXd r = x.reverse();
    CHECK((centered_moving_average(r, k) - centered_moving_average(x, k).reverse()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("trend operator is the composed double average") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd op = trend_operator(30, 9, 3);
  const Eigen::VectorXd x = random_matrix(30, 1, rng);
  CHECK((op * x - oracle_ma(oracle_ma(x, 9), 3)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(trend_operator(30, 3, 3), ValidationError);
  CHECK_THROWS_AS(trend_operator(30, 4, 3), ValidationError);
}

TEST_CASE("series_break identity, constants and sinusoids") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = random_matrix(6, 100, rng, 3.0);
  const Decomposition d = series_break(x, 9, 3);
  CHECK((d.seasonal + d.trend - x).cwiseAbs().maxCoeff() < 1e-12);

  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(6, 100, -1.25);
  const Decomposition dc = series_break(c, 9, 3);
  CHECK(dc.trend == c);
  CHECK(dc.seasonal.cwiseAbs().maxCoeff() == 0.0);

  // Linear trend plus a sinusoid whose period equals k1: the interior trend
  // is exactly linear and the seasonal part is the sinusoid.
  Eigen::MatrixXd s(1, 100);
  Eigen::MatrixXd sinus(1, 100);
  for (int t = 0; t < 100; ++t) {
    sinus(0, t) = std::sin(2.0 * std::numbers::pi * t / 9.0);
    s(0, t) = 0.05 * t + sinus(0, t);
  }
  const Decomposition ds = series_break(s, 9, 3);
  const Eigen::VectorXd brute_trend = oracle_ma(oracle_ma(s.row(0).transpose(), 9), 3);
  CHECK((ds.trend.row(0).transpose() - brute_trend).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ds.seasonal.middleCols(6, 88) - sinus.middleCols(6, 88)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("smoothing monotonicity and linearity") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = random_matrix(6, 50, rng);
  const Eigen::MatrixXd y = random_matrix(6, 50, rng);
  const Decomposition dx = series_break(x, 9, 3);
  const Decomposition dy = series_break(y, 9, 3);
  for (int r = 0; r < 6; ++r) {
    CHECK(total_variation(dx.trend.row(r)) <= total_variation(x.row(r)) + 1e-12);
  }
  const Decomposition dz = series_break(2.0 * x - 0.5 * y, 9, 3);
  CHECK((dz.trend - (2.0 * dx.trend - 0.5 * dy.trend)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((dz.seasonal - (2.0 * dx.seasonal - 0.5 * dy.seasonal)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("psd_augment layout, zeros and idempotence") {
  RunConfig cfg;
  std::mt19937_64 rng(9);
  VariateTokens t;
  t.base = random_matrix(6, 100, rng);
  const VariateTokens a = psd_augment(t, cfg, 0);
  REQUIRE(a.augmented.rows() == 18);
  const Decomposition d = series_break(t.base, 9, 3);
  for (int m = 0; m < 2; ++m) {
    CHECK(a.augmented.middleRows(9 * m, 3) == t.base.middleRows(3 * m, 3));
    CHECK((a.augmented.middleRows(9 * m + 3, 3) - d.seasonal.middleRows(3 * m, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.augmented.middleRows(9 * m + 6, 3) - d.trend.middleRows(3 * m, 3)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK((a.seasonal + a.trend - a.base).cwiseAbs().maxCoeff() < 1e-9);

  const VariateTokens again = psd_augment(a, cfg, 1);
  CHECK((again.augmented - a.augmented).cwiseAbs().maxCoeff() < 1e-12);

  VariateTokens z;
  z.base = Eigen::MatrixXd::Zero(6, 100);
  CHECK(psd_augment(z, cfg, 0).augmented.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batched augmentation matches the facade and its gradient is exact") {
  RunConfig cfg;
  cfg.T = 16;
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd base = random_matrix(12, 16, rng);  // two windows
  const ad::Var op_t = ad::constant(trend_operator(16, 9, 3).transpose());
  const Eigen::MatrixXd batched = psd::augment(ad::constant(base), 2, 3, op_t).value();
  for (int b = 0; b < 2; ++b) {
    VariateTokens t;
    t.base = base.middleRows(6 * b, 6);
    CHECK((batched.middleRows(18 * b, 18) - psd_augment(t, cfg, 0).augmented).cwiseAbs().maxCoeff() < 1e-12);
  }

  nn::ParameterStore store;
  store.add("x", base.topRows(6));
  const Eigen::MatrixXd probe = random_matrix(18, 16, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const double err = imot::testing::directional_gradient_error(
        store,
        [&](nn::Binding& p) {
          return ad::sum(ad::mul(psd::augment(p(0), 1, 3, op_t), ad::constant(probe)));
        },
        rng);
    CHECK(err < 1e-5);
  }
}
