#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "imot/errors.hpp"
#include "imot/data.hpp"
#include "imot/odometry.hpp"
#include "support.hpp"

using namespace imot;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

MotionProfile noisy(ProfileKind kind, double duration) {
  MotionProfile p;
  p.kind = kind;
  p.duration = duration;
  p.turn_rate = 0.2;
  p.mount = {0.05, 0.1, 1.0};
  p.noise = {0.05, 0.005, 0.02, 0.001};
  return p;
}

}  // namespace

TEST_CASE("profile kinds and json") {
  for (auto k : {ProfileKind::kStraight, ProfileKind::kArc, ProfileKind::kUTurn, ProfileKind::kStopGo,
                 ProfileKind::kFigureEight, ProfileKind::kRandomWalk}) {
    CHECK(profile_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(profile_kind_from_string("zigzag"), ValidationError);
  MotionProfile p = noisy(ProfileKind::kArc, 12.0);
  p.name = "walk";
  const MotionProfile q = profile_from_json(to_json(p));
  CHECK(q.kind == p.kind);
  CHECK(q.name == "walk");
  CHECK(q.duration == 12.0);
  CHECK(q.mount == p.mount);
  CHECK(q.noise.gyro_bias == p.noise.gyro_bias);
  CHECK(error_of([] { profile_from_json({{"kind", "arc"}, {"sped", 1.0}}); }).find("sped") != std::string::npos);
  CHECK_THROWS_AS(profile_from_json({{"kind", "arc"}, {"duration", -1.0}}), ValidationError);
}

TEST_CASE("noiseless straight walk ends at 10 m and SINS tracks it") {
  MotionProfile p;
  p.duration = 10.0;
  p.gait_freq = 0.0;
  const ImuSequence s = synthesize(p, 100.0, 1);
  CHECK(s.samples() == 1001);
  CHECK(s.times.back() == doctest::Approx(10.0));
  const auto end = s.ground_truth.position(s.ground_truth.size() - 1);
  CHECK(end.x() == doctest::Approx(10.0));
  CHECK(std::abs(end.y()) < 1e-12);
  const Trajectory est = sins_reconstruct(s, {0, 0, kGravity}, Eigen::Vector2d(1.0, 0.0));
  CHECK((est.positions() - s.ground_truth.positions()).rowwise().norm().maxCoeff() < 1e-2);
  for (Index i = 0; i < s.samples(); ++i) {
    CHECK(s.orientation[static_cast<std::size_t>(i)].norm() == doctest::Approx(1.0));
  }
}

TEST_CASE("each profile has its expected shape") {
  MotionProfile u;
  u.kind = ProfileKind::kUTurn;
  u.duration = 20.0;
  u.gait_freq = 0.0;
  const ImuSequence us = synthesize(u, 100.0, 0);
  CHECK(std::abs(std::remainder(yaw_of(us.orientation.back()) - yaw_of(us.orientation.front()), 2 * std::numbers::pi)) ==
        doctest::Approx(std::numbers::pi).epsilon(1e-3));

  MotionProfile sg;
  sg.kind = ProfileKind::kStopGo;
  sg.duration = 10.0;
  const ImuSequence ss = synthesize(sg, 100.0, 0);
  // Standing between 5 and 9 s: no displacement and gravity-only specific force.
  CHECK((ss.ground_truth.at(8.9) - ss.ground_truth.at(5.1)).norm() < 1e-9);
  for (Index i = 520; i < 880; ++i) {
    CHECK(std::abs(ss.accel.row(i).norm() - kGravity) < 1e-9);
    CHECK(ss.gyro.row(i).norm() < 1e-12);
  }

  MotionProfile f;
  f.kind = ProfileKind::kFigureEight;
  f.turn_rate = 0.5;
  f.duration = 2.0 * std::numbers::pi / 0.5;
  f.gait_freq = 0.0;
  const ImuSequence fs8 = synthesize(f, 100.0, 0);
  const auto& g = fs8.ground_truth;
  CHECK((g.position(g.size() - 1) - g.position(0)).norm() < 0.05);
}

TEST_CASE("same seed gives identical files, different seed differs") {
  std::vector<MotionProfile> profiles{noisy(ProfileKind::kRandomWalk, 5.0), noisy(ProfileKind::kArc, 5.0)};
  const fs::path a = testing::scratch_dir("data_seed_a");
  const fs::path b = testing::scratch_dir("data_seed_b");
  const fs::path c = testing::scratch_dir("data_seed_c");
  const auto names = generate_synthetic(profiles, 100.0, 42, a.string());
  CHECK(names == std::vector<std::string>{"seq_000", "seq_001"});
  generate_synthetic(profiles, 100.0, 42, b.string());
  generate_synthetic(profiles, 100.0, 43, c.string());
  for (const auto& n : names) {
    for (const char* f : {"imu.csv", "ori.csv", "gt.csv", "manifest.json"}) {
      CHECK(slurp(a / n / f) == slurp(b / n / f));
    }
    CHECK(slurp(a / n / "imu.csv") != slurp(c / n / "imu.csv"));
  }
  CHECK_THROWS_AS(generate_synthetic(profiles, 50.0, 1, a.string()), ValidationError);
}

TEST_CASE("sequence round trip") {
  const fs::path dir = testing::scratch_dir("data_roundtrip");
  ImuSequence s = synthesize(noisy(ProfileKind::kRandomWalk, 6.0), 200.0, 9);
  s.name = "rt";
  s.stats = compute_stats(s);
  write_sequence(s, (dir / "rt").string());
  const ImuSequence r = load_sequence((dir / "rt").string());
  CHECK(r.name == "rt");
  CHECK(r.sample_rate == 200.0);
  REQUIRE(r.samples() == s.samples());
  CHECK((r.accel - s.accel).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.gyro - s.gyro).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.ground_truth.positions() - s.ground_truth.positions()).cwiseAbs().maxCoeff() < 1e-9);
  for (std::size_t i = 0; i < s.orientation.size(); ++i) {
    CHECK(r.orientation[i].angularDistance(s.orientation[i]) < 1e-9);
    CHECK(std::abs(r.times[i] - s.times[i]) < 1e-12);
  }
  CHECK(r.stats.count == s.stats.count);
  CHECK(r.stats.mean[2] == doctest::Approx(s.stats.mean[2]));

  const auto all = load_dataset(dir.string());
  REQUIRE(all.size() == 1);
  CHECK(all[0].name == "rt");
  CHECK(load_dataset((dir / "rt").string()).size() == 1);
  CHECK_THROWS_AS(load_dataset((dir / "missing").string()), ValidationError);
}

TEST_CASE("malformed files are reported with their location") {
  const fs::path dir = testing::scratch_dir("data_bad");
  ImuSequence s = synthesize(noisy(ProfileKind::kStraight, 2.0), 100.0, 1);
  s.name = "bad";
  const fs::path seq = dir / "bad";
  write_sequence(s, seq.string());
  const std::string imu = slurp(seq / "imu.csv");
  const std::string ori = slurp(seq / "ori.csv");

  // Truncated final row.
  const std::size_t last_row = imu.rfind('\n', imu.size() - 2) + 1;
  spit(seq / "imu.csv", imu.substr(0, last_row + 30));
  std::string msg = error_of([&] { load_sequence(seq.string()); });
  CHECK(msg.find("imu.csv:202") != std::string::npos);
  CHECK(msg.find("expected 7") != std::string::npos);

  // Whole rows missing.
  spit(seq / "imu.csv", imu.substr(0, last_row));
  CHECK(error_of([&] { load_sequence(seq.string()); }).find("truncated") != std::string::npos);

  spit(seq / "imu.csv", "time,ax\n" + imu.substr(imu.find('\n') + 1));
  CHECK(error_of([&] { load_sequence(seq.string()); }).find("imu.csv:1: malformed header") != std::string::npos);

  std::string garbled = imu;
  garbled.replace(garbled.find('\n') + 1, 1, "x");
  spit(seq / "imu.csv", garbled);
  CHECK(error_of([&] { load_sequence(seq.string()); }).find("imu.csv:2: invalid number") != std::string::npos);
  spit(seq / "imu.csv", imu);

  // Non-unit quaternion on data row 5, i.e. file line 6.
  std::istringstream in(ori);
  std::string out, line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (n == 6) line = line.substr(0, line.find(',')) + ",1.5,0,0,0";
    out += line + "\n";
  }
  spit(seq / "ori.csv", out);
  msg = error_of([&] { load_sequence(seq.string()); });
  CHECK(msg.find("ori.csv:6") != std::string::npos);
  CHECK(msg.find("1.5") != std::string::npos);
  spit(seq / "ori.csv", ori);
  CHECK_NOTHROW(load_sequence(seq.string()));

  fs::remove(seq / "gt.csv");
  CHECK(error_of([&] { load_sequence(seq.string()); }).find("gt.csv") != std::string::npos);
}

TEST_CASE("window counts and ground-truth velocity") {
  MotionProfile p;
  p.duration = 10.0;
  p.speed = 1.0;
  p.acceleration = 0.1;
  p.heading = 0.5;
  const ImuSequence s = synthesize(p, 100.0, 2);
  CHECK(window_dataset(s, 100, 100).size() == 10);
  CHECK(window_dataset(s, 100, 10).size() == 91);
  CHECK(window_dataset(s, 100, 1).size() == 901);
  CHECK_THROWS_AS(window_dataset(s, 200, 10), ValidationError);

  const auto w = window_dataset(s, 100, 100);
  for (std::size_t k = 0; k < w.size(); ++k) {
    const auto& win = w[k];
    CHECK(win.window.samples() == 100);
    CHECK(win.window.t0() == doctest::Approx(static_cast<double>(k)));
    const Eigen::Vector2d expect =
        (s.ground_truth.at(win.window.t0() + 1.0) - s.ground_truth.at(win.window.t0()));
    CHECK((win.v_gt - expect).norm() < 1e-12);
  }
  // The walking direction follows the heading.
  CHECK(std::atan2(w[3].v_gt.y(), w[3].v_gt.x()) == doctest::Approx(0.5).epsilon(1e-2));

  MotionProfile shortp = p;
  shortp.duration = 0.5;
  CHECK(window_dataset(synthesize(shortp, 100.0, 0), 100, 10).empty());
}

TEST_CASE("world frame removes the device mount") {
  MotionProfile p;
  p.gait_freq = 0.0;
  p.duration = 3.0;
  p.mount = {0.4, -0.3, 2.0};
  const auto w = window_dataset(synthesize(p, 100.0, 0), 100, 100);
  const MatrixXd world = to_world_frame(w[1].window);
  CHECK(world.rows() == 6);
  CHECK(world.cols() == 100);
  CHECK(world.row(2).array().isApprox(Eigen::ArrayXXd::Constant(1, 100, kGravity)));
  CHECK(world.topRows(2).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(world.bottomRows(3).cwiseAbs().maxCoeff() < 1e-9);

  ImuWindow bare(MatrixXd::Zero(3, 100), MatrixXd::Zero(3, 100), 0.01, 0.0);
  CHECK_THROWS_AS(to_world_frame(bare), ValidationError);
}

TEST_CASE("normalization statistics") {
  const ImuSequence a = synthesize(noisy(ProfileKind::kArc, 5.0), 100.0, 1);
  const ImuSequence b = synthesize(noisy(ProfileKind::kStopGo, 7.0), 100.0, 2);
  const ChannelStats sa = compute_stats(a), sb = compute_stats(b);
  const ChannelStats pooled = pool_stats({sa, sb});
  CHECK(pooled.count == sa.count + sb.count);
  for (int c = 0; c < 6; ++c) {
    // Oracle from raw first and second moments.
    const double na = static_cast<double>(sa.count), nb = static_cast<double>(sb.count);
    const double m = (na * sa.mean[c] + nb * sb.mean[c]) / (na + nb);
    const double ex2 = (na * (sa.stddev[c] * sa.stddev[c] + sa.mean[c] * sa.mean[c]) +
                        nb * (sb.stddev[c] * sb.stddev[c] + sb.mean[c] * sb.mean[c])) /
                       (na + nb);
    CHECK(pooled.mean[c] == doctest::Approx(m));
    CHECK(pooled.stddev[c] == doctest::Approx(std::sqrt(ex2 - m * m)));
  }
  ChannelStats flat;
  flat.count = 10;
  flat.mean = {1, 2, 3, 4, 5, 6};
  flat.stddev = {0, 2, 0, 1, 1, 1};
  const Normalization n = Normalization::from_stats(flat);
  CHECK(n.stddev[0] == 1.0);
  CHECK(n.stddev[1] == 2.0);
  CHECK(Normalization::from_json(n.to_json()) == n);
  MatrixXd tok = MatrixXd::Constant(6, 3, 4.0);
  n.apply(tok);
  CHECK(tok(0, 0) == doctest::Approx(3.0));
  CHECK(tok(1, 0) == doctest::Approx(1.0));
  CHECK(tok(5, 2) == doctest::Approx(-2.0));
}
