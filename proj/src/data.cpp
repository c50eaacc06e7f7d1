#include "imot/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "imot/errors.hpp"

namespace imot {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kImuHeader = "t,ax,ay,az,gx,gy,gz";
constexpr const char* kOriHeader = "t,qw,qx,qy,qz";
constexpr const char* kGtHeader = "t,x,y";

struct Kinematics {
  double speed = 0.0;
  double speed_rate = 0.0;
  double yaw_rate = 0.0;
};

// Random-walk profile coefficients, drawn once per sequence.
struct Wander {
  std::array<double, 3> amp{};
  std::array<double, 3> freq{};
  std::array<double, 3> phase{};
  double speed_freq = 0.0;
  double speed_phase = 0.0;
};

Kinematics evaluate(const MotionProfile& p, const Wander& w, double t) {
  constexpr double pi = std::numbers::pi;
  Kinematics k;
  switch (p.kind) {
    case ProfileKind::kStraight:
      k.speed = p.speed + p.acceleration * t;
      k.speed_rate = p.acceleration;
      break;
    case ProfileKind::kArc:
      k.speed = p.speed;
      k.yaw_rate = p.turn_rate;
      break;
    case ProfileKind::kUTurn: {
      // Raised-cosine yaw-rate pulse that turns by pi in the middle.
      const double peak = p.turn_rate > 0.0 ? p.turn_rate : 0.5;
      const double span = 2.0 * pi / peak;
      const double start = std::max(0.0, 0.5 * (p.duration - span));
      k.speed = p.speed;
      if (t >= start && t < start + span) {
        k.yaw_rate = 0.5 * peak * (1.0 - std::cos(2.0 * pi * (t - start) / span));
      }
      break;
    }
    case ProfileKind::kStopGo: {
      // 10 s cycle: walk 4 s, slow down 1 s, stand 4 s, speed up 1 s.
      const double u = std::fmod(t, 10.0);
      if (u < 4.0) {
        k.speed = p.speed;
      } else if (u < 5.0) {
        const double a = u - 4.0;
        k.speed = 0.5 * p.speed * (1.0 + std::cos(pi * a));
        k.speed_rate = -0.5 * p.speed * pi * std::sin(pi * a);
      } else if (u < 9.0) {
        k.speed = 0.0;
      } else {
        const double a = u - 9.0;
        k.speed = 0.5 * p.speed * (1.0 - std::cos(pi * a));
        k.speed_rate = 0.5 * p.speed * pi * std::sin(pi * a);
      }
      break;
    }
    case ProfileKind::kFigureEight: {
      // Lemniscate of Gerono traced once per 2*pi/rate, closed by construction.
      const double rate = p.turn_rate > 0.0 ? p.turn_rate : 0.5;
      const double tau = rate * t;
      const double c1 = std::cos(tau), s1 = std::sin(tau);
      const double c2 = std::cos(2.0 * tau), s2 = std::sin(2.0 * tau);
      const double q = c1 * c1 + c2 * c2;
      k.speed = p.speed * std::sqrt(q);
      k.speed_rate = p.speed * rate * (-s2 - 2.0 * std::sin(4.0 * tau)) / (2.0 * std::sqrt(q));
      k.yaw_rate = rate * (s1 * c2 - 2.0 * c1 * s2) / q;
      break;
    }
    case ProfileKind::kRandomWalk: {
      for (int i = 0; i < 3; ++i) {
        k.yaw_rate += w.amp[i] * std::sin(w.freq[i] * t + w.phase[i]);
      }
      k.speed = p.speed * (1.0 + 0.25 * std::sin(w.speed_freq * t + w.speed_phase));
      k.speed_rate = p.speed * 0.25 * w.speed_freq * std::cos(w.speed_freq * t + w.speed_phase);
      break;
    }
  }
  return k;
}

// Forward speed including the gait surge, and its time derivative.
std::pair<double, double> gait_speed(const MotionProfile& p, const Kinematics& k, double t) {
  if (p.gait_freq <= 0.0) {
    return {k.speed, k.speed_rate};
  }
  const double omega = 2.0 * std::numbers::pi * p.gait_freq;
  const double c = std::cos(omega * t);
  const double s = std::sin(omega * t);
  const double eps = p.gait_surge;
  return {k.speed * (1.0 - eps * c), k.speed_rate * (1.0 - eps * c) + k.speed * eps * omega * s};
}

Quaternion mount_rotation(const std::array<double, 3>& rpy) {
  return Quaternion(Eigen::AngleAxisd(rpy[2], Eigen::Vector3d::UnitZ()) *
                    Eigen::AngleAxisd(rpy[1], Eigen::Vector3d::UnitY()) *
                    Eigen::AngleAxisd(rpy[0], Eigen::Vector3d::UnitX()));
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <class T>
T get_or(const json& doc, const char* key, T fallback) {
  return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

// Minimal CSV reader with line-numbered diagnostics.
std::vector<std::vector<double>> read_csv(const std::string& path, const std::string& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError(path + ": cannot open file");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(path + ":1: missing header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) {
    throw ValidationError(path + ":1: malformed header, expected \"" + header + "\"");
  }
  const std::size_t fields = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(fields);
    std::size_t pos = 0;
    while (true) {
      const std::size_t next = line.find(',', pos);
      const std::string cell = line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid number \"" + cell + "\"");
      }
      row.push_back(v);
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    if (row.size() != fields) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(fields) +
                            " fields, got " + std::to_string(row.size()));
    }
    if (!rows.empty() && !(row[0] > rows.back()[0])) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": timestamps must be strictly increasing");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw ValidationError(path + ": no data rows");
  }
  return rows;
}

}  // namespace

std::string to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::kStraight: return "straight";
    case ProfileKind::kArc: return "arc";
    case ProfileKind::kUTurn: return "u_turn";
    case ProfileKind::kStopGo: return "stop_go";
    case ProfileKind::kFigureEight: return "figure_eight";
    case ProfileKind::kRandomWalk: return "random_walk";
  }
  return "straight";
}

ProfileKind profile_kind_from_string(const std::string& name) {
  for (auto k : {ProfileKind::kStraight, ProfileKind::kArc, ProfileKind::kUTurn, ProfileKind::kStopGo,
                 ProfileKind::kFigureEight, ProfileKind::kRandomWalk}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown profile kind \"" + name + "\"");
}

void MotionProfile::check() const {
  require(duration > 0.0, "profile: duration must be > 0");
  require(speed >= 0.0, "profile: speed must be >= 0");
  require(gait_freq >= 0.0, "profile: gait_freq must be >= 0");
  require(noise.accel_sigma >= 0.0 && noise.gyro_sigma >= 0.0, "profile: noise sigmas must be >= 0");
  require(std::isfinite(acceleration) && std::isfinite(turn_rate), "profile: non-finite parameters");
}

MotionProfile profile_from_json(const json& doc) {
  require(doc.is_object(), "profile entry must be an object");
  static const std::vector<std::string> known = {"kind", "name", "duration", "speed", "acceleration", "turn_rate",
                                                 "gait_freq", "gait_bounce", "gait_surge", "heading", "mount",
                                                 "noise"};
  for (const auto& [key, _] : doc.items()) {
    require(std::find(known.begin(), known.end(), key) != known.end(), "profile: unknown key \"" + key + "\"");
  }
  MotionProfile p;
  try {
    p.kind = profile_kind_from_string(get_or<std::string>(doc, "kind", "straight"));
    p.name = get_or<std::string>(doc, "name", "");
    p.duration = get_or(doc, "duration", p.duration);
    p.speed = get_or(doc, "speed", p.speed);
    p.acceleration = get_or(doc, "acceleration", p.acceleration);
    p.turn_rate = get_or(doc, "turn_rate", p.turn_rate);
    p.gait_freq = get_or(doc, "gait_freq", p.gait_freq);
    p.gait_bounce = get_or(doc, "gait_bounce", p.gait_bounce);
    p.gait_surge = get_or(doc, "gait_surge", p.gait_surge);
    p.heading = get_or(doc, "heading", p.heading);
    if (doc.contains("mount")) {
      p.mount = doc.at("mount").get<std::array<double, 3>>();
    }
    if (doc.contains("noise")) {
      const json& n = doc.at("noise");
      for (const auto& [key, _] : n.items()) {
        require(key == "accel_sigma" || key == "gyro_sigma" || key == "accel_bias" || key == "gyro_bias",
                "profile.noise: unknown key \"" + key + "\"");
      }
      p.noise.accel_sigma = get_or(n, "accel_sigma", 0.0);
      p.noise.gyro_sigma = get_or(n, "gyro_sigma", 0.0);
      p.noise.accel_bias = get_or(n, "accel_bias", 0.0);
      p.noise.gyro_bias = get_or(n, "gyro_bias", 0.0);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("profile: ") + e.what());
  }
  p.check();
  return p;
}

ordered_json to_json(const MotionProfile& p) {
  ordered_json j;
  j["kind"] = to_string(p.kind);
  j["name"] = p.name;
  j["duration"] = p.duration;
  j["speed"] = p.speed;
  j["acceleration"] = p.acceleration;
  j["turn_rate"] = p.turn_rate;
  j["gait_freq"] = p.gait_freq;
  j["gait_bounce"] = p.gait_bounce;
  j["gait_surge"] = p.gait_surge;
  j["heading"] = p.heading;
  j["mount"] = p.mount;
  j["noise"] = {{"accel_sigma", p.noise.accel_sigma},
                {"gyro_sigma", p.noise.gyro_sigma},
                {"accel_bias", p.noise.accel_bias},
                {"gyro_bias", p.noise.gyro_bias}};
  return j;
}

std::vector<MotionProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open profiles file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const json& list = doc.is_object() && doc.contains("profiles") ? doc.at("profiles") : doc;
  require(list.is_array() && !list.empty(), path + ": expected a non-empty array of profiles");
  std::vector<MotionProfile> out;
  for (const auto& item : list) {
    out.push_back(profile_from_json(item));
  }
  return out;
}

ChannelStats pool_stats(const std::vector<ChannelStats>& parts) {
  ChannelStats out;
  std::array<double, 6> sum{};
  std::array<double, 6> sumsq{};
  for (const auto& s : parts) {
    out.count += s.count;
    for (int c = 0; c < 6; ++c) {
      const double n = static_cast<double>(s.count);
      sum[c] += n * s.mean[c];
      sumsq[c] += n * (s.stddev[c] * s.stddev[c] + s.mean[c] * s.mean[c]);
    }
  }
  if (out.count == 0) return out;
  const double n = static_cast<double>(out.count);
  for (int c = 0; c < 6; ++c) {
    out.mean[c] = sum[c] / n;
    out.stddev[c] = std::sqrt(std::max(0.0, sumsq[c] / n - out.mean[c] * out.mean[c]));
  }
  return out;
}

Normalization Normalization::from_stats(const ChannelStats& stats) {
  Normalization n;
  for (int c = 0; c < 6; ++c) {
    n.mean[c] = stats.mean[c];
    n.stddev[c] = stats.stddev[c] < 1e-8 ? 1.0 : stats.stddev[c];
  }
  return n;
}

ordered_json Normalization::to_json() const { return ordered_json{{"mean", mean}, {"std", stddev}}; }

Normalization Normalization::from_json(const json& doc) {
  Normalization n;
  n.mean = doc.at("mean").get<std::array<double, 6>>();
  n.stddev = doc.at("std").get<std::array<double, 6>>();
  return n;
}

void Normalization::apply(MatrixXd& tokens) const {
  require(tokens.rows() == 6, "normalization expects 6 channel rows");
  for (int c = 0; c < 6; ++c) {
    tokens.row(c) = (tokens.row(c).array() - mean[c]) / stddev[c];
  }
}

ImuSequence synthesize(const MotionProfile& profile, double sample_rate, std::uint64_t seed) {
  profile.check();
  require(sample_rate == 100.0 || sample_rate == 200.0, "unsupported sample rate " + fmt17(sample_rate) +
                                                            " (expected 100 or 200)");
  std::seed_seq seq_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Wander w;
  for (int i = 0; i < 3; ++i) {
    w.amp[i] = 0.05 + 0.25 * unit(rng);
    w.freq[i] = 0.1 + 0.5 * unit(rng);
    w.phase[i] = 2.0 * std::numbers::pi * unit(rng);
  }
  w.speed_freq = 0.1 + 0.3 * unit(rng);
  w.speed_phase = 2.0 * std::numbers::pi * unit(rng);
  Eigen::Vector3d accel_bias;
  Eigen::Vector3d gyro_bias;
  for (int i = 0; i < 3; ++i) {
    accel_bias(i) = (unit(rng) < 0.5 ? -1.0 : 1.0) * profile.noise.accel_bias;
    gyro_bias(i) = (unit(rng) < 0.5 ? -1.0 : 1.0) * profile.noise.gyro_bias;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double dt = 1.0 / sample_rate;
  const Index n = static_cast<Index>(std::llround(profile.duration * sample_rate)) + 1;
  const Quaternion mount = mount_rotation(profile.mount);
  const double omega = 2.0 * std::numbers::pi * profile.gait_freq;
  const double nominal = profile.speed > 0.0 ? profile.speed : 1.0;

  ImuSequence out;
  out.sample_rate = sample_rate;
  out.times.resize(static_cast<std::size_t>(n));
  out.accel.resize(n, 3);
  out.gyro.resize(n, 3);
  out.orientation.resize(static_cast<std::size_t>(n));
  out.profile = to_json(profile);
  Matrix2Xd gt(n, 2);

  // (yaw, x, y) state, integrated with RK4 substeps between samples.
  Eigen::Vector3d state(profile.heading, 0.0, 0.0);
  const auto deriv = [&](double t, const Eigen::Vector3d& s) {
    const Kinematics k = evaluate(profile, w, t);
    const double v = gait_speed(profile, k, t).first;
    return Eigen::Vector3d(k.yaw_rate, v * std::cos(s(0)), v * std::sin(s(0)));
  };
  constexpr int kSubsteps = 8;
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    if (i > 0) {
      const double h = dt / kSubsteps;
      double tt = static_cast<double>(i - 1) * dt;
      for (int s = 0; s < kSubsteps; ++s) {
        const Eigen::Vector3d k1 = deriv(tt, state);
        const Eigen::Vector3d k2 = deriv(tt + 0.5 * h, state + 0.5 * h * k1);
        const Eigen::Vector3d k3 = deriv(tt + 0.5 * h, state + 0.5 * h * k2);
        const Eigen::Vector3d k4 = deriv(tt + h, state + h * k3);
        state += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        tt += h;
      }
    }
    const Kinematics k = evaluate(profile, w, t);
    const auto [v, dv] = gait_speed(profile, k, t);
    const double yaw = state(0);
    const Eigen::Vector2d fwd(std::cos(yaw), std::sin(yaw));
    const Eigen::Vector2d left(-std::sin(yaw), std::cos(yaw));
    const Eigen::Vector2d horiz = dv * fwd + v * k.yaw_rate * left;
    const double vertical = profile.gait_freq > 0.0 ? profile.gait_bounce * (k.speed / nominal) * std::sin(omega * t)
                                                    : 0.0;
    const Eigen::Vector3d a_world(horiz(0), horiz(1), vertical);
    const Quaternion q = (Quaternion(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())) * mount).normalized();
    const Eigen::Matrix3d R = q.toRotationMatrix();

    Eigen::Vector3d f = R.transpose() * (a_world + Eigen::Vector3d(0.0, 0.0, kGravity)) + accel_bias;
    Eigen::Vector3d g = mount.toRotationMatrix().transpose() * Eigen::Vector3d(0.0, 0.0, k.yaw_rate) + gyro_bias;
    for (int c = 0; c < 3; ++c) {
      f(c) += profile.noise.accel_sigma * gauss(rng);
      g(c) += profile.noise.gyro_sigma * gauss(rng);
    }
    out.times[static_cast<std::size_t>(i)] = t;
    out.accel.row(i) = f.transpose();
    out.gyro.row(i) = g.transpose();
    out.orientation[static_cast<std::size_t>(i)] = q;
    gt(i, 0) = state(1);
    gt(i, 1) = state(2);
  }
  out.ground_truth = Trajectory(out.times, std::move(gt));
  out.stats = compute_stats(out);
  return out;
}

ChannelStats compute_stats(const ImuSequence& seq) {
  ChannelStats s;
  s.count = seq.samples();
  if (s.count == 0) return s;
  std::array<double, 6> sum{};
  std::array<double, 6> sumsq{};
  for (Index i = 0; i < seq.samples(); ++i) {
    const Eigen::Matrix3d R = seq.orientation[static_cast<std::size_t>(i)].toRotationMatrix();
    const Eigen::Vector3d a = R * seq.accel.row(i).transpose();
    const Eigen::Vector3d g = R * seq.gyro.row(i).transpose();
    for (int c = 0; c < 3; ++c) {
      sum[c] += a(c);
      sumsq[c] += a(c) * a(c);
      sum[3 + c] += g(c);
      sumsq[3 + c] += g(c) * g(c);
    }
  }
  const double n = static_cast<double>(s.count);
  for (int c = 0; c < 6; ++c) {
    s.mean[c] = sum[c] / n;
    s.stddev[c] = std::sqrt(std::max(0.0, sumsq[c] / n - s.mean[c] * s.mean[c]));
  }
  return s;
}

void write_sequence(const ImuSequence& seq, const std::string& dir) {
  fs::create_directories(dir);
  const auto open = [&](const std::string& file) {
    std::ofstream f(fs::path(dir) / file, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot write " + (fs::path(dir) / file).string());
    return f;
  };
  {
    std::ofstream f = open("imu.csv");
    f << kImuHeader << '\n';
    for (Index i = 0; i < seq.samples(); ++i) {
      f << fmt17(seq.times[static_cast<std::size_t>(i)]);
      for (int c = 0; c < 3; ++c) f << ',' << fmt17(seq.accel(i, c));
      for (int c = 0; c < 3; ++c) f << ',' << fmt17(seq.gyro(i, c));
      f << '\n';
    }
  }
  {
    std::ofstream f = open("ori.csv");
    f << kOriHeader << '\n';
    for (Index i = 0; i < seq.samples(); ++i) {
      const Quaternion& q = seq.orientation[static_cast<std::size_t>(i)];
      f << fmt17(seq.times[static_cast<std::size_t>(i)]) << ',' << fmt17(q.w()) << ',' << fmt17(q.x()) << ','
        << fmt17(q.y()) << ',' << fmt17(q.z()) << '\n';
    }
  }
  {
    std::ofstream f = open("gt.csv");
    f << kGtHeader << '\n';
    const auto& gt = seq.ground_truth;
    for (Index i = 0; i < gt.size(); ++i) {
      f << fmt17(gt.times()[static_cast<std::size_t>(i)]) << ',' << fmt17(gt.positions()(i, 0)) << ','
        << fmt17(gt.positions()(i, 1)) << '\n';
    }
  }
  ordered_json m;
  m["format_version"] = kFormatVersion;
  m["name"] = seq.name;
  m["sample_rate"] = seq.sample_rate;
  m["duration"] = seq.duration();
  m["samples"] = seq.samples();
  m["profile"] = seq.profile;
  m["normalization"] = {{"count", seq.stats.count}, {"mean", seq.stats.mean}, {"std", seq.stats.stddev}};
  std::ofstream f = open("manifest.json");
  f << m.dump(2) << '\n';
}

std::vector<std::string> generate_synthetic(const std::vector<MotionProfile>& profiles, double sample_rate,
                                            std::uint64_t seed, const std::string& out_dir) {
  require(sample_rate == 100.0 || sample_rate == 200.0, "unsupported sample rate " + fmt17(sample_rate) +
                                                            " (expected 100 or 200)");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    ImuSequence s = synthesize(profiles[i], sample_rate, seed * 1000003ULL + i);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%03zu", i);
    s.name = profiles[i].name.empty() ? buf : profiles[i].name;
    require(std::find(names.begin(), names.end(), s.name) == names.end(), "duplicate sequence name " + s.name);
    write_sequence(s, (fs::path(out_dir) / s.name).string());
    spdlog::debug("wrote {} ({} samples)", s.name, s.samples());
    names.push_back(s.name);
  }
  return names;
}

ImuSequence load_sequence(const std::string& dir) {
  const fs::path base(dir);
  const std::string manifest_path = (base / "manifest.json").string();
  std::ifstream mf(manifest_path);
  if (!mf) throw ValidationError(manifest_path + ": cannot open file");
  json m;
  try {
    m = json::parse(mf);
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path + ": " + e.what());
  }
  ImuSequence seq;
  try {
    require(m.at("format_version").get<int>() == kFormatVersion, manifest_path + ": unsupported format_version");
    seq.name = m.contains("name") ? m.at("name").get<std::string>() : base.filename().string();
    seq.sample_rate = m.at("sample_rate").get<double>();
    seq.profile = m.contains("profile") ? m.at("profile") : json::object();
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path + ": " + e.what());
  }

  const std::string imu_path = (base / "imu.csv").string();
  const std::string ori_path = (base / "ori.csv").string();
  const std::string gt_path = (base / "gt.csv").string();
  const auto imu = read_csv(imu_path, kImuHeader);
  const auto ori = read_csv(ori_path, kOriHeader);
  const auto gt = read_csv(gt_path, kGtHeader);
  if (m.contains("samples") && m.at("samples").get<std::size_t>() != imu.size()) {
    throw ValidationError(imu_path + ": " + std::to_string(imu.size()) + " rows but manifest lists " +
                          std::to_string(m.at("samples").get<std::size_t>()) + " samples (truncated file?)");
  }
  if (ori.size() != imu.size()) {
    throw ValidationError(ori_path + ": " + std::to_string(ori.size()) + " rows but imu.csv has " +
                          std::to_string(imu.size()));
  }

  const Index n = static_cast<Index>(imu.size());
  seq.times.resize(imu.size());
  seq.accel.resize(n, 3);
  seq.gyro.resize(n, 3);
  seq.orientation.resize(imu.size());
  for (Index i = 0; i < n; ++i) {
    const auto& r = imu[static_cast<std::size_t>(i)];
    const auto& q = ori[static_cast<std::size_t>(i)];
    const std::string where = ori_path + ":" + std::to_string(i + 2);
    if (q[0] != r[0]) {
      throw ValidationError(where + ": timestamp does not match imu.csv");
    }
    seq.times[static_cast<std::size_t>(i)] = r[0];
    for (int c = 0; c < 3; ++c) {
      seq.accel(i, c) = r[1 + c];
      seq.gyro(i, c) = r[4 + c];
    }
    Quaternion quat(q[1], q[2], q[3], q[4]);
    if (std::abs(quat.norm() - 1.0) > 1e-3) {
      throw ValidationError(where + ": quaternion norm " + fmt17(quat.norm()) + " is not unit");
    }
    quat.normalize();
    seq.orientation[static_cast<std::size_t>(i)] = quat;
  }
  std::vector<double> gt_times(gt.size());
  Matrix2Xd gt_pos(static_cast<Index>(gt.size()), 2);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt_times[i] = gt[i][0];
    gt_pos(static_cast<Index>(i), 0) = gt[i][1];
    gt_pos(static_cast<Index>(i), 1) = gt[i][2];
  }
  seq.ground_truth = Trajectory(std::move(gt_times), std::move(gt_pos));
  if (m.contains("normalization")) {
    const json& s = m.at("normalization");
    seq.stats.count = s.at("count").get<std::int64_t>();
    seq.stats.mean = s.at("mean").get<std::array<double, 6>>();
    seq.stats.stddev = s.at("std").get<std::array<double, 6>>();
  } else {
    seq.stats = compute_stats(seq);
  }
  return seq;
}

std::vector<ImuSequence> load_dataset(const std::string& path) {
  const fs::path root(path);
  if (!fs::is_directory(root)) {
    throw ValidationError(path + ": not a directory");
  }
  if (fs::exists(root / "manifest.json")) {
    return {load_sequence(path)};
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<ImuSequence> out;
  for (const auto& d : dirs) {
    out.push_back(load_sequence(d.string()));
  }
  return out;
}

std::vector<WindowSample> window_dataset(const ImuSequence& seq, int T, int stride) {
  require(T > 0 && stride > 0, "window_dataset: T and stride must be positive");
  require(std::abs(static_cast<double>(T) / seq.sample_rate - 1.0) < 1e-12,
          "window_dataset: T=" + std::to_string(T) + " samples do not span 1 s at " + fmt17(seq.sample_rate) + " Hz");
  std::vector<WindowSample> out;
  const Index intervals = seq.samples() - 1;
  if (intervals < T) return out;
  const double dt = 1.0 / seq.sample_rate;
  const Index count = (intervals - T) / stride + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (Index w = 0; w < count; ++w) {
    const Index i = w * stride;
    MatrixXd a = seq.accel.middleRows(i, T).transpose();
    MatrixXd g = seq.gyro.middleRows(i, T).transpose();
    std::vector<Quaternion> q(seq.orientation.begin() + i, seq.orientation.begin() + i + T);
    const double t0 = seq.times[static_cast<std::size_t>(i)];
    const double t1 = seq.times[static_cast<std::size_t>(i + T)];
    const Eigen::Vector2d v = (seq.ground_truth.at(t1) - seq.ground_truth.at(t0)) / (t1 - t0);
    out.push_back({ImuWindow(std::move(a), std::move(g), dt, t0, std::move(q)), v});
  }
  return out;
}

MatrixXd to_world_frame(const ImuWindow& window) {
  require(window.orientation().has_value(), "to_world_frame: window has no orientation");
  require(window.channels() == 3, "to_world_frame: expects 3 channels");
  const Index T = window.samples();
  const auto& q = *window.orientation();
  MatrixXd out(6, T);
  for (Index t = 0; t < T; ++t) {
    const Eigen::Matrix3d R = q[static_cast<std::size_t>(t)].toRotationMatrix();
    out.block(0, t, 3, 1) = R * window.accel().col(t);
    out.block(3, t, 3, 1) = R * window.gyro().col(t);
  }
  return out;
}

}  // namespace imot
