#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "imot/types.hpp"

namespace imot {

enum class ProfileKind { kStraight, kArc, kUTurn, kStopGo, kFigureEight, kRandomWalk };

std::string to_string(ProfileKind kind);
ProfileKind profile_kind_from_string(const std::string& name);

struct NoiseModel {
  double accel_sigma = 0.0;  // m/s^2, white, per axis
  double gyro_sigma = 0.0;   // rad/s
  double accel_bias = 0.0;   // m/s^2, constant per axis with random sign
  double gyro_bias = 0.0;    // rad/s
};

struct MotionProfile {
  ProfileKind kind = ProfileKind::kStraight;
  std::string name;  // directory name; derived from the index when empty
  double duration = 10.0;
  double speed = 1.0;
  double acceleration = 0.0;  // straight only: speed(t) = speed + acceleration * t
  double turn_rate = 0.0;
  double gait_freq = 2.0;  // 0 disables the gait
  double gait_bounce = 1.5;     // vertical acceleration amplitude at nominal speed, m/s^2
  double gait_surge = 0.1;      // relative forward speed oscillation
  double heading = 0.0;         // initial yaw of the walking direction, rad
  std::array<double, 3> mount{0.0, 0.0, 0.0};  // roll, pitch, yaw of the device on the body
  NoiseModel noise;

  void check() const;
};

MotionProfile profile_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const MotionProfile& p);
/// Accepts either a JSON array or an object with a "profiles" array.
std::vector<MotionProfile> load_profiles(const std::string& path);

/// Per-channel statistics of world-frame IMU samples (ax, ay, az, gx, gy, gz).
struct ChannelStats {
  std::int64_t count = 0;
  std::array<double, 6> mean{};
  std::array<double, 6> stddev{};
};

ChannelStats pool_stats(const std::vector<ChannelStats>& parts);

/// Per-channel standardization applied to world-frame windows.
struct Normalization {
  std::array<double, 6> mean{0, 0, 0, 0, 0, 0};
  std::array<double, 6> stddev{1, 1, 1, 1, 1, 1};

  static Normalization from_stats(const ChannelStats& stats);
  nlohmann::ordered_json to_json() const;
  static Normalization from_json(const nlohmann::json& doc);
  /// tokens: [2D x T] with D = 3, accel rows then gyro rows; in place.
  void apply(MatrixXd& tokens) const;
  bool operator==(const Normalization&) const = default;
};

struct ImuSequence {
  std::string name;
  double sample_rate = 100.0;
  std::vector<double> times;
  MatrixXd accel;  // [n x 3] body frame, m/s^2
  MatrixXd gyro;   // [n x 3] body frame, rad/s
  std::vector<Quaternion> orientation;
  Trajectory ground_truth;
  nlohmann::json profile;
  ChannelStats stats;

  Index samples() const { return static_cast<Index>(times.size()); }
  double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

inline constexpr double kGravity = 9.81;
inline constexpr int kFormatVersion = 1;

/// Builds one noisy synthetic sequence in memory.
ImuSequence synthesize(const MotionProfile& profile, double sample_rate, std::uint64_t seed);

/// Writes every profile as a sequence directory under `out_dir`.
/// Returns the sequence names in order.
std::vector<std::string> generate_synthetic(const std::vector<MotionProfile>& profiles, double sample_rate,
                                            std::uint64_t seed, const std::string& out_dir);

void write_sequence(const ImuSequence& seq, const std::string& dir);
ImuSequence load_sequence(const std::string& dir);
/// Loads every sequence directory (containing manifest.json) under `path`,
/// sorted by name. `path` may itself be a sequence directory.
std::vector<ImuSequence> load_dataset(const std::string& path);

/// World-frame statistics of one sequence.
ChannelStats compute_stats(const ImuSequence& seq);

struct WindowSample {
  ImuWindow window;
  Eigen::Vector2d v_gt;
};

/// Sliding windows of T samples; v_gt is the mean ground-truth velocity
/// over the window in the world frame.
std::vector<WindowSample> window_dataset(const ImuSequence& seq, int T, int stride);

/// Rotates a window into the gravity-aligned world frame: [2D x T] with
/// world acceleration rows over world angular-rate rows.
MatrixXd to_world_frame(const ImuWindow& window);

}  // namespace imot
