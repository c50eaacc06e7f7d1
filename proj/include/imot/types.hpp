#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace imot {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Matrix2Xd = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Hamilton quaternions, scalar first (w, x, y, z), rotating body to world.
using Quaternion = Eigen::Quaterniond;

/// One second of body-frame IMU data: rows x/y/z, one column per sample.
class ImuWindow {
 public:
  ImuWindow(MatrixXd accel, MatrixXd gyro, double dt, double t0,
            std::optional<std::vector<Quaternion>> orientation = std::nullopt);

  const MatrixXd& accel() const { return accel_; }
  const MatrixXd& gyro() const { return gyro_; }
  const std::optional<std::vector<Quaternion>>& orientation() const { return orientation_; }
  double dt() const { return dt_; }
  double t0() const { return t0_; }
  Index samples() const { return accel_.cols(); }
  Index channels() const { return accel_.rows(); }

 private:
  MatrixXd accel_;
  MatrixXd gyro_;
  double dt_;
  double t0_;
  std::optional<std::vector<Quaternion>> orientation_;
};

/// Encoder token state for one window. `augmented` and `pos_embed` are
/// ordered per modality: acceleration block first, then gyro, each block
/// being (base, seasonal, trend) when decomposition is enabled.
struct VariateTokens {
  MatrixXd base;      // [2D x T]
  MatrixXd seasonal;  // [2D x T]
  MatrixXd trend;     // [2D x T]
  MatrixXd augmented;
  MatrixXd pos_embed;
};

struct ParticleSet {
  Matrix2Xd velocities;  // [P x 2] m/s
  MatrixXd content;      // [P x T]
  MatrixXd pos_embed;    // [P x T]

  void check() const;
};

/// Timestamped 2-D positions.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> times, Matrix2Xd positions);

  const std::vector<double>& times() const { return times_; }
  const Matrix2Xd& positions() const { return positions_; }
  Index size() const { return static_cast<Index>(times_.size()); }
  bool empty() const { return times_.empty(); }
  Eigen::Vector2d position(Index i) const { return positions_.row(i).transpose(); }
  double duration() const { return empty() ? 0.0 : times_.back() - times_.front(); }

  /// Linear interpolation, clamped to the end points.
  Eigen::Vector2d at(double t) const;
  Trajectory translated(const Eigen::Vector2d& offset) const;

 private:
  std::vector<double> times_;
  Matrix2Xd positions_;
};

/// Writes "t,x,y" with 9 significant digits.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace imot
