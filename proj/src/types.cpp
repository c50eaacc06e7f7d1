#include "imot/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "imot/errors.hpp"

namespace imot {

ImuWindow::ImuWindow(MatrixXd accel, MatrixXd gyro, double dt, double t0,
                     std::optional<std::vector<Quaternion>> orientation)
    : accel_(std::move(accel)), gyro_(std::move(gyro)), dt_(dt), t0_(t0), orientation_(std::move(orientation)) {
  require(accel_.rows() == gyro_.rows() && accel_.cols() == gyro_.cols(), "ImuWindow: accel/gyro shape mismatch");
  require(accel_.cols() > 0, "ImuWindow: empty window");
  require(dt_ > 0.0, "ImuWindow: dt must be positive");
  require(std::abs(static_cast<double>(accel_.cols()) * dt_ - 1.0) <= 1e-9, "ImuWindow: window must span 1 second");
  require(accel_.allFinite() && gyro_.allFinite(), "ImuWindow: non-finite samples");
  if (orientation_) {
    require(static_cast<Index>(orientation_->size()) == accel_.cols(), "ImuWindow: orientation length mismatch");
    for (const auto& q : *orientation_) {
      require(std::abs(q.norm() - 1.0) <= 1e-6, "ImuWindow: orientation quaternion not unit norm");
    }
  }
}

void ParticleSet::check() const {
  require(velocities.allFinite() && content.allFinite() && pos_embed.allFinite(), "ParticleSet: non-finite entries");
  require(content.rows() == velocities.rows() && pos_embed.rows() == velocities.rows(),
          "ParticleSet: particle count mismatch");
}

Trajectory::Trajectory(std::vector<double> times, Matrix2Xd positions)
    : times_(std::move(times)), positions_(std::move(positions)) {
  require(static_cast<Index>(times_.size()) == positions_.rows(), "Trajectory: times/positions length mismatch");
  for (std::size_t i = 1; i < times_.size(); ++i) {
    require(times_[i] > times_[i - 1], "Trajectory: times must be strictly increasing");
  }
}

Eigen::Vector2d Trajectory::at(double t) const {
  require(!empty(), "Trajectory::at on empty trajectory");
  if (t <= times_.front()) return position(0);
  if (t >= times_.back()) return position(size() - 1);
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const Index hi = static_cast<Index>(it - times_.begin());
  const Index lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  return (1.0 - w) * position(lo) + w * position(hi);
}

Trajectory Trajectory::translated(const Eigen::Vector2d& offset) const {
  Matrix2Xd p = positions_.rowwise() + offset.transpose();
  return Trajectory(times_, std::move(p));
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw RuntimeFailure("cannot write " + path);
  }
  out << "t,x,y\n";
  char buf[128];
  for (Index i = 0; i < traj.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", traj.times()[i], traj.positions()(i, 0),
                  traj.positions()(i, 1));
    out << buf;
  }
}

}  // namespace imot
