#pragma once

#include <optional>
#include <vector>

#include "imot/config.hpp"
#include "imot/data.hpp"
#include "imot/types.hpp"

namespace imot {

struct VelocitySegment {
  double t0 = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
};

/// Positions at window boundaries: the k-th point is the origin plus the
/// sum of the first k segment displacements.
Trajectory integrate_velocities(const std::vector<VelocitySegment>& segments, double window_duration,
                                const Eigen::Vector2d& origin);

/// Strapdown dead reckoning: rotate specific force to the world frame,
/// remove gravity and double-integrate with the trapezoidal rule.
Trajectory sins_reconstruct(const ImuSequence& seq, const Eigen::Vector3d& gravity = {0.0, 0.0, kGravity},
                            const std::optional<Eigen::Vector2d>& initial_velocity = std::nullopt);

/// Indices of detected steps in the sequence.
std::vector<Index> detect_steps(const ImuSequence& seq, const PdrOptions& opt);

/// Step-and-heading dead reckoning. Points are emitted at the start, at
/// every detected step and at the end of the sequence.
Trajectory pdr_reconstruct(const ImuSequence& seq, const PdrOptions& opt = {});

/// Second-order Butterworth low-pass, run forward and backward.
VectorXd lowpass_filtfilt(const VectorXd& x, double cutoff_hz, double sample_rate);

/// Yaw of the body-to-world rotation about world z.
double yaw_of(const Quaternion& q);

}  // namespace imot
