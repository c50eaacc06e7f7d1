#include "imot/odometry.hpp"

#include <cmath>
#include <numbers>

#include "imot/errors.hpp"

namespace imot {

Trajectory integrate_velocities(const std::vector<VelocitySegment>& segments, double window_duration,
                                const Eigen::Vector2d& origin) {
  require(window_duration > 0.0, "integrate_velocities: window duration must be positive");
  for (std::size_t i = 1; i < segments.size(); ++i) {
    require(segments[i].t0 > segments[i - 1].t0, "integrate_velocities: segments must be time-ordered");
  }
  const Index n = static_cast<Index>(segments.size());
  std::vector<double> times(static_cast<std::size_t>(n + 1));
  Matrix2Xd pos(n + 1, 2);
  Eigen::Vector2d p = origin;
  const double start = segments.empty() ? 0.0 : segments.front().t0;
  times[0] = start;
  pos.row(0) = p.transpose();
  for (Index k = 0; k < n; ++k) {
    p += segments[static_cast<std::size_t>(k)].velocity * window_duration;
    times[static_cast<std::size_t>(k + 1)] = segments[static_cast<std::size_t>(k)].t0 + window_duration;
    pos.row(k + 1) = p.transpose();
  }
  return Trajectory(std::move(times), std::move(pos));
}

Trajectory sins_reconstruct(const ImuSequence& seq, const Eigen::Vector3d& gravity,
                            const std::optional<Eigen::Vector2d>& initial_velocity) {
  const Index n = seq.samples();
  require(n > 0, "sins_reconstruct: empty sequence");
  require(static_cast<Index>(seq.orientation.size()) == n, "sins_reconstruct: orientation missing for some samples");
  Matrix2Xd pos(n, 2);
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  if (initial_velocity) {
    v.head<2>() = *initial_velocity;
  }
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  const auto world_accel = [&](Index i) -> Eigen::Vector3d {
    return seq.orientation[static_cast<std::size_t>(i)] * Eigen::Vector3d(seq.accel.row(i).transpose()) - gravity;
  };
  Eigen::Vector3d a_prev = world_accel(0);
  pos.row(0) = p.head<2>().transpose();
  for (Index i = 1; i < n; ++i) {
    const double dt = seq.times[static_cast<std::size_t>(i)] - seq.times[static_cast<std::size_t>(i - 1)];
    const Eigen::Vector3d a = world_accel(i);
    const Eigen::Vector3d v_next = v + 0.5 * dt * (a_prev + a);
    p += 0.5 * dt * (v + v_next);
    v = v_next;
    a_prev = a;
    pos.row(i) = p.head<2>().transpose();
  }
  return Trajectory(seq.times, std::move(pos));
}

VectorXd lowpass_filtfilt(const VectorXd& x, double cutoff_hz, double sample_rate) {
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * sample_rate, "lowpass: cutoff must lie below Nyquist");
  // Bilinear-transform biquad.
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double q = std::numbers::sqrt2;
  const double norm = 1.0 / (1.0 + q * k + k * k);
  const double b0 = k * k * norm;
  const double b1 = 2.0 * b0;
  const double b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - q * k + k * k) * norm;

  const Index n = x.size();
  if (n < 2) return x;
  // Odd reflection at both ends limits start-up transients.
  const Index pad = std::min<Index>(n - 1, 9);
  VectorXd ext(n + 2 * pad);
  for (Index i = 0; i < pad; ++i) {
    ext(i) = 2.0 * x(0) - x(pad - i);
    ext(n + pad + i) = 2.0 * x(n - 1) - x(n - 2 - i);
  }
  ext.segment(pad, n) = x;

  const auto run = [&](VectorXd& s) {
    // Initial state matching a steady input equal to the first sample.
    double x1 = s(0);
    double x2 = s(0);
    double y1 = s(0);
    double y2 = s(0);
    for (Index i = 0; i < s.size(); ++i) {
      const double xi = s(i);
      const double yi = b0 * xi + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = xi;
      y2 = y1;
      y1 = yi;
      s(i) = yi;
    }
  };
  run(ext);
  ext.reverseInPlace();
  run(ext);
  ext.reverseInPlace();
  return ext.segment(pad, n);
}

double yaw_of(const Quaternion& q) {
  const Eigen::Vector3d fwd = q * Eigen::Vector3d::UnitX();
  if (std::hypot(fwd.x(), fwd.y()) < 1e-9) {
    const Eigen::Vector3d side = q * Eigen::Vector3d::UnitY();
    return std::atan2(side.y(), side.x()) - std::numbers::pi / 2.0;
  }
  return std::atan2(fwd.y(), fwd.x());
}

std::vector<Index> detect_steps(const ImuSequence& seq, const PdrOptions& opt) {
  const Index n = seq.samples();
  std::vector<Index> steps;
  if (n < 3) return steps;
  VectorXd mag(n);
  for (Index i = 0; i < n; ++i) mag(i) = seq.accel.row(i).norm();
  const VectorXd f = lowpass_filtfilt(mag, opt.cutoff_hz, seq.sample_rate);

  std::vector<Index> peaks;
  for (Index i = 1; i + 1 < n; ++i) {
    if (f(i) > f(i - 1) && f(i) >= f(i + 1)) peaks.push_back(i);
  }
  // Prominence: height above the higher of the two minima reached before
  // meeting a taller sample (or the signal edge) on either side.
  std::vector<Index> prominent;
  for (Index p : peaks) {
    double left_min = f(p);
    for (Index j = p - 1; j >= 0 && f(j) <= f(p); --j) left_min = std::min(left_min, f(j));
    double right_min = f(p);
    for (Index j = p + 1; j < n && f(j) <= f(p); ++j) right_min = std::min(right_min, f(j));
    if (f(p) - std::max(left_min, right_min) >= opt.min_prominence) prominent.push_back(p);
  }
  // Greedy minimum spacing, taller peaks first.
  const Index gap = static_cast<Index>(std::ceil(opt.min_step_interval * seq.sample_rate - 1e-9));
  std::vector<Index> order(prominent.begin(), prominent.end());
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return f(a) > f(b); });
  for (Index p : order) {
    bool ok = true;
    for (Index s : steps) {
      if (std::abs(s - p) < gap) {
        ok = false;
        break;
      }
    }
    if (ok) steps.push_back(p);
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

Trajectory pdr_reconstruct(const ImuSequence& seq, const PdrOptions& opt) {
  require(seq.samples() > 0, "pdr_reconstruct: empty sequence");
  require(static_cast<Index>(seq.orientation.size()) == seq.samples(), "pdr_reconstruct: orientation missing");
  const std::vector<Index> steps = detect_steps(seq, opt);
  std::vector<double> times{seq.times.front()};
  Matrix2Xd pos = Matrix2Xd::Zero(static_cast<Index>(steps.size()) + 1, 2);
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Index i = steps[k];
    const double yaw = yaw_of(seq.orientation[static_cast<std::size_t>(i)]);
    p += opt.stride_length * Eigen::Vector2d(std::cos(yaw), std::sin(yaw));
    double t = seq.times[static_cast<std::size_t>(i)];
    if (t <= times.back()) t = std::nextafter(times.back(), 1e300);
    times.push_back(t);
    pos.row(static_cast<Index>(k) + 1) = p.transpose();
  }
  // Hold the last position until the sequence ends.
  if (seq.times.back() > times.back()) {
    times.push_back(seq.times.back());
    pos.conservativeResize(pos.rows() + 1, Eigen::NoChange);
    pos.row(pos.rows() - 1) = p.transpose();
  }
  return Trajectory(std::move(times), std::move(pos));
}

}  // namespace imot
