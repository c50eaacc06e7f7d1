#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "imot/types.hpp"

namespace imot {

// Metric inputs share timestamps: position i of gt pairs with position i of est.

double ate(const Trajectory& gt, const Trajectory& est);
/// Relative error over a fixed time horizon. Sequences shorter than the
/// horizon are scored on their full span, scaled by t_r / duration.
double t_rte(const Trajectory& gt, const Trajectory& est, double t_r = 60.0);
/// Relative error over the time needed to cover d_r of ground-truth path.
double d_rte(const Trajectory& gt, const Trajectory& est, double d_r = 1.0);
/// Final position error over ground-truth path length.
double pde(const Trajectory& gt, const Trajectory& est);

double path_length(const Trajectory& traj);

/// Estimate interpolated onto `times`.
Trajectory resample(const Trajectory& est, const std::vector<double>& times);

struct MetricSet {
  double ate = 0.0;
  double t_rte = 0.0;
  double d_rte = 0.0;
  double pde = 0.0;
};

/// Restricts gt to the time span of est, resamples est onto those
/// timestamps and computes all four metrics.
MetricSet evaluate_trajectory(const Trajectory& gt, const Trajectory& est);

struct TrajectoryMetrics {
  std::string id;
  MetricSet metrics;
};

struct CdfPoint {
  std::string metric;
  double value = 0.0;
  double cum_fraction = 0.0;
};

inline const std::vector<std::string> kMetricNames = {"ate", "t_rte", "d_rte", "pde"};

double metric_value(const MetricSet& m, const std::string& name);
std::vector<CdfPoint> cdf_table(const std::vector<TrajectoryMetrics>& rows);
/// {"count": n, "<metric>": {"mean": .., "median": ..}, ...}
nlohmann::ordered_json summarize(const std::vector<TrajectoryMetrics>& rows);

void write_per_trajectory_csv(const std::vector<TrajectoryMetrics>& rows, const std::string& path);
std::vector<TrajectoryMetrics> read_per_trajectory_csv(const std::string& path);
void write_cdf_csv(const std::vector<CdfPoint>& points, const std::string& path);

/// Writes <prefix>per_trajectory.csv, <prefix>cdf.csv and <prefix>summary.json.
void write_report(const std::vector<TrajectoryMetrics>& rows, const std::string& dir, const std::string& prefix);

}  // namespace imot
