#include "imot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "imot/errors.hpp"

namespace imot {

namespace {

void check_pair(const Trajectory& gt, const Trajectory& est) {
  require(!gt.empty() && !est.empty(), "metrics: empty trajectory");
  require(gt.size() == est.size(), "metrics: trajectories differ in length (" + std::to_string(gt.size()) + " vs " +
                                       std::to_string(est.size()) + ")");
}

double rmse_of(double sum_sq, Index n) { return n > 0 ? std::sqrt(sum_sq / static_cast<double>(n)) : 0.0; }

double relative_error(const Trajectory& gt, const Trajectory& est, Index i, Index j) {
  const Eigen::Vector2d dg = gt.position(j) - gt.position(i);
  const Eigen::Vector2d de = est.position(j) - est.position(i);
  return (dg - de).norm();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double ate(const Trajectory& gt, const Trajectory& est) {
  check_pair(gt, est);
  const double ss = (gt.positions() - est.positions()).rowwise().squaredNorm().sum();
  return rmse_of(ss, gt.size());
}

double t_rte(const Trajectory& gt, const Trajectory& est, double t_r) {
  check_pair(gt, est);
  require(t_r > 0.0, "t_rte: horizon must be positive");
  const auto& t = gt.times();
  const Index n = gt.size();
  double ss = 0.0;
  Index count = 0;
  Index j = 0;
  for (Index i = 0; i < n; ++i) {
    const double target = t[static_cast<std::size_t>(i)] + t_r - 1e-9;
    j = std::max(j, i);
    while (j < n && t[static_cast<std::size_t>(j)] < target) ++j;
    if (j >= n) break;
    const double e = relative_error(gt, est, i, j);
    ss += e * e;
    ++count;
  }
  if (count > 0) return rmse_of(ss, count);
  const double span = gt.duration();
  if (span <= 0.0) return 0.0;
  return relative_error(gt, est, 0, n - 1) * t_r / span;
}

double path_length(const Trajectory& traj) {
  double len = 0.0;
  for (Index i = 1; i < traj.size(); ++i) len += (traj.position(i) - traj.position(i - 1)).norm();
  return len;
}

double d_rte(const Trajectory& gt, const Trajectory& est, double d_r) {
  check_pair(gt, est);
  require(d_r > 0.0, "d_rte: distance must be positive");
  const Index n = gt.size();
  std::vector<double> arc(static_cast<std::size_t>(n), 0.0);
  for (Index i = 1; i < n; ++i) {
    arc[static_cast<std::size_t>(i)] = arc[static_cast<std::size_t>(i - 1)] + (gt.position(i) - gt.position(i - 1)).norm();
  }
  const double total = arc.back();
  require(total > 0.0, "d_rte: ground truth has zero path length");
  double ss = 0.0;
  Index count = 0;
  Index j = 0;
  for (Index i = 0; i < n; ++i) {
    j = std::max(j, i + 1);
    while (j < n && arc[static_cast<std::size_t>(j)] - arc[static_cast<std::size_t>(i)] < d_r) ++j;
    if (j >= n) break;
    const double e = relative_error(gt, est, i, j);
    ss += e * e;
    ++count;
  }
  if (count > 0) return rmse_of(ss, count);
  return relative_error(gt, est, 0, n - 1) * d_r / total;
}

double pde(const Trajectory& gt, const Trajectory& est) {
  check_pair(gt, est);
  const double len = path_length(gt);
  require(len > 0.0, "pde: ground truth has zero path length");
  return (gt.position(gt.size() - 1) - est.position(est.size() - 1)).norm() / len;
}

Trajectory resample(const Trajectory& est, const std::vector<double>& times) {
  Matrix2Xd pos(static_cast<Index>(times.size()), 2);
  for (std::size_t i = 0; i < times.size(); ++i) {
    pos.row(static_cast<Index>(i)) = est.at(times[i]).transpose();
  }
  return Trajectory(times, std::move(pos));
}

MetricSet evaluate_trajectory(const Trajectory& gt, const Trajectory& est) {
  require(!gt.empty() && !est.empty(), "evaluate_trajectory: empty trajectory");
  const double lo = est.times().front() - 1e-9;
  const double hi = est.times().back() + 1e-9;
  std::vector<double> times;
  std::vector<Index> keep;
  for (Index i = 0; i < gt.size(); ++i) {
    const double t = gt.times()[static_cast<std::size_t>(i)];
    if (t >= lo && t <= hi) {
      times.push_back(t);
      keep.push_back(i);
    }
  }
  require(!keep.empty(), "evaluate_trajectory: estimate does not overlap the ground truth");
  Matrix2Xd g(static_cast<Index>(keep.size()), 2);
  for (std::size_t k = 0; k < keep.size(); ++k) g.row(static_cast<Index>(k)) = gt.positions().row(keep[k]);
  const Trajectory gt_span(times, std::move(g));
  const Trajectory est_span = resample(est, times);
  MetricSet m;
  m.ate = ate(gt_span, est_span);
  m.t_rte = t_rte(gt_span, est_span);
  m.d_rte = d_rte(gt_span, est_span);
  m.pde = pde(gt_span, est_span);
  return m;
}

double metric_value(const MetricSet& m, const std::string& name) {
  if (name == "ate") return m.ate;
  if (name == "t_rte") return m.t_rte;
  if (name == "d_rte") return m.d_rte;
  if (name == "pde") return m.pde;
  throw ValidationError("unknown metric " + name);
}

std::vector<CdfPoint> cdf_table(const std::vector<TrajectoryMetrics>& rows) {
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(rows.size());
  for (const auto& name : kMetricNames) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(metric_value(r.metrics, name));
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back({name, v[i], static_cast<double>(i + 1) / n});
    }
  }
  return out;
}

nlohmann::ordered_json summarize(const std::vector<TrajectoryMetrics>& rows) {
  nlohmann::ordered_json j;
  j["count"] = rows.size();
  for (const auto& name : kMetricNames) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(metric_value(r.metrics, name));
    if (v.empty()) {
      j[name] = {{"mean", nullptr}, {"median", nullptr}};
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    const double median = v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    j[name] = {{"mean", sum / static_cast<double>(v.size())}, {"median", median}};
  }
  return j;
}

void write_per_trajectory_csv(const std::vector<TrajectoryMetrics>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << "traj_id,ate,t_rte,d_rte,pde\n";
  for (const auto& r : rows) {
    out << r.id << ',' << fmt(r.metrics.ate) << ',' << fmt(r.metrics.t_rte) << ',' << fmt(r.metrics.d_rte) << ','
        << fmt(r.metrics.pde) << '\n';
  }
}

std::vector<TrajectoryMetrics> read_per_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open file");
  std::string line;
  if (!std::getline(in, line) || line != "traj_id,ate,t_rte,d_rte,pde") {
    throw ValidationError(path + ":1: malformed header");
  }
  std::vector<TrajectoryMetrics> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 5 fields");
    TrajectoryMetrics r;
    r.id = cells[0];
    try {
      r.metrics = {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])};
    } catch (const std::exception&) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": invalid number");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_cdf_csv(const std::vector<CdfPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << "metric,value,cum_fraction\n";
  for (const auto& p : points) out << p.metric << ',' << fmt(p.value) << ',' << fmt(p.cum_fraction) << '\n';
}

void write_report(const std::vector<TrajectoryMetrics>& rows, const std::string& dir, const std::string& prefix) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_per_trajectory_csv(rows, (fs::path(dir) / (prefix + "per_trajectory.csv")).string());
  write_cdf_csv(cdf_table(rows), (fs::path(dir) / (prefix + "cdf.csv")).string());
  std::ofstream out(fs::path(dir) / (prefix + "summary.json"), std::ios::binary | std::ios::trunc);
  out << summarize(rows).dump(2) << '\n';
}

}  // namespace imot
