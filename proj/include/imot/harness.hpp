#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "imot/config.hpp"
#include "imot/data.hpp"
#include "imot/metrics.hpp"
#include "imot/model.hpp"

namespace imot {

/// Prepared windows: inputs [n*2D x T] normalized world-frame tokens,
/// targets [n x 2] ground-truth velocities.
struct WindowSet {
  MatrixXd inputs;
  MatrixXd targets;

  Index size() const { return targets.rows(); }
};

Normalization training_normalization(const std::vector<ImuSequence>& seqs);
WindowSet make_window_set(const std::vector<ImuSequence>& seqs, const RunConfig& cfg, int stride,
                          const Normalization& norm);

struct LogRow {
  long step = 0;
  double j_vel = 0.0;
  double j_ent = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<LogRow> log;
  double best_val = 0.0;  // validation J_vel of the kept parameters; NaN without validation
  int epochs = 0;
};

using StepCallback = std::function<void(const LogRow&)>;

/// Adam on prepared windows. Keeps the parameters with the best
/// validation error when `val` is non-empty, otherwise the final ones.
TrainResult train_windows(const RunConfig& cfg, const Normalization& norm, const WindowSet& train,
                          const WindowSet& val, const StepCallback& on_step = {});
/// Splits sequences into train/validation by sequence and trains.
TrainResult train(const RunConfig& cfg, const std::vector<ImuSequence>& seqs, const StepCallback& on_step = {});

/// Mean squared velocity error of test-time predictions.
double velocity_error(const Model& model, const WindowSet& set);

void write_training_log(const std::vector<LogRow>& log, const std::string& path);

/// Windows the sequence (stride = eval stride), predicts velocities and
/// integrates them from the ground-truth start position.
Trajectory predict_trajectory(const Model& model, const ImuSequence& seq);

enum class Baseline { kSins, kPdr };
Baseline baseline_from_string(const std::string& name);
Trajectory run_baseline(Baseline method, const ImuSequence& seq, const PdrOptions& pdr);

struct EvalReport {
  std::vector<TrajectoryMetrics> model;
  std::vector<TrajectoryMetrics> sins;
  std::vector<TrajectoryMetrics> pdr;
  std::vector<std::pair<std::string, Trajectory>> trajectories;
};

EvalReport evaluate(const Model& model, const std::vector<ImuSequence>& seqs, bool with_baselines = true);
std::vector<TrajectoryMetrics> evaluate_baseline(Baseline method, const std::vector<ImuSequence>& seqs,
                                                 const PdrOptions& pdr,
                                                 std::vector<std::pair<std::string, Trajectory>>* tracks = nullptr);

struct AblationEntry {
  std::string id;
  Toggles toggles;
};

struct AblationRow {
  std::string id;
  Toggles toggles;
  MetricSet mean;
  std::size_t parameters = 0;
};

/// {"rows": [{"id": "i", "psd": false, ...}, ...]} or a bare array.
std::vector<AblationEntry> load_toggle_matrix(const std::string& path);
std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<AblationEntry>& matrix,
                                const std::vector<ImuSequence>& train_seqs,
                                const std::vector<ImuSequence>& test_seqs);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

MetricSet mean_metrics(const std::vector<TrajectoryMetrics>& rows);

}  // namespace imot
