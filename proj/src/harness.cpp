#include "imot/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "imot/errors.hpp"
#include "imot/odometry.hpp"

namespace imot {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_rate(const RunConfig& cfg, const ImuSequence& seq) {
  if (std::abs(seq.sample_rate - cfg.sample_rate()) > 1e-9) {
    throw ValidationError("sample rate mismatch: model expects " + fmt(cfg.sample_rate()) + " Hz but sequence " +
                          seq.name + " is " + fmt(seq.sample_rate) + " Hz");
  }
}

MatrixXd gather_windows(const WindowSet& set, const std::vector<Index>& idx, Index rows) {
  MatrixXd x(static_cast<Index>(idx.size()) * rows, set.inputs.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    x.middleRows(static_cast<Index>(k) * rows, rows) = set.inputs.middleRows(idx[k] * rows, rows);
  }
  return x;
}

MatrixXd gather_targets(const WindowSet& set, const std::vector<Index>& idx) {
  MatrixXd y(static_cast<Index>(idx.size()), 2);
  for (std::size_t k = 0; k < idx.size(); ++k) y.row(static_cast<Index>(k)) = set.targets.row(idx[k]);
  return y;
}

}  // namespace

Normalization training_normalization(const std::vector<ImuSequence>& seqs) {
  std::vector<ChannelStats> parts;
  for (const auto& s : seqs) parts.push_back(s.stats);
  return Normalization::from_stats(pool_stats(parts));
}

WindowSet make_window_set(const std::vector<ImuSequence>& seqs, const RunConfig& cfg, int stride,
                          const Normalization& norm) {
  const Index rows = 2 * cfg.D;
  std::vector<MatrixXd> blocks;
  std::vector<Eigen::Vector2d> targets;
  for (const auto& seq : seqs) {
    check_rate(cfg, seq);
    for (const auto& w : window_dataset(seq, cfg.T, stride)) {
      MatrixXd x = to_world_frame(w.window);
      norm.apply(x);
      blocks.push_back(std::move(x));
      targets.push_back(w.v_gt);
    }
  }
  WindowSet set;
  set.inputs.resize(static_cast<Index>(blocks.size()) * rows, cfg.T);
  set.targets.resize(static_cast<Index>(targets.size()), 2);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    set.inputs.middleRows(static_cast<Index>(i) * rows, rows) = blocks[i];
    set.targets.row(static_cast<Index>(i)) = targets[i].transpose();
  }
  return set;
}

double velocity_error(const Model& model, const WindowSet& set) {
  if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const MatrixXd pred = model.predict(set.inputs);
  return (pred - set.targets).rowwise().squaredNorm().mean();
}

TrainResult train_windows(const RunConfig& cfg, const Normalization& norm, const WindowSet& train,
                          const WindowSet& val, const StepCallback& on_step) {
  validate_config(cfg);
  require(train.size() > 0, "train: no training windows");
  TrainResult result{Model(cfg, norm), {}, std::numeric_limits<double>::quiet_NaN(), 0};
  Model& model = result.model;
  nn::Adam adam(model.store(), cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const Index n = train.size();
  const Index rows = 2 * cfg.D;
  const Index batch = std::min<Index>(cfg.batch_size, n);
  std::vector<Index> order(static_cast<std::size_t>(n));

  double best = std::numeric_limits<double>::infinity();
  std::vector<MatrixXd> best_params = model.store().values();
  int stale = 0;
  long step = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.train.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index start = 0; start < n; start += batch) {
      std::vector<Index> idx(order.begin() + start, order.begin() + std::min(n, start + batch));
      std::sort(idx.begin(), idx.end());
      nn::Binding p(model.store(), true);
      const LossTerms terms = model.loss(p, gather_windows(train, idx, rows), gather_targets(train, idx));
      if (!std::isfinite(terms.objective.item())) {
        throw RuntimeFailure("training diverged: non-finite loss at step " + std::to_string(step));
      }
      ad::backward(terms.objective);
      std::vector<MatrixXd> grads = p.gradients();
      if (cfg.train.grad_clip > 0.0) nn::clip_global_norm(grads, cfg.train.grad_clip);
      adam.step(model.store(), grads);
      const LogRow row{step, terms.j_vel, terms.j_ent, adam.learning_rate()};
      result.log.push_back(row);
      if (on_step) on_step(row);
      ++step;
      if (cfg.train.max_steps > 0 && step >= cfg.train.max_steps) {
        done = true;
        break;
      }
    }
    result.epochs = epoch + 1;
    adam.set_learning_rate(adam.learning_rate() * cfg.train.lr_decay);
    if (val.size() > 0) {
      const double err = velocity_error(model, val);
      spdlog::info("epoch {} step {} train j_vel {:.6g} val {:.6g}", epoch, step, result.log.back().j_vel, err);
      if (err < best) {
        best = err;
        best_params = model.store().values();
        stale = 0;
      } else if (++stale >= cfg.train.patience) {
        spdlog::info("early stop after {} stale epochs", stale);
        break;
      }
    } else {
      spdlog::info("epoch {} step {} train j_vel {:.6g}", epoch, step, result.log.back().j_vel);
    }
  }
  if (val.size() > 0) {
    model.store().values() = best_params;
    result.best_val = best;
  }
  return result;
}

TrainResult train(const RunConfig& cfg, const std::vector<ImuSequence>& seqs, const StepCallback& on_step) {
  validate_config(cfg);
  require(!seqs.empty(), "train: dataset has no sequences");
  for (const auto& s : seqs) check_rate(cfg, s);
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed ^ 0x51u);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.train.val_fraction * static_cast<double>(seqs.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::vector<ImuSequence> train_seqs;
  std::vector<ImuSequence> val_seqs;
  for (auto i : train_idx) train_seqs.push_back(seqs[i]);
  for (auto i : val_idx) val_seqs.push_back(seqs[i]);

  const Normalization norm = training_normalization(train_seqs);
  const WindowSet train_set = make_window_set(train_seqs, cfg, cfg.train_stride(), norm);
  const WindowSet val_set = make_window_set(val_seqs, cfg, cfg.eval_stride(), norm);
  spdlog::info("training on {} windows from {} sequences, validating on {} windows", train_set.size(),
               train_seqs.size(), val_set.size());
  return train_windows(cfg, norm, train_set, val_set, on_step);
}

void write_training_log(const std::vector<LogRow>& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << "step,j_vel,j_ent,lr\n";
  for (const auto& r : log) out << r.step << ',' << fmt(r.j_vel) << ',' << fmt(r.j_ent) << ',' << fmt(r.lr) << '\n';
}

Trajectory predict_trajectory(const Model& model, const ImuSequence& seq) {
  const RunConfig& cfg = model.config();
  check_rate(cfg, seq);
  const auto windows = window_dataset(seq, cfg.T, cfg.eval_stride());
  require(!windows.empty(), "sequence " + seq.name + " is shorter than one window");
  const Index rows = 2 * cfg.D;
  MatrixXd inputs(static_cast<Index>(windows.size()) * rows, cfg.T);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    inputs.middleRows(static_cast<Index>(i) * rows, rows) = model.prepare(windows[i].window);
  }
  const MatrixXd v = model.predict(inputs);
  std::vector<VelocitySegment> segments;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    segments.push_back({windows[i].window.t0(), v.row(static_cast<Index>(i)).transpose()});
  }
  const double window_duration = static_cast<double>(cfg.T) / seq.sample_rate;
  return integrate_velocities(segments, window_duration, seq.ground_truth.at(segments.front().t0));
}

Baseline baseline_from_string(const std::string& name) {
  if (name == "sins") return Baseline::kSins;
  if (name == "pdr") return Baseline::kPdr;
  throw ValidationError("unknown baseline method \"" + name + "\" (expected sins or pdr)");
}

Trajectory run_baseline(Baseline method, const ImuSequence& seq, const PdrOptions& pdr) {
  const Eigen::Vector2d origin = seq.ground_truth.position(0);
  if (method == Baseline::kPdr) {
    return pdr_reconstruct(seq, pdr).translated(origin);
  }
  // Initial velocity from a one-sided second-order difference of the
  // ground truth; strapdown integration cannot observe it.
  std::optional<Eigen::Vector2d> v0;
  const auto& gt = seq.ground_truth;
  if (gt.size() >= 3) {
    const double h = gt.times()[1] - gt.times()[0];
    v0 = (-3.0 * gt.position(0) + 4.0 * gt.position(1) - gt.position(2)) / (2.0 * h);
  }
  return sins_reconstruct(seq, {0.0, 0.0, kGravity}, v0).translated(origin);
}

std::vector<TrajectoryMetrics> evaluate_baseline(Baseline method, const std::vector<ImuSequence>& seqs,
                                                 const PdrOptions& pdr,
                                                 std::vector<std::pair<std::string, Trajectory>>* tracks) {
  std::vector<TrajectoryMetrics> rows;
  for (const auto& seq : seqs) {
    const Trajectory est = run_baseline(method, seq, pdr);
    rows.push_back({seq.name, evaluate_trajectory(seq.ground_truth, est)});
    if (tracks) tracks->emplace_back(seq.name, est);
  }
  return rows;
}

EvalReport evaluate(const Model& model, const std::vector<ImuSequence>& seqs, bool with_baselines) {
  EvalReport report;
  for (const auto& seq : seqs) check_rate(model.config(), seq);
  for (const auto& seq : seqs) {
    const Trajectory est = predict_trajectory(model, seq);
    report.model.push_back({seq.name, evaluate_trajectory(seq.ground_truth, est)});
    report.trajectories.emplace_back(seq.name, est);
  }
  if (with_baselines) {
    report.sins = evaluate_baseline(Baseline::kSins, seqs, model.config().pdr);
    report.pdr = evaluate_baseline(Baseline::kPdr, seqs, model.config().pdr);
  }
  return report;
}

MetricSet mean_metrics(const std::vector<TrajectoryMetrics>& rows) {
  MetricSet m;
  if (rows.empty()) return m;
  for (const auto& r : rows) {
    m.ate += r.metrics.ate;
    m.t_rte += r.metrics.t_rte;
    m.d_rte += r.metrics.d_rte;
    m.pde += r.metrics.pde;
  }
  const double n = static_cast<double>(rows.size());
  m.ate /= n;
  m.t_rte /= n;
  m.d_rte /= n;
  m.pde /= n;
  return m;
}

std::vector<AblationEntry> load_toggle_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ": cannot open toggle matrix");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  const nlohmann::json& list = doc.is_object() && doc.contains("rows") ? doc.at("rows") : doc;
  require(list.is_array() && !list.empty(), path + ": expected a non-empty list of rows");
  std::vector<AblationEntry> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& row = list[i];
    require(row.is_object(), path + ": row " + std::to_string(i) + " is not an object");
    AblationEntry e;
    e.id = row.contains("id") ? row.at("id").get<std::string>() : std::to_string(i + 1);
    for (const auto& [key, value] : row.items()) {
      if (key == "id") continue;
      require(value.is_boolean(), path + ": row " + e.id + ": \"" + key + "\" must be a boolean");
      const bool v = value.get<bool>();
      if (key == "psd") e.toggles.psd = v;
      else if (key == "asc") e.toggles.asc = v;
      else if (key == "ape") e.toggles.ape = v;
      else if (key == "particles") e.toggles.particles = v;
      else if (key == "dsm") e.toggles.dsm = v;
      else throw ValidationError(path + ": row " + e.id + ": unknown toggle \"" + key + "\"");
    }
    out.push_back(e);
  }
  return out;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::vector<AblationEntry>& matrix,
                                const std::vector<ImuSequence>& train_seqs,
                                const std::vector<ImuSequence>& test_seqs) {
  // Reject the whole matrix up front rather than failing halfway through.
  for (const auto& e : matrix) {
    RunConfig cfg = base;
    cfg.toggles = e.toggles;
    try {
      validate_config(cfg);
    } catch (const ValidationError& err) {
      throw ValidationError("ablation row " + e.id + ": " + err.what());
    }
  }
  std::vector<AblationRow> rows;
  for (const auto& e : matrix) {
    RunConfig cfg = base;
    cfg.toggles = e.toggles;
    spdlog::info("ablation row {}", e.id);
    const TrainResult r = train(cfg, train_seqs);
    const EvalReport report = evaluate(r.model, test_seqs, false);
    rows.push_back({e.id, e.toggles, mean_metrics(report.model), r.model.parameter_count()});
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out << "config_id,psd,asc,ape,particles,dsm,ate,t_rte,d_rte\n";
  const auto b = [](bool v) { return v ? 1 : 0; };
  for (const auto& r : rows) {
    out << r.id << ',' << b(r.toggles.psd) << ',' << b(r.toggles.asc) << ',' << b(r.toggles.ape) << ','
        << b(r.toggles.particles) << ',' << b(r.toggles.dsm) << ',' << fmt(r.mean.ate) << ',' << fmt(r.mean.t_rte)
        << ',' << fmt(r.mean.d_rte) << '\n';
  }
}

}  // namespace imot
