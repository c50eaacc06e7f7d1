#include "imot/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "imot/data.hpp"
#include "imot/errors.hpp"
#include "imot/harness.hpp"
#include "imot/log.hpp"
#include "imot/metrics.hpp"
#include "imot/model.hpp"

namespace imot {

namespace fs = std::filesystem;

namespace {

// A dataset directory may hold train/ and test/ splits.
std::vector<ImuSequence> load_split(const std::string& dir, const char* split) {
  const fs::path sub = fs::path(dir) / split;
  if (fs::is_directory(sub)) return load_dataset(sub.string());
  return load_dataset(dir);
}

void write_tracks(const std::vector<std::pair<std::string, Trajectory>>& tracks, const std::string& out,
                  const std::string& suffix) {
  const fs::path dir = fs::path(out) / "trajectories";
  fs::create_directories(dir);
  for (const auto& [name, traj] : tracks) {
    write_trajectory_csv(traj, (dir / (name + "_" + suffix + ".csv")).string());
  }
}

void write_json(const nlohmann::ordered_json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int cmd_synth(const std::string& profiles, const std::string& out, double rate, std::uint64_t seed) {
  const auto list = load_profiles(profiles);
  fs::create_directories(out);
  const auto names = generate_synthetic(list, rate, seed, out);
  spdlog::info("wrote {} sequences to {}", names.size(), out);
  return 0;
}

int cmd_train(const std::string& config, const std::string& data, const std::string& out) {
  const RunConfig cfg = validate_config(load_config(config));
  const auto seqs = load_split(data, "train");
  fs::create_directories(out);
  const TrainResult r = train(cfg, seqs);
  save_checkpoint(r.model, (fs::path(out) / "checkpoint.bin").string());
  write_training_log(r.log, (fs::path(out) / "train_log.csv").string());
  save_config(cfg, (fs::path(out) / "config.json").string());
  nlohmann::ordered_json info;
  info["parameters"] = r.model.parameter_count();
  info["steps"] = r.log.size();
  info["epochs"] = r.epochs;
  if (std::isfinite(r.best_val)) info["best_val_j_vel"] = r.best_val;
  write_json(info, fs::path(out) / "run.json");
  spdlog::info("trained {} steps, {} parameters", r.log.size(), r.model.parameter_count());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out) {
  const Model model = load_checkpoint(checkpoint);
  const auto seqs = load_split(data, "test");
  fs::create_directories(out);
  const EvalReport report = evaluate(model, seqs, true);
  write_report(report.model, out, "model_");
  write_report(report.sins, out, "sins_");
  write_report(report.pdr, out, "pdr_");
  write_tracks(report.trajectories, out, "model");
  return 0;
}

int cmd_baseline(const std::string& method, const std::string& data, const std::string& out,
                 const std::string& config) {
  const Baseline b = baseline_from_string(method);
  const RunConfig cfg = config.empty() ? RunConfig{} : validate_config(load_config(config));
  const auto seqs = load_split(data, "test");
  fs::create_directories(out);
  std::vector<std::pair<std::string, Trajectory>> tracks;
  const auto rows = evaluate_baseline(b, seqs, cfg.pdr, &tracks);
  write_report(rows, out, method + "_");
  write_tracks(tracks, out, method);
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& matrix, const std::string& data,
               const std::string& out) {
  const RunConfig cfg = validate_config(load_config(config));
  const auto rows = load_toggle_matrix(matrix);
  const auto train_seqs = load_split(data, "train");
  const auto test_seqs = load_split(data, "test");
  fs::create_directories(out);
  const auto table = ablate(cfg, rows, train_seqs, test_seqs);
  write_ablation_csv(table, (fs::path(out) / "ablation.csv").string());
  return 0;
}

int cmd_report(const std::string& in, const std::string& out) {
  require(fs::is_directory(in), in + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in)) {
    const std::string name = e.path().filename().string();
    const std::string tag = "per_trajectory.csv";
    if (e.is_regular_file() && name.size() >= tag.size() && name.compare(name.size() - tag.size(), tag.size(), tag) == 0) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  fs::create_directories(out);
  nlohmann::ordered_json all = nlohmann::ordered_json::object();
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const std::string prefix = name.substr(0, name.size() - std::string("per_trajectory.csv").size());
    const auto rows = read_per_trajectory_csv(f.string());
    write_report(rows, out, prefix);
    all[prefix.empty() ? "default" : prefix.substr(0, prefix.size() - (prefix.back() == '_' ? 1 : 0))] =
        summarize(rows);
  }
  write_json(all, fs::path(out) / "summary.json");
  spdlog::info("aggregated {} report files", files.size());
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  init_logging();
  CLI::App app{"Inertial odometry with a motion transformer"};
  app.require_subcommand(1);

  std::string profiles, out, data, config, checkpoint, method, matrix, in;
  double rate = 100.0;
  std::uint64_t seed = 0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--profiles", profiles, "Motion profile JSON")->required();
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--rate", rate, "Sample rate in Hz")->check(CLI::IsMember({100.0, 200.0}));
  synth->add_option("--seed", seed, "Random seed");

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", config, "Run config JSON")->required();
  train_cmd->add_option("--data", data, "Dataset directory")->required();
  train_cmd->add_option("--out", out, "Output directory")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", data, "Dataset directory")->required();
  eval_cmd->add_option("--out", out, "Output directory")->required();

  auto* base_cmd = app.add_subcommand("baseline", "Run a classical baseline");
  base_cmd->add_option("--method", method, "sins or pdr")->required()->check(CLI::IsMember({"sins", "pdr"}));
  base_cmd->add_option("--data", data, "Dataset directory")->required();
  base_cmd->add_option("--out", out, "Output directory")->required();
  base_cmd->add_option("--config", config, "Optional run config for PDR parameters");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a toggle matrix");
  ablate_cmd->add_option("--config", config, "Base run config JSON")->required();
  ablate_cmd->add_option("--matrix", matrix, "Toggle matrix JSON")->required();
  ablate_cmd->add_option("--data", data, "Dataset directory")->required();
  ablate_cmd->add_option("--out", out, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Aggregate per-trajectory CSVs");
  report_cmd->add_option("--in", in, "Directory with *per_trajectory.csv files")->required();
  report_cmd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*synth) return cmd_synth(profiles, out, rate, seed);
    if (*train_cmd) return cmd_train(config, data, out);
    if (*eval_cmd) return cmd_eval(checkpoint, data, out);
    if (*base_cmd) return cmd_baseline(method, data, out, config);
    if (*ablate_cmd) return cmd_ablate(config, matrix, data, out);
    if (*report_cmd) return cmd_report(in, out);
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}

}  // namespace imot
