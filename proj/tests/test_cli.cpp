#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "imot/config.hpp"
#include "imot/metrics.hpp"
#include "support.hpp"

using namespace imot;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

// Runs the command-line tool, capturing stderr.
Run imot_cli(const std::string& args, const fs::path& scratch) {
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(IMOT_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.P = 4;
  cfg.N = 1;
  cfg.M = 1;
  cfg.batch_size = 8;
  cfg.hidden.ffn = 16;
  cfg.hidden.ape = 8;
  cfg.hidden.particle_pe = 8;
  cfg.hidden.content_scale = 8;
  cfg.hidden.fuse = 8;
  cfg.hidden.refine = 8;
  cfg.train.epochs = 3;
  cfg.train.train_stride = 50;
  return cfg;
}

}  // namespace

TEST_CASE("usage errors exit 1 with usage text") {
  const fs::path dir = testing::scratch_dir("cli_usage");
  Run r = imot_cli("", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("synth") != std::string::npos);
  r = imot_cli("frobnicate", dir);
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  r = imot_cli("synth --bogus 1", dir);
  CHECK(r.code == 1);
  r = imot_cli("baseline --method ekf --data x --out y", dir);
  CHECK(r.code == 1);
  CHECK(imot_cli("--help", dir).code == 0);
}

TEST_CASE("synth then sins baseline on a noiseless straight walk") {
  const fs::path dir = testing::scratch_dir("cli_sins");
  std::ofstream(dir / "profiles.json") << R"([{"kind": "straight", "duration": 10, "gait_freq": 0}])";
  const std::string synth = "synth --profiles " + (dir / "profiles.json").string() + " --out " +
                            (dir / "data").string() + " --rate 200 --seed 3";
  REQUIRE(imot_cli(synth, dir).code == 0);
  const std::string first = slurp(dir / "data" / "seq_000" / "imu.csv");
  REQUIRE(imot_cli(synth, dir).code == 0);
  CHECK(slurp(dir / "data" / "seq_000" / "imu.csv") == first);

  REQUIRE(imot_cli("baseline --method sins --data " + (dir / "data").string() + " --out " + (dir / "out").string(),
                   dir).code == 0);
  const auto rows = read_per_trajectory_csv((dir / "out" / "sins_per_trajectory.csv").string());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].id == "seq_000");
  // PDE times path length is the final-position error.
  CHECK(rows[0].metrics.pde * 10.0 < 1e-2);
  CHECK(fs::exists(dir / "out" / "sins_cdf.csv"));
  CHECK(fs::exists(dir / "out" / "trajectories" / "seq_000_sins.csv"));

  REQUIRE(imot_cli("baseline --method pdr --data " + (dir / "data").string() + " --out " + (dir / "out").string(),
                   dir).code == 0);
  REQUIRE(imot_cli("report --in " + (dir / "out").string() + " --out " + (dir / "agg").string(), dir).code == 0);
  CHECK(fs::exists(dir / "agg" / "pdr_cdf.csv"));
  CHECK(fs::exists(dir / "agg" / "sins_summary.json"));
  CHECK(slurp(dir / "agg" / "summary.json").find("\"sins\"") != std::string::npos);

  const Run missing = imot_cli("baseline --method sins --data " + (dir / "nowhere").string() + " --out " +
                                   (dir / "out2").string(), dir);
  CHECK(missing.code == 1);
}

TEST_CASE("train with zero learning rate, then eval with a rate mismatch") {
  const fs::path dir = testing::scratch_dir("cli_train");
  std::ofstream(dir / "profiles.json")
      << R"([{"kind": "random_walk", "duration": 4, "noise": {"accel_sigma": 0.05}}])";
  REQUIRE(imot_cli("synth --profiles " + (dir / "profiles.json").string() + " --out " + (dir / "d100").string() +
                       " --rate 100 --seed 1", dir).code == 0);
  REQUIRE(imot_cli("synth --profiles " + (dir / "profiles.json").string() + " --out " + (dir / "d200").string() +
                       " --rate 200 --seed 1", dir).code == 0);
  RunConfig cfg = small_config();
  cfg.learning_rate = 0.0;
  save_config(cfg, (dir / "cfg.json").string());
  REQUIRE(imot_cli("train --config " + (dir / "cfg.json").string() + " --data " + (dir / "d100").string() +
                       " --out " + (dir / "run").string(), dir).code == 0);

  std::ifstream log(dir / "run" / "train_log.csv");
  std::string line;
  std::getline(log, line);
  CHECK(line == "step,j_vel,j_ent,lr");
  std::vector<std::string> losses;
  while (std::getline(log, line)) losses.push_back(line.substr(line.find(',') + 1));
  REQUIRE(losses.size() == 3);
  CHECK(losses[0] == losses[1]);
  CHECK(losses[1] == losses[2]);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run" / "run.json"));

  const std::string ckpt = (dir / "run" / "checkpoint.bin").string();
  REQUIRE(imot_cli("eval --checkpoint " + ckpt + " --data " + (dir / "d100").string() + " --out " +
                       (dir / "eval").string(), dir).code == 0);
  CHECK(read_per_trajectory_csv((dir / "eval" / "model_per_trajectory.csv").string()).size() == 1);
  CHECK(fs::exists(dir / "eval" / "sins_per_trajectory.csv"));
  CHECK(fs::exists(dir / "eval" / "pdr_per_trajectory.csv"));

  const Run bad = imot_cli("eval --checkpoint " + ckpt + " --data " + (dir / "d200").string() + " --out " +
                               (dir / "eval2").string(), dir);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("200") != std::string::npos);
  CHECK(bad.err.find("100") != std::string::npos);

  std::ofstream(dir / "bad_cfg.json") << R"({"P": 4, "toggles": {"particles": false, "dsm": true}})";
  const Run invalid = imot_cli("train --config " + (dir / "bad_cfg.json").string() + " --data " +
                                   (dir / "d100").string() + " --out " + (dir / "run2").string(), dir);
  CHECK(invalid.code == 1);
  CHECK(invalid.err.find("dsm requires particles") != std::string::npos);

  std::ofstream(dir / "junk.bin") << "garbage";
  CHECK(imot_cli("eval --checkpoint " + (dir / "junk.bin").string() + " --data " + (dir / "d100").string() +
                     " --out " + (dir / "eval3").string(), dir).code == 1);
}
