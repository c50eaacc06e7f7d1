#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include <json.hpp>

namespace imot {

struct Toggles {
  bool psd = true;
  bool asc = true;
  bool ape = true;
  bool particles = true;
  bool dsm = true;

  bool operator==(const Toggles&) const = default;
};

/// Widths of the internal MLPs. Zero means "derive from T / P", see the
/// accessors on RunConfig.
struct HiddenWidths {
  int ffn = 0;            // 4T
  int ape = 0;            // T
  int particle_pe = 0;    // T
  int content_scale = 0;  // T
  int fuse = 0;           // T
  int refine = 0;         // T
  int dsm = 0;            // P

  bool operator==(const HiddenWidths&) const = default;
};

struct TrainOptions {
  int epochs = 50;
  int max_steps = 0;     // 0: no step cap
  int train_stride = 0;  // 0: T/10
  int eval_stride = 0;   // 0: T
  double val_fraction = 0.1;
  int patience = 10;
  double grad_clip = 1.0;  // global-norm clip, 0 disables
  double lr_decay = 1.0;   // learning rate multiplier applied after each epoch

  bool operator==(const TrainOptions&) const = default;
};

struct PdrOptions {
  double stride_length = 0.67;
  double cutoff_hz = 4.0;
  double min_step_interval = 0.3;
  double min_prominence = 0.5;

  bool operator==(const PdrOptions&) const = default;
};

struct DataPaths {
  std::string train;
  std::string test;

  bool operator==(const DataPaths&) const = default;
};

struct RunConfig {
  int T = 100;
  int D = 3;
  int P = 128;
  int N = 2;
  int M = 2;
  int k1 = 9;
  int k2 = 3;
  double gamma = 2.0;
  double learning_rate = 1e-4;
  int batch_size = 128;
  int heads = 4;
  double velocity_pe_scale = 10.0;
  bool legacy_normalized_weights = false;
  std::uint64_t seed = 0;
  Toggles toggles;
  HiddenWidths hidden;
  TrainOptions train;
  PdrOptions pdr;
  DataPaths paths;

  bool operator==(const RunConfig&) const = default;

  int ffn_width() const { return hidden.ffn > 0 ? hidden.ffn : 4 * T; }
  int ape_width() const { return hidden.ape > 0 ? hidden.ape : T; }
  int particle_pe_width() const { return hidden.particle_pe > 0 ? hidden.particle_pe : T; }
  int content_scale_width() const { return hidden.content_scale > 0 ? hidden.content_scale : T; }
  int fuse_width() const { return hidden.fuse > 0 ? hidden.fuse : T; }
  int refine_width() const { return hidden.refine > 0 ? hidden.refine : T; }
  int dsm_width() const { return hidden.dsm > 0 ? hidden.dsm : P; }
  int train_stride() const { return train.train_stride > 0 ? train.train_stride : std::max(1, T / 10); }
  int eval_stride() const { return train.eval_stride > 0 ? train.eval_stride : T; }

  /// Token rows per modality: 3D with the decoupler on, D without.
  int modality_rows() const { return toggles.psd ? 3 * D : D; }
  int token_rows() const { return 2 * modality_rows(); }
  /// Sample rate implied by T (windows span one second).
  double sample_rate() const { return static_cast<double>(T); }
};

/// Returns cfg unchanged, or throws ValidationError naming the first
/// violated invariant.
const RunConfig& validate_config(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunConfig& cfg);
/// Unknown keys are rejected. Missing keys keep their defaults.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);
std::string dump_config(const RunConfig& cfg);

}  // namespace imot
