#include "imot/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "imot/errors.hpp"

namespace imot {

namespace {

// Pulls known keys out of an object and rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    require(obj_.is_object(), where_ + ": expected a JSON object");
  }

  template <typename V>
  void read(const char* key, V& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) {
      return;
    }
    try {
      out = it->template get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ValidationError(where_ + ": unknown key \"" + it.key() + "\"");
      }
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

const RunConfig& validate_config(const RunConfig& cfg) {
  require(cfg.D == 3, "D must be 3");
  require(cfg.T >= 2, "T must be at least 2");
  require(cfg.k1 >= 1 && cfg.k2 >= 1, "moving-average orders must be >= 1");
  require(cfg.k2 < cfg.k1, "k2 >= k1: k2 must be less than k1");
  require(cfg.k1 % 2 == cfg.k2 % 2, "parity mismatch: k1 and k2 must both be odd or both even");
  require(cfg.k1 <= cfg.T, "k1 > T: moving-average order exceeds token length");
  require(cfg.P >= 1, "P must be >= 1");
  require(cfg.N >= 1, "N (encoder layers) must be >= 1");
  require(cfg.M >= 1, "M (decoder layers) must be >= 1");
  require(cfg.heads >= 1 && cfg.T % cfg.heads == 0, "T must be divisible by heads");
  require(cfg.gamma >= 0.0, "gamma must be >= 0");
  require(cfg.learning_rate >= 0.0, "learning_rate must be >= 0");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(!(cfg.toggles.dsm && !cfg.toggles.particles), "dsm requires particles");
  require(!cfg.toggles.particles || cfg.T % 2 == 0, "T must be even when particles are enabled");
  require(cfg.train.val_fraction >= 0.0 && cfg.train.val_fraction < 1.0, "val_fraction must be in [0, 1)");
  require(cfg.train.epochs >= 0 && cfg.train.max_steps >= 0, "epochs and max_steps must be >= 0");
  require(cfg.train.grad_clip >= 0.0, "grad_clip must be >= 0");
  require(cfg.train.lr_decay > 0.0 && cfg.train.lr_decay <= 1.0, "lr_decay must be in (0, 1]");
  require(cfg.pdr.stride_length > 0.0 && cfg.pdr.cutoff_hz > 0.0, "pdr stride and cutoff must be > 0");
  return cfg;
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["T"] = cfg.T;
  j["D"] = cfg.D;
  j["P"] = cfg.P;
  j["N"] = cfg.N;
  j["M"] = cfg.M;
  j["k1"] = cfg.k1;
  j["k2"] = cfg.k2;
  j["gamma"] = cfg.gamma;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["heads"] = cfg.heads;
  j["velocity_pe_scale"] = cfg.velocity_pe_scale;
  j["legacy_normalized_weights"] = cfg.legacy_normalized_weights;
  j["seed"] = cfg.seed;
  j["toggles"] = {{"psd", cfg.toggles.psd},
                  {"asc", cfg.toggles.asc},
                  {"ape", cfg.toggles.ape},
                  {"particles", cfg.toggles.particles},
                  {"dsm", cfg.toggles.dsm}};
  j["hidden"] = {{"ffn", cfg.hidden.ffn},
                 {"ape", cfg.hidden.ape},
                 {"particle_pe", cfg.hidden.particle_pe},
                 {"content_scale", cfg.hidden.content_scale},
                 {"fuse", cfg.hidden.fuse},
                 {"refine", cfg.hidden.refine},
                 {"dsm", cfg.hidden.dsm}};
  j["train"] = {{"epochs", cfg.train.epochs},
                {"max_steps", cfg.train.max_steps},
                {"train_stride", cfg.train.train_stride},
                {"eval_stride", cfg.train.eval_stride},
                {"val_fraction", cfg.train.val_fraction},
                {"patience", cfg.train.patience},
                {"grad_clip", cfg.train.grad_clip},
                {"lr_decay", cfg.train.lr_decay}};
  j["pdr"] = {{"stride_length", cfg.pdr.stride_length},
              {"cutoff_hz", cfg.pdr.cutoff_hz},
              {"min_step_interval", cfg.pdr.min_step_interval},
              {"min_prominence", cfg.pdr.min_prominence}};
  j["paths"] = {{"train", cfg.paths.train}, {"test", cfg.paths.test}};
  return j;
}

RunConfig config_from_json(const nlohmann::json& doc) {
  RunConfig cfg;
  ObjectReader r(doc, "config");
  r.read("T", cfg.T);
  r.read("D", cfg.D);
  r.read("P", cfg.P);
  r.read("N", cfg.N);
  r.read("M", cfg.M);
  r.read("k1", cfg.k1);
  r.read("k2", cfg.k2);
  r.read("gamma", cfg.gamma);
  r.read("learning_rate", cfg.learning_rate);
  r.read("batch_size", cfg.batch_size);
  r.read("heads", cfg.heads);
  r.read("velocity_pe_scale", cfg.velocity_pe_scale);
  r.read("legacy_normalized_weights", cfg.legacy_normalized_weights);
  r.read("seed", cfg.seed);
  if (const auto* t = r.child("toggles")) {
    ObjectReader tr(*t, "config.toggles");
    tr.read("psd", cfg.toggles.psd);
    tr.read("asc", cfg.toggles.asc);
    tr.read("ape", cfg.toggles.ape);
    tr.read("particles", cfg.toggles.particles);
    tr.read("dsm", cfg.toggles.dsm);
    tr.finish();
  }
  if (const auto* h = r.child("hidden")) {
    ObjectReader hr(*h, "config.hidden");
    hr.read("ffn", cfg.hidden.ffn);
    hr.read("ape", cfg.hidden.ape);
    hr.read("particle_pe", cfg.hidden.particle_pe);
    hr.read("content_scale", cfg.hidden.content_scale);
    hr.read("fuse", cfg.hidden.fuse);
    hr.read("refine", cfg.hidden.refine);
    hr.read("dsm", cfg.hidden.dsm);
    hr.finish();
  }
  if (const auto* t = r.child("train")) {
    ObjectReader tr(*t, "config.train");
    tr.read("epochs", cfg.train.epochs);
    tr.read("max_steps", cfg.train.max_steps);
    tr.read("train_stride", cfg.train.train_stride);
    tr.read("eval_stride", cfg.train.eval_stride);
    tr.read("val_fraction", cfg.train.val_fraction);
    tr.read("patience", cfg.train.patience);
    tr.read("grad_clip", cfg.train.grad_clip);
    tr.read("lr_decay", cfg.train.lr_decay);
    tr.finish();
  }
  if (const auto* p = r.child("pdr")) {
    ObjectReader pr(*p, "config.pdr");
    pr.read("stride_length", cfg.pdr.stride_length);
    pr.read("cutoff_hz", cfg.pdr.cutoff_hz);
    pr.read("min_step_interval", cfg.pdr.min_step_interval);
    pr.read("min_prominence", cfg.pdr.min_prominence);
    pr.finish();
  }
  if (const auto* p = r.child("paths")) {
    ObjectReader pr(*p, "config.paths");
    pr.read("train", cfg.paths.train);
    pr.read("test", cfg.paths.test);
    pr.finish();
  }
  r.finish();
  return cfg;
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw RuntimeFailure("cannot write " + path);
  }
  out << dump_config(cfg);
}

}  // namespace imot
