#include <doctest.h>

#include <fstream>

#include "imot/config.hpp"
#include "imot/errors.hpp"
#include "support.hpp"

using namespace imot;

TEST_CASE("defaults are accepted") {
  RunConfig cfg;
  CHECK(cfg.k1 == 9);
  CHECK(cfg.k2 == 3);
  CHECK(cfg.P == 128);
  CHECK(cfg.N == 2);
  CHECK(cfg.M == 2);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.learning_rate == 1e-4);
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("invariant violations are named") {
  const auto message = [](RunConfig cfg) {
    try {
      validate_config(cfg);
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  RunConfig parity;
  parity.k1 = 4;
  parity.k2 = 3;
  CHECK(message(parity).find("parity mismatch") != std::string::npos);

  RunConfig order;
  order.k1 = 3;
  order.k2 = 5;
  CHECK(message(order).find("k2 >= k1") != std::string::npos);

  RunConfig dsm;
  dsm.toggles.particles = false;
  dsm.toggles.dsm = true;
  CHECK(message(dsm).find("dsm requires particles") != std::string::npos);

  RunConfig p0;
  p0.P = 0;
  CHECK_THROWS_AS(validate_config(p0), ValidationError);
  RunConfig n0;
  n0.N = 0;
  CHECK_THROWS_AS(validate_config(n0), ValidationError);
  RunConfig d4;
  d4.D = 4;
  CHECK_THROWS_AS(validate_config(d4), ValidationError);
}

TEST_CASE("json round trip is bitwise stable") {
  RunConfig cfg;
  cfg.T = 200;
  cfg.P = 37;
  cfg.gamma = 1.0 / 3.0;
  cfg.learning_rate = 3.3e-5;
  cfg.seed = 12345678901234ULL;
  cfg.toggles.asc = false;
  cfg.hidden.ffn = 77;
  cfg.paths.train = "a/b";
  const std::string first = dump_config(cfg);
  const RunConfig back = config_from_json(nlohmann::json::parse(first));
  CHECK(back == cfg);
  CHECK(dump_config(back) == first);

  const std::string dir = imot::testing::scratch_dir("config");
  save_config(cfg, dir + "/c.json");
  CHECK(load_config(dir + "/c.json") == cfg);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"Q": 1})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"toggles": {"psdd": true}})")), ValidationError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"T": "many"})")), ValidationError);
  const RunConfig partial = config_from_json(nlohmann::json::parse(R"({"P": 16, "toggles": {"dsm": false}})"));
  CHECK(partial.P == 16);
  CHECK_FALSE(partial.toggles.dsm);
  CHECK(partial.toggles.psd);
}

TEST_CASE("derived widths") {
  RunConfig cfg;
  CHECK(cfg.ffn_width() == 400);
  CHECK(cfg.dsm_width() == 128);
  CHECK(cfg.train_stride() == 10);
  CHECK(cfg.eval_stride() == 100);
  CHECK(cfg.modality_rows() == 9);
  cfg.toggles.psd = false;
  CHECK(cfg.token_rows() == 6);
}
