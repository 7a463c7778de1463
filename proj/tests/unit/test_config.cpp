// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <map>

#include <doctest.h>

#include "tldg/config.hpp"
#include "tldg/error.hpp"

using namespace tldg;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup no_env = env_of({});

}  // namespace

TEST_CASE("presets") {
  const auto paper = preset_config("paper");
  CHECK(paper.train.lr == 1e-4);
  CHECK(paper.train.batch == 512);
  CHECK(paper.train.epochs == 150);
  CHECK(paper.ldgan.n_steps == 1000);
  CHECK_FALSE(paper.data.synthetic);
  CHECK(paper.ldgan.n_mels == 128);
  CHECK(paper.ldgan.n_frames == 313);
  CHECK_NOTHROW(paper.validate());

  const auto desk = preset_config("desk");
  CHECK(desk.data.synthetic);
  CHECK(desk.data.synth.machine_types == 3);
  CHECK(desk.data.synth.normals_train == 64);
  CHECK_NOTHROW(desk.validate());
  CHECK_THROWS_AS(preset_config("laptop"), Error);
}

TEST_CASE("json round trip and overlay") {
  const auto desk = preset_config("desk");
  const auto back = overlay_json(preset_config("paper"), to_json(desk));
  CHECK(to_json(back) == to_json(desk));

  const auto c = overlay_json(desk, R"({"ldgan": {"epochs": 3}, "features": {"n_mels": 32, "clip_duration_s": 2.0}})");
  CHECK(c.train.epochs == 3);
  CHECK(c.ldgan.n_mels == 32);
  CHECK(c.ldgan.n_frames == 63);
  CHECK_NOTHROW(c.validate());

  try {
    overlay_json(desk, R"({"ldgan": {"epoch": 3}})");
    FAIL("expected invalid_config");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_config);
    CHECK(std::string(e.what()).find("ldgan.epoch") != std::string::npos);
  }
  CHECK_THROWS_AS(overlay_json(desk, R"({"ldgan": {"epochs": "three"}})"), Error);
  CHECK_THROWS_AS(overlay_json(desk, "{not json"), Error);
}

TEST_CASE("environment overrides") {
  const auto c = apply_env_overrides(preset_config("desk"),
                                     env_of({{"TLDG_LDGAN_BATCH", "8"}, {"TLDG_METRICS_P", "0.2"},
                                             {"TLDG_TMIXUP_ENABLED", "false"}}));
  CHECK(c.train.batch == 8);
  CHECK(c.p == 0.2);
  CHECK_FALSE(c.tmixup.enabled);
  CHECK_THROWS_AS(apply_env_overrides(preset_config("desk"), env_of({{"TLDG_LDGAN_BATCH", "x"}})), Error);
}

TEST_CASE("resolution order") {
  const auto file = std::filesystem::temp_directory_path() / "tldg_config_test.json";
  std::ofstream(file) << R"({"run": {"preset": "desk", "seed": 5}, "ldgan": {"batch": 4, "epochs": 2}})";
  ConfigRequest req;
  req.file = file;
  auto c = resolve_config(req, env_of({{"TLDG_LDGAN_BATCH", "6"}}));
  CHECK(c.seed == 5);
  CHECK(c.train.epochs == 2);
  CHECK(c.train.batch == 6);
  CHECK(c.data.synth.seed == 5);
  req.seed = 9;
  req.out_dir = "elsewhere";
  c = resolve_config(req, no_env);
  CHECK(c.seed == 9);
  CHECK(c.data.synth.seed == 9);
  CHECK(c.out_dir == "elsewhere");
  CHECK(c.train.batch == 4);
  std::filesystem::remove(file);

  ConfigRequest missing;
  missing.file = "/nonexistent/tldg.json";
  CHECK_THROWS_AS(resolve_config(missing, no_env), Error);
}

TEST_CASE("validation") {
  auto c = preset_config("desk");
  c.p = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = preset_config("desk");
  c.train.batch = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = preset_config("desk");
  c.data.validation_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = preset_config("desk");
  c.ldgan.n_mels = 64;
  CHECK_THROWS_AS(c.validate(), Error);
}
