// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "tldg/error.hpp"

namespace tldg {

namespace {

using json = nlohmann::ordered_json;

struct Field {
  std::string section;
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

[[noreturn]] void bad_value(const Field& f, const std::string& why) {
  fail(Errc::invalid_config, f.section + "." + f.key + ": " + why);
}

template <class T, class Ref>
Field bind(std::string section, std::string key, Ref ref) {
  Field f{std::move(section), std::move(key), {}, {}};
  f.get = [ref](const RunConfig& c) -> json {
    auto& v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, std::filesystem::path>)
      return v.string();
    else
      return v;
  };
  f.set = [ref, f](RunConfig& c, const json& j) {
    auto& v = ref(c);
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) bad_value(f, "expected true or false");
      v = j.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
        bad_value(f, "expected a non-negative integer");
      v = j.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) bad_value(f, "expected an integer");
      v = j.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) bad_value(f, "expected a number");
      v = j.get<T>();
    } else if constexpr (std::is_same_v<T, std::string> || std::is_same_v<T, std::filesystem::path>) {
      if (!j.is_string()) bad_value(f, "expected a string");
      v = j.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!j.is_array()) bad_value(f, "expected an array of integers");
      std::vector<int> out;
      for (const auto& e : j) {
        if (!e.is_number_integer()) bad_value(f, "expected an array of integers");
        out.push_back(e.get<int>());
      }
      v = out;
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    // run
    t.push_back(bind<std::string>("run", "preset", [](RunConfig& c) -> auto& { return c.preset; }));
    t.push_back(bind<std::uint64_t>("run", "seed", [](RunConfig& c) -> auto& { return c.seed; }));
    t.push_back(bind<std::filesystem::path>("run", "out_dir", [](RunConfig& c) -> auto& { return c.out_dir; }));
    // data
    t.push_back(bind<bool>("data", "synthetic", [](RunConfig& c) -> auto& { return c.data.synthetic; }));
    t.push_back(bind<std::filesystem::path>("data", "corpus_root", [](RunConfig& c) -> auto& { return c.data.corpus_root; }));
    t.push_back(bind<std::filesystem::path>("data", "synth_root", [](RunConfig& c) -> auto& { return c.data.synth_root; }));
    t.push_back(bind<double>("data", "validation_fraction", [](RunConfig& c) -> auto& { return c.data.validation_fraction; }));
    t.push_back(bind<int>("data", "machine_types", [](RunConfig& c) -> auto& { return c.data.synth.machine_types; }));
    t.push_back(bind<int>("data", "normals_train", [](RunConfig& c) -> auto& { return c.data.synth.normals_train; }));
    t.push_back(bind<int>("data", "normals_test", [](RunConfig& c) -> auto& { return c.data.synth.normals_test; }));
    t.push_back(bind<int>("data", "anomalies_test", [](RunConfig& c) -> auto& { return c.data.synth.anomalies_test; }));
    t.push_back(bind<double>("data", "duration_s", [](RunConfig& c) -> auto& { return c.data.synth.duration_s; }));
    t.push_back(bind<int>("data", "sample_rate_hz", [](RunConfig& c) -> auto& { return c.data.synth.sample_rate_hz; }));
    {
      Field f{"data", "families", {}, {}};
      f.get = [](const RunConfig& c) {
        json a = json::array();
        for (auto fam : c.data.synth.families) a.push_back(std::string(to_string(fam)));
        return a;
      };
      f.set = [f](RunConfig& c, const json& j) {
        if (!j.is_array() || j.empty()) bad_value(f, "expected a non-empty array of family names");
        std::vector<AnomalyFamily> fams;
        for (const auto& e : j) {
          if (!e.is_string()) bad_value(f, "expected family names");
          try {
            fams.push_back(parse_anomaly_family(e.get<std::string>()));
          } catch (const Error& err) {
            bad_value(f, err.what());
          }
        }
        c.data.synth.families = fams;
      };
      t.push_back(f);
    }
    t.push_back(bind<double>("data", "tonal_shift_ratio", [](RunConfig& c) -> auto& { return c.data.synth.tonal_shift_ratio; }));
    t.push_back(bind<double>("data", "impulse_period_s", [](RunConfig& c) -> auto& { return c.data.synth.impulse_period_s; }));
    t.push_back(bind<double>("data", "impulse_amplitude", [](RunConfig& c) -> auto& { return c.data.synth.impulse_amplitude; }));
    t.push_back(bind<double>("data", "burst_duration_s", [](RunConfig& c) -> auto& { return c.data.synth.burst_duration_s; }));
    t.push_back(bind<double>("data", "burst_level", [](RunConfig& c) -> auto& { return c.data.synth.burst_level; }));
    // features
    t.push_back(bind<int>("features", "sample_rate_hz", [](RunConfig& c) -> auto& { return c.features.sample_rate_hz; }));
    t.push_back(bind<int>("features", "n_fft", [](RunConfig& c) -> auto& { return c.features.n_fft; }));
    t.push_back(bind<int>("features", "hop", [](RunConfig& c) -> auto& { return c.features.hop; }));
    t.push_back(bind<int>("features", "n_mels", [](RunConfig& c) -> auto& { return c.features.n_mels; }));
    t.push_back(bind<double>("features", "fmin_hz", [](RunConfig& c) -> auto& { return c.features.fmin_hz; }));
    t.push_back(bind<double>("features", "fmax_hz", [](RunConfig& c) -> auto& { return c.features.fmax_hz; }));
    t.push_back(bind<double>("features", "clip_duration_s", [](RunConfig& c) -> auto& { return c.features.clip_duration_s; }));
    // tmixup
    t.push_back(bind<bool>("tmixup", "enabled", [](RunConfig& c) -> auto& { return c.tmixup.enabled; }));
    t.push_back(bind<double>("tmixup", "tau_low", [](RunConfig& c) -> auto& { return c.tmixup.tau_low; }));
    t.push_back(bind<double>("tmixup", "tau_high", [](RunConfig& c) -> auto& { return c.tmixup.tau_high; }));
    t.push_back(bind<double>("tmixup", "beta_alpha", [](RunConfig& c) -> auto& { return c.tmixup.beta_alpha; }));
    t.push_back(bind<double>("tmixup", "power_p", [](RunConfig& c) -> auto& { return c.tmixup.power_p; }));
    // ldgan
    t.push_back(bind<int>("ldgan", "d_z", [](RunConfig& c) -> auto& { return c.ldgan.d_z; }));
    t.push_back(bind<std::vector<int>>("ldgan", "enc_channels", [](RunConfig& c) -> auto& { return c.ldgan.enc_channels; }));
    t.push_back(bind<std::vector<int>>("ldgan", "disc_channels", [](RunConfig& c) -> auto& { return c.ldgan.disc_channels; }));
    t.push_back(bind<int>("ldgan", "denoiser_hidden", [](RunConfig& c) -> auto& { return c.ldgan.denoiser_hidden; }));
    t.push_back(bind<int>("ldgan", "time_embed_dim", [](RunConfig& c) -> auto& { return c.ldgan.time_embed_dim; }));
    t.push_back(bind<int>("ldgan", "n_steps", [](RunConfig& c) -> auto& { return c.ldgan.n_steps; }));
    t.push_back(bind<double>("ldgan", "beta_start", [](RunConfig& c) -> auto& { return c.ldgan.beta_start; }));
    t.push_back(bind<double>("ldgan", "beta_end", [](RunConfig& c) -> auto& { return c.ldgan.beta_end; }));
    t.push_back(bind<double>("ldgan", "t0_fraction", [](RunConfig& c) -> auto& { return c.ldgan.t0_fraction; }));
    t.push_back(bind<int>("ldgan", "time_margin", [](RunConfig& c) -> auto& { return c.ldgan.time_margin; }));
    t.push_back(bind<int>("ldgan", "epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    t.push_back(bind<int>("ldgan", "batch", [](RunConfig& c) -> auto& { return c.train.batch; }));
    t.push_back(bind<double>("ldgan", "lr", [](RunConfig& c) -> auto& { return c.train.lr; }));
    t.push_back(bind<double>("ldgan", "disc_lr", [](RunConfig& c) -> auto& { return c.train.disc_lr; }));
    t.push_back(bind<double>("ldgan", "adam_beta1", [](RunConfig& c) -> auto& { return c.train.adam_beta1; }));
    t.push_back(bind<double>("ldgan", "adam_beta2", [](RunConfig& c) -> auto& { return c.train.adam_beta2; }));
    t.push_back(bind<int>("ldgan", "ae_epochs", [](RunConfig& c) -> auto& { return c.train.ae_epochs; }));
    t.push_back(bind<double>("ldgan", "ae_lr", [](RunConfig& c) -> auto& { return c.train.ae_lr; }));
    t.push_back(bind<double>("ldgan", "lambda_stat", [](RunConfig& c) -> auto& { return c.train.lambda_stat; }));
    t.push_back(bind<double>("ldgan", "lambda_gp", [](RunConfig& c) -> auto& { return c.train.lambda_gp; }));
    t.push_back(bind<int>("ldgan", "probe_size", [](RunConfig& c) -> auto& { return c.train.probe_size; }));
    {
      Field f{"ldgan", "score_latent_source", {}, {}};
      f.get = [](const RunConfig& c) { return json(std::string(to_string(c.score_latent_source))); };
      f.set = [f](RunConfig& c, const json& j) {
        if (!j.is_string()) bad_value(f, "expected reencoded or denoised");
        try {
          c.score_latent_source = parse_latent_source(j.get<std::string>());
        } catch (const Error& e) {
          bad_value(f, e.what());
        }
      };
      t.push_back(f);
    }
    // encoders
    t.push_back(bind<std::string>("encoders", "provider", [](RunConfig& c) -> auto& { return c.provider; }));
    // detect
    t.push_back(bind<int>("detect", "knn_k", [](RunConfig& c) -> auto& { return c.detect.knn_k; }));
    t.push_back(bind<int>("detect", "lof_k", [](RunConfig& c) -> auto& { return c.detect.lof_k; }));
    t.push_back(bind<int>("detect", "gmm_components", [](RunConfig& c) -> auto& { return c.detect.gmm.components; }));
    t.push_back(bind<int>("detect", "gmm_max_iter", [](RunConfig& c) -> auto& { return c.detect.gmm.max_iter; }));
    t.push_back(bind<double>("detect", "gmm_tol", [](RunConfig& c) -> auto& { return c.detect.gmm.tol; }));
    t.push_back(bind<double>("detect", "gmm_var_floor", [](RunConfig& c) -> auto& { return c.detect.gmm.var_floor; }));
    t.push_back(bind<double>("detect", "sos_perplexity", [](RunConfig& c) -> auto& { return c.detect.sos_perplexity; }));
    // metrics
    t.push_back(bind<double>("metrics", "p", [](RunConfig& c) -> auto& { return c.p; }));
    return t;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::toupper(ch); });
  return s;
}

json env_value(const Field& f, const json& current, const std::string& text) {
  if (current.is_boolean()) {
    const std::string v = upper(text);
    if (v == "1" || v == "TRUE" || v == "YES" || v == "ON") return true;
    if (v == "0" || v == "FALSE" || v == "NO" || v == "OFF") return false;
    bad_value(f, "environment value '" + text + "' is not a boolean");
  }
  if (current.is_string()) return text;
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    bad_value(f, "environment value '" + text + "' does not parse");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (preset != "paper" && preset != "desk" && preset != "custom")
    fail(Errc::invalid_config, "run.preset must be paper, desk or custom");
  if (!(data.validation_fraction > 0.0 && data.validation_fraction < 1.0))
    fail(Errc::invalid_config, "data.validation_fraction must lie in (0, 1)");
  if (data.synthetic && data.synth_root.empty()) fail(Errc::invalid_config, "data.synth_root is empty");
  if (!data.synthetic && data.corpus_root.empty()) fail(Errc::invalid_config, "data.corpus_root is empty");
  if (out_dir.empty()) fail(Errc::invalid_config, "run.out_dir is empty");
  if (features.n_mels != ldgan.n_mels || features.expected_frames() != ldgan.n_frames)
    fail(Errc::invalid_config, "ldgan spectrogram geometry does not match the feature config");
  if (!(p > 0.0 && p <= 1.0)) fail(Errc::invalid_config, "metrics.p must lie in (0, 1]");
  if (provider.empty()) fail(Errc::invalid_config, "encoders.provider is empty");
  if (detect.knn_k < 1 || detect.lof_k < 2 || detect.gmm.components < 1 || detect.sos_perplexity < 1.0)
    fail(Errc::invalid_config, "detect hyperparameters out of range");
  tmixup.validate();
  ldgan.validate();
  train_config().validate();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.tmixup = tmixup;
  t.seed = seed;
  return t;
}

std::filesystem::path RunConfig::corpus_dir() const {
  return data.synthetic ? data.synth_root : data.corpus_root;
}

namespace {

// Fields that follow from others: model geometry from the features, the
// synth seed from the run seed.
void sync_derived(RunConfig& c) {
  c.ldgan.n_mels = c.features.n_mels;
  c.ldgan.n_frames = c.features.expected_frames();
  c.data.synth.seed = c.seed;
}

}  // namespace

RunConfig preset_config(std::string_view name) {
  RunConfig c;
  c.preset = std::string(name);
  c.seed = 0;
  c.features = FeatureConfig{};
  c.ldgan.n_mels = c.features.n_mels;
  c.ldgan.n_frames = c.features.expected_frames();
  c.ldgan.n_steps = 50;
  c.ldgan.t0_fraction = 0.3;
  c.tmixup = TMixupConfig{};
  c.train.lambda_stat = 1.0;
  c.train.lambda_gp = 10.0;
  c.p = 0.1;
  if (name == "desk") {
    c.out_dir = "runs/desk";
    c.data.synthetic = true;
    c.data.synth_root = "data/synth";
    c.data.synth.machine_types = 3;
    c.data.synth.normals_train = 64;
    c.data.synth.normals_test = 32;
    c.data.synth.anomalies_test = 32;
    c.ldgan.d_z = 64;
    c.train.epochs = 20;
    c.train.batch = 16;
    c.train.lr = 1e-3;
    c.train.disc_lr = 1e-3;
    c.train.ae_epochs = 10;
  } else if (name == "paper") {
    c.out_dir = "runs/paper";
    c.data.synthetic = false;
    c.data.corpus_root = "data/dcase2020";
    c.data.synth_root = "data/synth";
    c.ldgan.d_z = 128;
    c.ldgan.n_steps = 1000;
    c.train.epochs = 150;
    c.train.batch = 512;
    c.train.lr = 1e-4;
    c.train.disc_lr = 1e-4;
    c.train.ae_epochs = 10;
  } else {
    fail(Errc::invalid_config, "unknown preset '" + std::string(name) + "' (expected paper or desk)");
  }
  c.data.synth.seed = c.seed;
  return c;
}

std::string to_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& f : fields()) j[f.section][f.key] = f.get(cfg);
  return j.dump(2) + "\n";
}

RunConfig overlay_json(const RunConfig& base, std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::invalid_config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(Errc::invalid_config, "config must be a JSON object of sections");
  RunConfig out = base;
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) fail(Errc::invalid_config, "config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const Field* f = find_field(section, key);
      if (!f) fail(Errc::invalid_config, "unknown config key " + section + "." + key);
      f->set(out, value);
    }
  }
  sync_derived(out);
  return out;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

RunConfig apply_env_overrides(const RunConfig& base, const EnvLookup& env) {
  RunConfig out = base;
  for (const auto& f : fields()) {
    const auto v = env("TLDG_" + upper(f.section) + "_" + upper(f.key));
    if (!v) continue;
    f.set(out, env_value(f, f.get(out), *v));
  }
  sync_derived(out);
  return out;
}

RunConfig resolve_config(const ConfigRequest& req, const EnvLookup& env) {
  std::string text;
  std::string preset = req.preset.value_or("");
  if (req.file) {
    std::ifstream in(*req.file);
    if (!in) fail(Errc::invalid_config, "cannot read config file " + req.file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
    if (preset.empty()) {
      try {
        const auto doc = json::parse(text);
        if (doc.contains("run") && doc["run"].contains("preset") && doc["run"]["preset"].is_string())
          preset = doc["run"]["preset"].get<std::string>();
      } catch (const json::exception& e) {
        fail(Errc::invalid_config, std::string("config is not valid JSON: ") + e.what());
      }
    }
  }
  if (preset.empty() || preset == "custom") preset = "desk";
  RunConfig cfg = preset_config(preset);
  if (!text.empty()) cfg = overlay_json(cfg, text);
  if (req.preset) cfg.preset = *req.preset;
  cfg = apply_env_overrides(cfg, env);
  if (req.seed) cfg.seed = *req.seed;
  if (req.out_dir) cfg.out_dir = *req.out_dir;
  sync_derived(cfg);
  cfg.validate();
  return cfg;
}

}  // namespace tldg
