// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tldg/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tldg/checkpoint.hpp"
#include "tldg/encoders.hpp"
#include "tldg/error.hpp"
#include "tldg/hash.hpp"

namespace tldg {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  out << text;
  if (!out) fail(Errc::io_error, "cannot write " + path.string());
}

std::string relative_clip_path(const ClipRecord& r, const fs::path& root) {
  const fs::path abs = fs::weakly_canonical(fs::absolute(r.path));
  const fs::path base = fs::weakly_canonical(fs::absolute(root));
  const fs::path rel = abs.lexically_relative(base);
  if (rel.empty() || *rel.begin() == "..") return abs.generic_string();
  return rel.generic_string();
}

LdganModel load_model(const fs::path& checkpoint) {
  if (!fs::exists(checkpoint))
    fail(Errc::invalid_state, "no checkpoint at " + checkpoint.string() + " (run train first)");
  LdganModel model = LdganModel::load(read_archive(checkpoint));
  if (!model.trained()) fail(Errc::invalid_state, "checkpoint " + checkpoint.string() + " is not trained");
  return model;
}

void check_geometry(const RunConfig& cfg, const LdganModel& model) {
  const auto& mc = model.config();
  if (mc.n_mels != cfg.features.n_mels || mc.n_frames != cfg.features.expected_frames())
    fail(Errc::invalid_config, "checkpoint spectrogram geometry does not match the feature config");
}

std::unique_ptr<FeatureCache> make_cache(const RunConfig& cfg) {
  return std::make_unique<FeatureCache>(RunLayout(cfg.out_dir).feature_cache(), cfg.features);
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return m;
}

}  // namespace

std::uint64_t clip_noise_seed(std::uint64_t run_seed, const std::string& relative_path) {
  Fnv1a h;
  h.update_u64(run_seed);
  h.update(relative_path);
  return h.digest();
}

std::string report_config_echo(const RunConfig& cfg) {
  auto j = nlohmann::ordered_json::parse(to_json(cfg));
  j["run"].erase("out_dir");
  return j.dump();
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_config:
    case Errc::invalid_spec:
      return 2;
    case Errc::numeric_failure:
      return 4;
    default:
      return 3;
  }
}

// ---------------------------------------------------------------------------

SynthOutcome cmd_synth(const RunConfig& cfg) {
  const fs::path root = cfg.data.synth_root;
  const fs::path parent = root.has_parent_path() ? root.parent_path() : fs::path(".");
  fs::create_directories(parent);
  const fs::path tmp = parent / (root.filename().string() + ".partial");
  fs::remove_all(tmp);
  try {
    Manifest m = generate_synthetic_corpus(cfg.data.synth, tmp);
    assign_validation(m, cfg.data.validation_fraction, cfg.seed);
    check_manifest(m);
    write_manifest(tmp / "manifest.tsv", m);
    fs::remove_all(root);
    fs::rename(tmp, root);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  SynthOutcome out;
  out.manifest_path = root / "manifest.tsv";
  out.manifest = read_manifest(out.manifest_path);
  return out;
}

Manifest load_corpus(const RunConfig& cfg) {
  if (cfg.data.synthetic) {
    const fs::path mp = cfg.data.synth_root / "manifest.tsv";
    if (!fs::exists(mp))
      fail(Errc::corpus_not_found, "no synthetic corpus at " + cfg.data.synth_root.string() +
                                       " (run synth first)");
    Manifest m = read_manifest(mp);
    check_manifest(m);
    return m;
  }
  if (!fs::is_directory(cfg.data.corpus_root))
    fail(Errc::corpus_not_found, "DCASE corpus not found at " + cfg.data.corpus_root.string());
  ScanOptions opt;
  opt.validation_fraction = cfg.data.validation_fraction;
  opt.seed = cfg.seed;
  opt.sample_rate_hz = cfg.features.sample_rate_hz;
  std::vector<ScanWarning> warnings;
  Manifest m = scan_dcase_corpus(cfg.data.corpus_root, opt, &warnings);
  for (const auto& w : warnings) spdlog::warn("{}: {}", w.path.string(), w.reason);
  assign_validation(m, cfg.data.validation_fraction, cfg.seed);
  check_manifest(m);
  return m;
}

Waveform clip_waveform(const ClipRecord& record, const FeatureConfig& features) {
  Waveform w = load_waveform(record);
  if (w.sample_rate_hz != features.sample_rate_hz) w = resample(w, features.sample_rate_hz);
  fit_length(w, features.clip_samples());
  return w;
}

LogMelSpec clip_features(const ClipRecord& record, const LogMelExtractor& extractor,
                         const FeatureCache* cache) {
  std::string fp;
  LogMelSpec spec;
  if (cache) {
    fp = clip_fingerprint(record.path);
    if (cache->load(fp, spec)) return spec;
  }
  spec = extractor.compute(clip_waveform(record, extractor.config()));
  if (cache) cache->store(fp, spec);
  return spec;
}

// ---------------------------------------------------------------------------

TrainOutcome cmd_train(const RunConfig& cfg, const TrainOptions& options) {
  const RunLayout layout(cfg.out_dir);
  const Manifest manifest = load_corpus(cfg);
  fs::create_directories(layout.root);
  write_text(layout.resolved_config(), to_json(cfg));

  const LogMelExtractor extractor(cfg.features);
  const auto cache = make_cache(cfg);
  std::vector<Eigen::MatrixXd> specs;
  for (const auto& r : manifest.records)
    if (r.split == Split::train) specs.push_back(clip_features(r, extractor, cache.get()).values);
  if (specs.size() < 2) fail(Errc::invalid_corpus, "need at least two training clips");
  spdlog::info("training on {} clips ({} mels x {} frames)", specs.size(), specs.front().rows(),
               specs.front().cols());

  TrainConfig tc = cfg.train_config();
  tc.metrics_log = layout.metrics_log();
  tc.diagnostics_dir = layout.diagnostics();

  std::optional<Archive> resume;
  if (options.resume) {
    if (!fs::exists(layout.checkpoint()))
      fail(Errc::invalid_state, "nothing to resume at " + layout.checkpoint().string());
    resume = read_archive(layout.checkpoint());
  }
  TrainResult result = train(specs, cfg.ldgan, tc, options.hooks, resume ? &*resume : nullptr);

  Archive a;
  save_training(a, result, tc);
  a.set_meta("run.config", to_json(cfg));
  a.set_meta("corpus.fingerprint", manifest.corpus_fingerprint);
  write_archive(layout.checkpoint(), a);
  spdlog::info("checkpoint written to {}", layout.checkpoint().string());
  return {layout.checkpoint(), std::move(result.history), result.epochs_done};
}

// ---------------------------------------------------------------------------

EvalOutcome cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& checkpoint) {
  const RunLayout layout(cfg.out_dir);
  const Manifest manifest = load_corpus(cfg);
  const LdganModel model = load_model(checkpoint.value_or(layout.checkpoint()));
  check_geometry(cfg, model);
  fs::create_directories(layout.eval_dir());
  write_text(layout.resolved_config(), to_json(cfg));

  const auto provider = make_provider(cfg.provider, cfg.seed);
  const LogMelExtractor extractor(cfg.features);
  const auto cache = make_cache(cfg);
  const fs::path root = cfg.corpus_dir();

  struct ClipData {
    const ClipRecord* record;
    std::string rel;
    Eigen::MatrixXd spec;
    Eigen::VectorXd wave_emb;
  };
  std::map<std::string, std::map<Split, std::vector<ClipData>>> by_machine;
  for (const auto& r : manifest.records) {
    ClipData d;
    d.record = &r;
    d.rel = relative_clip_path(r, root);
    const Waveform w = clip_waveform(r, cfg.features);
    d.spec = clip_features(r, extractor, cache.get()).values;
    d.wave_emb = provider->embed(w, clip_fingerprint(r.path)).values;
    by_machine[r.machine_type][r.split].push_back(std::move(d));
  }

  // Train embeddings per machine type.
  std::map<std::string, TrainEmbeddings> train_emb;
  for (auto& [machine, splits] : by_machine) {
    auto& tr = splits[Split::train];
    if (tr.empty()) fail(Errc::invalid_corpus, "machine type " + machine + " has no train clips");
    std::vector<Eigen::MatrixXd> specs;
    std::vector<Eigen::VectorXd> waves;
    for (auto& d : tr) {
      specs.push_back(d.spec);
      waves.push_back(d.wave_emb);
    }
    train_emb[machine] = {stack_rows(model.encode_specs(specs)), stack_rows(waves)};
  }
  const auto fitted = fit_all(train_emb, cfg.detect);

  // Validation and test: reconstruction plus joint embedding.
  auto prepare = [&](const std::string& machine, std::vector<ClipData>& clips) {
    std::vector<Eigen::MatrixXd> specs;
    std::vector<std::uint64_t> seeds;
    for (auto& d : clips) {
      specs.push_back(d.spec);
      seeds.push_back(clip_noise_seed(cfg.seed, d.rel));
    }
    std::vector<TestClip> out;
    if (specs.empty()) return out;
    const auto recs = model.reconstruct(specs, seeds);
    const auto& f = fitted.at(machine);
    for (std::size_t i = 0; i < clips.size(); ++i) {
      TestClip t;
      t.clip_path = clips[i].rel;
      t.machine_type = machine;
      t.label = clips[i].record->label;
      t.joint = f.space.join(recs[i].z_real, clips[i].wave_emb);
      t.s_r = recon_score(recs[i].z_real, recs[i].z_rec(cfg.score_latent_source));
      out.push_back(std::move(t));
    }
    return out;
  };

  EvalOutcome outcome;
  std::map<std::string, ValidationSet> validation;
  std::vector<TestClip> test_clips;
  for (auto& [machine, splits] : by_machine) {
    const auto& f = fitted.at(machine);
    const auto val = prepare(machine, splits[Split::validation]);
    ValidationSet vs;
    for (const auto& t : val) vs.labels.push_back(t.label);
    for (auto kind : f.available_kinds()) {
      auto& col = vs.scores[kind];
      for (const auto& t : val) {
        col.push_back(f.score(kind, t.joint, t.s_r));
        outcome.validation_scores.push_back(
            {t.clip_path, machine, t.label, std::string(to_string(kind)), col.back()});
      }
    }
    validation.emplace(machine, std::move(vs));
    auto test = prepare(machine, splits[Split::test]);
    std::move(test.begin(), test.end(), std::back_inserter(test_clips));
  }
  outcome.selection = select(validation, cfg.p);
  for (const auto& [machine, ms] : outcome.selection.by_machine)
    spdlog::info("{}: selected {} (validation AUC {:.4f}, pAUC {:.4f})", machine, to_string(ms.winner),
                 ms.metrics.auc, ms.metrics.pauc);
  outcome.test_scores = score_test(test_clips, outcome.selection, fitted);
  outcome.report = build_report(outcome.test_scores, cfg.p, report_config_echo(cfg));

  write_score_table(layout.scores(), outcome.test_scores);
  write_score_table(layout.validation_scores(), outcome.validation_scores);
  write_text(layout.selection(), selection_json(outcome.selection));
  write_report(outcome.report, layout.eval_dir());
  Archive bundle;
  save_detectors(bundle, fitted, outcome.selection, cfg.detect);
  write_archive(layout.detectors(), bundle);
  return outcome;
}

// ---------------------------------------------------------------------------

ClipSelector parse_selector(std::string_view text) {
  ClipSelector sel;
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail(Errc::invalid_config, "selector term '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "machine_type") {
      sel.machine_type = value;
    } else if (key == "label") {
      sel.label = parse_label(value);
    } else if (key == "split") {
      sel.split = parse_split(value);
    } else if (key == "machine_id") {
      sel.machine_id = value;
    } else if (key == "limit") {
      int n = 0;
      const auto r = std::from_chars(value.data(), value.data() + value.size(), n);
      if (r.ec != std::errc() || r.ptr != value.data() + value.size() || n < 1)
        fail(Errc::invalid_config, "selector limit must be a positive integer");
      sel.limit = n;
    } else {
      fail(Errc::invalid_config, "unknown selector key '" + key + "'");
    }
  }
  return sel;
}

std::vector<const ClipRecord*> select_clips(const Manifest& manifest, const ClipSelector& sel) {
  std::vector<const ClipRecord*> out;
  const Split split = sel.split.value_or(Split::test);
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    if (sel.machine_type && r.machine_type != *sel.machine_type &&
        !r.machine_type.starts_with(*sel.machine_type + "-"))
      continue;
    if (sel.label && r.label != *sel.label) continue;
    if (sel.machine_id && r.machine_id != *sel.machine_id) continue;
    out.push_back(&r);
    if (sel.limit > 0 && static_cast<int>(out.size()) == sel.limit) break;
  }
  return out;
}

LocalizeOutcome cmd_localize(const RunConfig& cfg, const std::string& selector,
                             const std::optional<fs::path>& checkpoint) {
  const RunLayout layout(cfg.out_dir);
  const ClipSelector sel = parse_selector(selector);
  const Manifest manifest = load_corpus(cfg);
  const auto clips = select_clips(manifest, sel);
  if (clips.empty()) fail(Errc::invalid_input, "no clips match selector '" + selector + "'");
  const LdganModel model = load_model(checkpoint.value_or(layout.checkpoint()));
  check_geometry(cfg, model);
  const LogMelExtractor extractor(cfg.features);
  const auto cache = make_cache(cfg);
  const fs::path root = cfg.corpus_dir();

  LocalizeOutcome out;
  for (const ClipRecord* r : clips) {
    const std::string rel = relative_clip_path(*r, root);
    const LogMelSpec spec = clip_features(*r, extractor, cache.get());
    const LocalizationResult res = localize(spec, model, clip_noise_seed(cfg.seed, rel), rel);
    const std::string stem = r->machine_type + "_" + r->path.stem().string();
    out.files.push_back(render(res, layout.localize_dir(), stem));
    out.clips.push_back(rel);
    out.peak_frames.push_back(peak_frame(res.difference));
  }
  return out;
}

EvalReport cmd_report(const RunConfig& cfg, const std::optional<fs::path>& scores) {
  const RunLayout layout(cfg.out_dir);
  const ScoreTable table = read_score_table(scores.value_or(layout.scores()));
  EvalReport rep = build_report(table, cfg.p, report_config_echo(cfg));
  write_report(rep, layout.eval_dir());
  return rep;
}

}  // namespace tldg
