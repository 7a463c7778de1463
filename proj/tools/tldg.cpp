// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// tldg: synth | train | eval | localize | report

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "tldg/config.hpp"
#include "tldg/error.hpp"
#include "tldg/metrics.hpp"
#include "tldg/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string log_level = "info";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
  cmd->add_option("--preset", f.preset, "Preset to start from")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", f.seed, "Run seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off");
}

tldg::RunConfig resolve(const CommonFlags& f) {
  tldg::ConfigRequest req;
  if (!f.preset.empty()) req.preset = f.preset;
  if (!f.config.empty()) req.file = f.config;
  req.seed = f.seed;
  if (!f.out.empty()) req.out_dir = f.out;
  return tldg::resolve_config(req);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anomalous sound detection with a latent diffusion GAN reconstructor"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic machine-sound corpus");
  add_common(synth, flags);

  auto* train = app.add_subcommand("train", "Train the reconstructor on the train split");
  add_common(train, flags);
  bool resume = false;
  train->add_flag("--resume", resume, "Continue from <out>/model.ckpt");

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Fit detectors, select per machine type, score test");
  add_common(eval, flags);
  eval->add_option("--checkpoint", checkpoint, "Model checkpoint (default <out>/model.ckpt)");

  std::string selector = "label=anomaly,limit=4";
  auto* loc = app.add_subcommand("localize", "Write difference-map triptychs for selected clips");
  add_common(loc, flags);
  loc->add_option("--checkpoint", checkpoint, "Model checkpoint (default <out>/model.ckpt)");
  loc->add_option("--select", selector, "Clip selector, e.g. machine_type=synthetic,label=anomaly,limit=4");

  std::string scores;
  auto* report = app.add_subcommand("report", "Re-render the report from a score table");
  add_common(report, flags);
  report->add_option("--scores", scores, "Score table (default <out>/eval/scores.tsv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  spdlog::set_level(spdlog::level::from_str(flags.log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    const tldg::RunConfig cfg = resolve(flags);
    std::optional<std::filesystem::path> ckpt;
    if (!checkpoint.empty()) ckpt = checkpoint;

    if (synth->parsed()) {
      const auto out = tldg::cmd_synth(cfg);
      std::printf("corpus %s\nmanifest %s\nfingerprint %s\nclips %zu\n",
                  cfg.data.synth_root.string().c_str(), out.manifest_path.string().c_str(),
                  out.manifest.corpus_fingerprint.c_str(), out.manifest.records.size());
    } else if (train->parsed()) {
      tldg::TrainOptions opt;
      opt.resume = resume;
      opt.hooks.on_epoch = [](int epoch, const tldg::LdganModel&) { spdlog::info("epoch {} done", epoch); };
      const auto out = tldg::cmd_train(cfg, opt);
      std::printf("checkpoint %s\nepochs %d\n", out.checkpoint.string().c_str(), out.epochs_done);
      if (!out.history.probe_noise.empty())
        std::printf("probe L_noise %.6f -> %.6f\n", out.history.probe_noise.front(),
                    out.history.probe_noise.back());
    } else if (eval->parsed()) {
      const auto out = tldg::cmd_eval(cfg, ckpt);
      std::cout << tldg::render_report_table(out.report);
    } else if (loc->parsed()) {
      const auto out = tldg::cmd_localize(cfg, selector, ckpt);
      for (std::size_t i = 0; i < out.files.size(); ++i)
        std::printf("%s\t%s\tpeak_frame=%d\n", out.clips[i].c_str(), out.files[i].png.string().c_str(),
                    out.peak_frames[i]);
    } else if (report->parsed()) {
      std::optional<std::filesystem::path> s;
      if (!scores.empty()) s = scores;
      std::cout << tldg::render_report_table(tldg::cmd_report(cfg, s));
    }
  } catch (const tldg::Error& e) {
    std::fprintf(stderr, "tldg: %s\n", e.what());
    return tldg::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tldg: %s\n", e.what());
    return 3;
  }
  return 0;
}
