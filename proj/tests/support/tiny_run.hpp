// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

// A pipeline config small enough to synth, train and eval in seconds.

#pragma once

#include <string>

namespace tldg::testing {

inline std::string tiny_run_json(std::uint64_t seed = 1) {
  return R"({
  "run": {"preset": "desk", "seed": )" +
         std::to_string(seed) + R"(, "out_dir": "runs/tiny"},
  "data": {"synth_root": "data/synth", "machine_types": 2, "normals_train": 8,
           "normals_test": 4, "anomalies_test": 4, "duration_s": 2.0},
  "features": {"n_mels": 32, "clip_duration_s": 2.0},
  "ldgan": {"d_z": 8, "enc_channels": [4, 8], "disc_channels": [4, 8], "denoiser_hidden": 32,
            "time_embed_dim": 8, "n_steps": 10, "epochs": 1, "batch": 4, "ae_epochs": 1,
            "probe_size": 4},
  "detect": {"knn_k": 2, "lof_k": 2, "gmm_components": 1, "sos_perplexity": 2.0}
}
)";
}

}  // namespace tldg::testing
