// Copyright 2026 The tldg Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tldg/checkpoint.hpp"
#include "tldg/dataio.hpp"
#include "tldg/metrics.hpp"

namespace tldg {

// Declaration order is the selection tie-break order.
enum class ScorerKind { recon, knn, lof, gmm, sos };
inline constexpr ScorerKind kScorerKinds[] = {ScorerKind::recon, ScorerKind::knn, ScorerKind::lof,
                                              ScorerKind::gmm, ScorerKind::sos};
std::string_view to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(std::string_view s);

// Squared Euclidean distance.
double recon_score(const Eigen::VectorXd& z_real, const Eigen::VectorXd& z_rec);

// In all scorers below, training points are the rows of `train` and a higher
// score means more anomalous.

class KnnScorer {
 public:
  KnnScorer(Eigen::MatrixXd train, int k);
  // Mean Euclidean distance to the k nearest training points.
  double score(const Eigen::VectorXd& x) const;
  int k() const { return k_; }
  const Eigen::MatrixXd& train() const { return train_; }

 private:
  Eigen::MatrixXd train_;
  int k_;
};

// Local outlier factor in novelty mode: the query's neighbourhood is taken
// among training points, and training points use their own leave-one-out
// neighbourhoods. Mean reachability distances are floored at `eps` before
// inversion, so duplicate-collapsed neighbourhoods stay finite.
class LofScorer {
 public:
  LofScorer(Eigen::MatrixXd train, int k, double eps = 1e-10);
  double score(const Eigen::VectorXd& x) const;
  const Eigen::VectorXd& k_distance() const { return k_distance_; }
  const Eigen::VectorXd& lrd() const { return lrd_; }

 private:
  Eigen::MatrixXd train_;
  int k_;
  double eps_;
  Eigen::VectorXd k_distance_;
  Eigen::VectorXd lrd_;
};

struct GmmConfig {
  int components = 4;
  int max_iter = 200;
  double tol = 1e-6;  // on the mean log-likelihood
  double var_floor = 1e-6;
  int kmeans_iter = 20;
  std::uint64_t seed = 0;
};

// Diagonal-covariance mixture fitted by EM from a k-means++ start.
class GmmScorer {
 public:
  GmmScorer(const Eigen::MatrixXd& train, const GmmConfig& cfg);
  GmmScorer(Eigen::VectorXd weights, Eigen::MatrixXd means, Eigen::MatrixXd variances);
  // Negative log-likelihood.
  double score(const Eigen::VectorXd& x) const;
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::MatrixXd& means() const { return means_; }          // m x d
  const Eigen::MatrixXd& variances() const { return variances_; }  // m x d
  int iterations() const { return iterations_; }
  int floored_variances() const { return floored_; }
  double mean_log_likelihood() const { return mean_ll_; }

 private:
  Eigen::VectorXd log_joint(const Eigen::VectorXd& x) const;  // log w_j + log N_j(x)
  Eigen::VectorXd weights_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd variances_;
  int iterations_ = 0;
  int floored_ = 0;
  double mean_ll_ = 0.0;
};

// Stochastic outlier selection. Each training point j gets a Gaussian
// affinity precision beta_j such that the perplexity of its binding
// distribution over the other training points equals h. A query q is scored
// as if appended to the data set with every beta_j held fixed:
//   score(q) = prod_j (1 - b_jq),  b_jq = a_jq / (a_jq + sum_{k != j} a_jk),
//   a_jk = exp(-beta_j * ||x_j - x_k||^2).
class SosScorer {
 public:
  SosScorer(Eigen::MatrixXd train, double perplexity);
  double score(const Eigen::VectorXd& x) const;
  const Eigen::VectorXd& betas() const { return betas_; }
  // Outlier probability of each training point within the training set.
  Eigen::VectorXd train_outlier_probability() const;

 private:
  Eigen::MatrixXd train_;
  double perplexity_;
  Eigen::VectorXd betas_;
  Eigen::VectorXd shift_;    // min_{k != j} d_jk^2
  Eigen::VectorXd log_sum_;  // log sum_{k != j} exp(-beta_j (d_jk^2 - shift_j))
};

// Per-dimension z-scoring with train statistics (population std; constant
// dimensions get unit scale).
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  static Standardizer fit(const Eigen::MatrixXd& rows);
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& rows) const;
};

// [Z_mel | Z_wave], each block standardized separately.
struct JointSpace {
  Standardizer mel;
  Standardizer wave;
  static JointSpace fit(const Eigen::MatrixXd& mel_rows, const Eigen::MatrixXd& wave_rows);
  int d_mel() const { return static_cast<int>(mel.mean.size()); }
  int d_wave() const { return static_cast<int>(wave.mean.size()); }
  Eigen::VectorXd join(const Eigen::VectorXd& z_mel, const Eigen::VectorXd& z_wave) const;
  Eigen::MatrixXd join_rows(const Eigen::MatrixXd& mel_rows, const Eigen::MatrixXd& wave_rows) const;
};

struct DetectConfig {
  int knn_k = 5;
  int lof_k = 10;
  double lof_eps = 1e-10;
  GmmConfig gmm;
  double sos_perplexity = 15.0;
};

// The embedding scorers of one machine type. `recon` is always available; it
// is scored from s_r supplied by the caller.
struct FittedDetectors {
  JointSpace space;
  Eigen::MatrixXd train;  // standardized joint rows
  std::optional<KnnScorer> knn;
  std::optional<LofScorer> lof;
  std::optional<GmmScorer> gmm;
  std::optional<SosScorer> sos;
  std::map<ScorerKind, std::string> unavailable;  // kind -> reason

  bool available(ScorerKind kind) const;
  std::vector<ScorerKind> available_kinds() const;
  // `joint` is already standardized.
  double score(ScorerKind kind, const Eigen::VectorXd& joint, double s_r) const;
};

// Scorers whose minimum train size is not met are marked unavailable.
FittedDetectors fit_detectors(const JointSpace& space, const Eigen::MatrixXd& train_joint,
                              const DetectConfig& cfg, std::uint64_t seed);

struct TrainEmbeddings {
  Eigen::MatrixXd mel;   // rows: clips
  Eigen::MatrixXd wave;  // rows: clips
};

std::map<std::string, FittedDetectors> fit_all(
    const std::map<std::string, TrainEmbeddings>& train, const DetectConfig& cfg);

// ---------------------------------------------------------------------------

struct ScorerMetrics {
  double auc = 0.0;
  double pauc = 0.0;
  double m = 0.0;  // (auc + pauc) / 2
};

struct MachineSelection {
  ScorerKind winner = ScorerKind::recon;
  ScorerMetrics metrics;
  std::map<ScorerKind, ScorerMetrics> candidates;
};

struct DetectorSelection {
  std::map<std::string, MachineSelection> by_machine;
  double p = 0.1;
};

struct ValidationSet {
  std::vector<Label> labels;
  std::map<ScorerKind, std::vector<double>> scores;  // available scorers only
};

// Per machine type, argmax of (AUC + pAUC)/2 with ties going to the earlier
// kind in declaration order.
DetectorSelection select(const std::map<std::string, ValidationSet>& validation, double p = 0.1);

std::string selection_json(const DetectorSelection& selection);

struct TestClip {
  std::string clip_path;
  std::string machine_type;
  Label label = Label::unknown;
  Eigen::VectorXd joint;  // standardized
  double s_r = 0.0;
};

ScoreTable score_test(const std::vector<TestClip>& clips, const DetectorSelection& selection,
                      const std::map<std::string, FittedDetectors>& fitted);

// Detector bundle: train rows, standardizers, GMM parameters, SOS precisions
// and the selection, under "det/<machine_type>/...".
void save_detectors(Archive& archive, const std::map<std::string, FittedDetectors>& fitted,
                    const DetectorSelection& selection, const DetectConfig& cfg);

}  // namespace tldg
