#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmfusion/classifiers.hpp"
#include "mmfusion/config.hpp"
#include "mmfusion/dataset.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/vae.hpp"

namespace mmfusion {

/// Substreams of a run seed used to draw latents when latent_mode=sample.
inline constexpr std::uint64_t kTrainLatentStream = 301;
inline constexpr std::uint64_t kEvalLatentStream = 302;

/// Per-dimension z-scoring fitted on a training matrix. Inactive (empty)
/// normalizers leave features untouched.
struct FeatureNormalizer {
  std::vector<double> mean;
  std::vector<double> inv_std;

  bool active() const { return !mean.empty(); }
  /// Dimensions with zero spread are centred but not scaled.
  static FeatureNormalizer fit(const Matrix& features);
  void apply(Matrix& features) const;
};

/// D x N batch of concatenated features, one column per record.
Matrix feature_matrix(const std::vector<UtteranceRecord>& records, const ModalityDims& dims);
std::vector<int> record_labels(const std::vector<UtteranceRecord>& records);

/// What turns raw concatenated features into classifier inputs.
///
/// For vae/ae the output is the encoder's posterior mean (or a sample);
/// for concat it is the (optionally normalized) concatenation itself.
struct FusionModel {
  FusionKind kind = FusionKind::kConcat;
  FeatureNormalizer normalizer;
  VaeModel vae;

  std::size_t output_dim(const ModalityDims& dims) const;
  /// Normalizes a copy of `raw` and maps it to the fused space.
  Matrix fuse(const Matrix& raw, LatentMode mode = LatentMode::kMean, Rng* rng = nullptr) const;

  /// VAE parameters plus "norm.mean" / "norm.inv_std" when normalizing.
  void save(const std::filesystem::path& path);
  static FusionModel load(const std::filesystem::path& path, const ModalityDims& dims,
                          FusionKind kind);
};

struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::kLr;
  LrClassifier lr;
  BiLstmClassifier lstm;

  void collect(ParamStore& store);
  /// Labels aligned with the columns of `fused`; bc-LSTM runs once per video.
  std::vector<int> predict(const Matrix& fused, const std::vector<VideoGroup>& videos) const;

  void save(const std::filesystem::path& path);
  static ClassifierModel load(const std::filesystem::path& path, ClassifierKind kind,
                              std::size_t input_dim, int classes);
};

struct FusionTrainResult {
  FusionModel fusion;
  /// Epoch means of the negative ELBO (AE: reconstruction loss, KL 0).
  std::vector<ElboBreakdown> trace;
};

/// Unsupervised fusion training on shuffled utterance batches. Concat
/// fusion only fits the normalizer. Throws TrainingError on a non-finite
/// loss, carrying the 1-based epoch and batch.
FusionTrainResult train_fusion(const TrainConfig& config, const Matrix& raw_features,
                               const ModalityDims& dims);

struct ClassifierTrainResult {
  ClassifierModel model;
  std::vector<double> trace;  ///< epoch-mean cross-entropy
};

/// LR trains on shuffled utterance batches; bc-LSTM on batches of whole
/// videos, with the cross-entropy averaged over every utterance in the
/// batch.
ClassifierTrainResult train_classifier(const TrainConfig& config, const Matrix& fused,
                                       const std::vector<int>& labels,
                                       const std::vector<VideoGroup>& videos, int classes);

struct PipelineResult {
  FusionModel fusion;
  ClassifierModel classifier;
  std::vector<ElboBreakdown> elbo_trace;
  std::vector<double> clf_trace;
  std::vector<int> predictions;  ///< on the evaluation records
  Metrics metrics;
  double elapsed_s = 0.0;
};

/// Fusion training, latent extraction, classifier training and evaluation.
/// With config.joint the fusion model and classifier are optimized together
/// on the sum of both losses.
PipelineResult run_pipeline(const TrainConfig& config, const std::vector<UtteranceRecord>& train,
                            const std::vector<UtteranceRecord>& eval, const ModalityDims& dims,
                            int classes);

struct HoldoutSplit {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> holdout;
};

/// Moves a seeded ~`fraction` of whole videos (at least one) out of train.
HoldoutSplit holdout_split(const std::vector<UtteranceRecord>& records, double fraction,
                           std::uint64_t seed);

struct GridSpec {
  std::vector<std::size_t> d_h;
  std::vector<std::size_t> d_l;
  std::vector<double> learning_rate;

  std::size_t size() const { return d_h.size() * d_l.size() * learning_rate.size(); }
  /// Keys d_h, d_l, learning_rate, each a comma separated list.
  static GridSpec parse(const KeyValues& kv);
};

struct GridCell {
  std::size_t index = 0;
  TrainConfig config;
  bool diverged = false;
  std::string error;
  Metrics metrics;
};

struct GridResult {
  std::vector<GridCell> cells;  ///< in grid order, d_h outermost
  std::size_t best = 0;
  bool used_validation = false;

  const TrainConfig& best_config() const { return cells[best].config; }
};

/// Trains every cell, each on its own substream derive_seed(seed, cell),
/// and picks the highest weighted F1 on `val`, or on a seeded 10% video
/// holdout of `train` when `val` is empty. Ties go to the smaller d_h, then
/// d_l, then learning rate. Cells whose training diverges are kept in the
/// result but never selected; other failures are rethrown tagged with the
/// cell.
GridResult grid_search(const TrainConfig& base, const GridSpec& grid,
                       const std::vector<UtteranceRecord>& train,
                       const std::vector<UtteranceRecord>& val, const ModalityDims& dims,
                       int classes);

/// video_id,utterance_index,label,z_0..z_{D-1} using the posterior mean.
std::string latents_csv(const FusionModel& fusion, const std::vector<UtteranceRecord>& records,
                        const ModalityDims& dims);
void export_latents(const FusionModel& fusion, const std::vector<UtteranceRecord>& records,
                    const ModalityDims& dims, const std::filesystem::path& path);

}  // namespace mmfusion
