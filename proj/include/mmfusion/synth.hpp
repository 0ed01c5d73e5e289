#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmfusion/config.hpp"
#include "mmfusion/dataset.hpp"

namespace mmfusion {

/// Generator settings for multimodal data with a known latent cause.
///
/// Every utterance draws u ~ N(0, I_k). Each modality observes it through
/// a fixed random affine map, f_m = A_m u + b_m + noise * eta. The label is
/// the quantile bin of a fixed linear score w.u, with bins chosen so that
/// all classes are equally likely. With label_lag = 1 the label of
/// utterance j is computed from utterance j-1's latent (its own for j = 0),
/// which makes the surrounding context necessary to classify it.
struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t train_videos = 100;
  std::size_t test_videos = 40;
  std::size_t val_videos = 0;
  std::size_t min_utterances = 5;
  std::size_t max_utterances = 15;
  ModalityDims dims{8, 8, 8};
  int classes = 2;
  std::size_t latent_dim = 4;
  double noise = 0.05;
  std::size_t label_lag = 0;

  void validate() const;
};

SyntheticConfig apply_synth_config(SyntheticConfig base, const KeyValues& kv);

struct SyntheticData {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> test;
  std::vector<UtteranceRecord> val;
  /// Hidden latents, one column per record of the matching split.
  Matrix train_latents;
  Matrix test_latents;
  Matrix val_latents;
  std::vector<double> score_weights;
  std::vector<double> thresholds;
  Matrix mix_text, mix_audio, mix_visual;
};

SyntheticData synth_generate(const SyntheticConfig& config);

/// Class implied by a latent under the generator's scoring rule.
int synth_label(const SyntheticData& data, std::span<const double> latent);

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

/// Writes train/test(/val) feature files and a manifest into `dir`; returns
/// the manifest path. `binary` selects MMF1 over CSV.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                              const SyntheticData& data,
                                              const SyntheticConfig& config, bool binary);

}  // namespace mmfusion
