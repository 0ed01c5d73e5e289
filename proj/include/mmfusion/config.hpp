#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmfusion/vae.hpp"

namespace mmfusion {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered key/value pairs from a flat `key=value` text file.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Blank lines and '#' comments are skipped; whitespace around keys and
/// values is trimmed. Duplicate keys are an error.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

std::size_t parse_size(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<std::string> split_list(const std::string& value, char sep = ',');

enum class ClassifierKind { kLr, kBcLstm };
enum class FusionKind { kVae, kAe, kConcat };

std::string to_string(ClassifierKind k);
std::string to_string(FusionKind k);
std::string to_string(LatentMode m);

/// Hyperparameters of one pipeline run. Defaults follow the published
/// MOSI settings (VAE hidden 150, latent 100, LSTM 100, lr 0.001, batch
/// 100, 100 epochs, dropout 0.2).
struct TrainConfig {
  std::uint64_t seed = 1;
  double learning_rate = 0.001;
  double clf_learning_rate = 0.001;
  std::size_t batch_size = 100;
  /// Whole videos per bc-LSTM batch.
  std::size_t video_batch_size = 10;
  std::size_t epochs = 100;
  std::size_t clf_epochs = 100;
  std::size_t d_h = 150;
  std::size_t d_z = 100;
  std::size_t d_l = 100;
  double dropout = 0.2;
  double kl_weight = 1.0;
  LatentMode latent_mode = LatentMode::kMean;
  ClassifierKind classifier = ClassifierKind::kLr;
  FusionKind fusion = FusionKind::kVae;
  double clip_norm = 0.0;
  /// z-score features with train-split statistics.
  bool normalize = false;
  /// Non-canonical ablation: train fusion and classifier on the summed loss.
  bool joint = false;
  /// When false the elapsed time is reported as 0 so reports are
  /// byte-reproducible.
  bool report_timing = true;

  void validate() const;
  /// Canonical `key=value` serialization (stable key order).
  std::string to_text() const;
  /// FNV-1a over to_text() without the seed line, as 16 hex digits.
  std::string hash() const;
};

/// Applies recognised keys on top of `base`; unknown keys are an error.
TrainConfig apply_config(TrainConfig base, const KeyValues& kv);
TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base = {});

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mmfusion
