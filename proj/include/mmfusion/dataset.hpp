#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfusion/modality.hpp"
#include "mmfusion/rng.hpp"

namespace mmfusion {

/// Validation failures while loading or grouping utterance data.
class DataError : public std::runtime_error {
 public:
  enum class Kind { kDimension, kCount, kUnknownLabel, kMalformed, kDuplicate };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct UtteranceRecord {
  std::string video_id;
  int utterance_index = 0;  ///< position within the video, from 0
  int label = 0;            ///< class index into the manifest's label names
  ModalityFeatures features;

  bool operator==(const UtteranceRecord&) const = default;
};

/// Flat key=value description of a dataset on disk.
///
/// Keys: name, d_t, d_a, d_v, classes, labels (comma separated), train_path,
/// test_path, val_path, expect_train, expect_test, expect_val. Relative
/// paths resolve against the manifest's directory. '#' starts a comment.
struct DatasetManifest {
  std::string name;
  ModalityDims dims;
  int classes = 0;
  std::vector<std::string> label_names;
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::optional<std::filesystem::path> val_path;
  std::optional<std::size_t> expect_train;
  std::optional<std::size_t> expect_test;
  std::optional<std::size_t> expect_val;

  /// Throws DataError when the declared fields are inconsistent.
  void validate() const;
  std::string to_text() const;
};

DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir = {});
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct Dataset {
  DatasetManifest manifest;
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> test;
  std::vector<UtteranceRecord> val;
};

/// Loads every split named by the manifest, keeping file order, and checks
/// widths, labels and expected counts. An empty split is a count error.
Dataset load_dataset(const DatasetManifest& manifest);

/// Checks one split's records against the manifest; `split` names it in
/// error messages.
void validate_records(const std::vector<UtteranceRecord>& records,
                      const DatasetManifest& manifest, const std::string& split,
                      std::optional<std::size_t> expected_count);

/// Record indices of one video, ordered by utterance index.
struct VideoGroup {
  std::string video_id;
  std::vector<std::size_t> record_indices;
};

/// One group per video id in order of first appearance. Throws DataError on
/// a duplicate (video, index) pair or a gap in the index sequence.
std::vector<VideoGroup> group_by_video(const std::vector<UtteranceRecord>& records);

/// Seeded shuffle of [0, count) cut into batches; the last may be short.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   Rng& rng);

/// In-place Fisher-Yates shuffle driven by rng.
void shuffle_indices(std::vector<std::size_t>& v, Rng& rng);

/// Feature sizes, class labels, split sizes and tuned model widths
/// published for the three benchmark corpora.
struct DatasetPreset {
  std::string name;
  ModalityDims dims;
  std::vector<std::string> label_names;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  std::optional<std::size_t> val_count;
  std::size_t vae_hidden = 0;
  std::size_t vae_latent = 0;
  std::size_t lstm_dim = 0;
};

const std::vector<DatasetPreset>& dataset_presets();
const DatasetPreset& dataset_preset(const std::string& name);

}  // namespace mmfusion
