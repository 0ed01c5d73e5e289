#include "mmfusion/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "mmfusion/config.hpp"
#include "mmfusion/feature_io.hpp"

namespace mmfusion {

namespace {

std::string split_name_record(const std::string& split, std::size_t i,
                              const UtteranceRecord& r) {
  return split + " record " + std::to_string(i) + " (video '" + r.video_id + "', utterance " +
         std::to_string(r.utterance_index) + ")";
}

}  // namespace

void DatasetManifest::validate() const {
  if (dims.total() == 0) {
    throw DataError(DataError::Kind::kDimension, "manifest '" + name + "': zero input width");
  }
  if (classes < 2) {
    throw DataError(DataError::Kind::kMalformed,
                    "manifest '" + name + "': classes must be >= 2");
  }
  if (!label_names.empty() && label_names.size() != static_cast<std::size_t>(classes)) {
    throw DataError(DataError::Kind::kMalformed,
                    "manifest '" + name + "': " + std::to_string(label_names.size()) +
                        " label names for " + std::to_string(classes) + " classes");
  }
}

std::string DatasetManifest::to_text() const {
  std::ostringstream os;
  os << "name=" << name << "\n";
  os << "d_t=" << dims.text << "\nd_a=" << dims.audio << "\nd_v=" << dims.visual << "\n";
  os << "classes=" << classes << "\n";
  if (!label_names.empty()) {
    os << "labels=";
    for (std::size_t i = 0; i < label_names.size(); ++i) os << (i ? "," : "") << label_names[i];
    os << "\n";
  }
  os << "train_path=" << train_path.string() << "\n";
  os << "test_path=" << test_path.string() << "\n";
  if (val_path) os << "val_path=" << val_path->string() << "\n";
  if (expect_train) os << "expect_train=" << *expect_train << "\n";
  if (expect_test) os << "expect_test=" << *expect_test << "\n";
  if (expect_val) os << "expect_val=" << *expect_val << "\n";
  return os.str();
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  const KeyValues kv = parse_key_values(text);
  DatasetManifest m;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  for (const auto& [key, value] : kv) {
    if (key == "name") m.name = value;
    else if (key == "d_t") m.dims.text = parse_size(key, value);
    else if (key == "d_a") m.dims.audio = parse_size(key, value);
    else if (key == "d_v") m.dims.visual = parse_size(key, value);
    else if (key == "classes") m.classes = static_cast<int>(parse_size(key, value));
    else if (key == "labels") m.label_names = split_list(value);
    else if (key == "train_path") m.train_path = path_of(value);
    else if (key == "test_path") m.test_path = path_of(value);
    else if (key == "val_path") m.val_path = path_of(value);
    else if (key == "expect_train") m.expect_train = parse_size(key, value);
    else if (key == "expect_test") m.expect_test = parse_size(key, value);
    else if (key == "expect_val") m.expect_val = parse_size(key, value);
    else throw ConfigError("unknown manifest key '" + key + "'");
  }
  if (m.classes == 0 && !m.label_names.empty()) m.classes = static_cast<int>(m.label_names.size());
  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest " + path.string());
  f << manifest.to_text();
}

void validate_records(const std::vector<UtteranceRecord>& records,
                      const DatasetManifest& manifest, const std::string& split,
                      std::optional<std::size_t> expected_count) {
  if (records.empty()) {
    throw DataError(DataError::Kind::kCount, split + " split of '" + manifest.name +
                                                 "' is empty" +
                                                 (expected_count ? ", expected " +
                                                                       std::to_string(*expected_count)
                                                                 : std::string()));
  }
  if (expected_count && records.size() != *expected_count) {
    throw DataError(DataError::Kind::kCount,
                    split + " split of '" + manifest.name + "' has " +
                        std::to_string(records.size()) + " utterances, expected " +
                        std::to_string(*expected_count));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const UtteranceRecord& r = records[i];
    const ModalityDims got = r.features.dims();
    auto check = [&](const char* modality, std::size_t have, std::size_t want) {
      if (have != want) {
        throw DataError(DataError::Kind::kDimension,
                        split_name_record(split, i, r) + ": " + modality + " width " +
                            std::to_string(have) + ", expected " + std::to_string(want));
      }
    };
    check("textual", got.text, manifest.dims.text);
    check("acoustic", got.audio, manifest.dims.audio);
    check("visual", got.visual, manifest.dims.visual);
    if (r.label < 0 || r.label >= manifest.classes) {
      throw DataError(DataError::Kind::kUnknownLabel,
                      split_name_record(split, i, r) + ": label " + std::to_string(r.label) +
                          " outside [0, " + std::to_string(manifest.classes) + ")");
    }
  }
}

Dataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  Dataset ds;
  ds.manifest = manifest;
  auto load = [&](const std::filesystem::path& p, const std::string& split,
                  std::optional<std::size_t> expect) {
    FeatureFile file = read_features(p, manifest.label_names);
    validate_records(file.records, manifest, split, expect);
    return std::move(file.records);
  };
  ds.train = load(manifest.train_path, "train", manifest.expect_train);
  ds.test = load(manifest.test_path, "test", manifest.expect_test);
  if (manifest.val_path) ds.val = load(*manifest.val_path, "val", manifest.expect_val);
  return ds;
}

std::vector<VideoGroup> group_by_video(const std::vector<UtteranceRecord>& records) {
  std::vector<VideoGroup> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(records[i].video_id, groups.size());
    if (inserted) groups.push_back({records[i].video_id, {}});
    groups[it->second].record_indices.push_back(i);
  }
  for (VideoGroup& g : groups) {
    std::stable_sort(g.record_indices.begin(), g.record_indices.end(),
                     [&](std::size_t a, std::size_t b) {
                       return records[a].utterance_index < records[b].utterance_index;
                     });
    for (std::size_t k = 0; k < g.record_indices.size(); ++k) {
      const int idx = records[g.record_indices[k]].utterance_index;
      if (k > 0 && idx == records[g.record_indices[k - 1]].utterance_index) {
        throw DataError(DataError::Kind::kDuplicate, "video '" + g.video_id +
                                                         "' has duplicate utterance index " +
                                                         std::to_string(idx));
      }
      if (idx != static_cast<int>(k)) {
        throw DataError(DataError::Kind::kMalformed,
                        "video '" + g.video_id + "': utterance indices are not contiguous from 0"
                        " (found " + std::to_string(idx) + " at position " + std::to_string(k) +
                        ")");
      }
    }
  }
  return groups;
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_index(i)]);
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  shuffle_indices(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

const std::vector<DatasetPreset>& dataset_presets() {
  static const std::vector<DatasetPreset> presets = {
      {"mosi", {100, 73, 100}, {"negative", "positive"}, 1447, 752, std::nullopt, 150, 100, 100},
      {"mosei",
       {300, 74, 35},
       {"negative", "neutral", "positive"},
       16188,
       4614,
       1874,
       250,
       100,
       100},
      {"iemocap",
       {100, 100, 512},
       {"anger", "happy", "sad", "neutral", "excited", "frustrated"},
       5810,
       1623,
       std::nullopt,
       500,
       200,
       100},
  };
  return presets;
}

const DatasetPreset& dataset_preset(const std::string& name) {
  for (const auto& p : dataset_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown dataset preset '" + name + "'");
}

}  // namespace mmfusion
