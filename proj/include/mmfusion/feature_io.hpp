#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmfusion/dataset.hpp"

namespace mmfusion {

// Two on-disk layouts for utterance features.
//
// CSV, one header line then one row per utterance:
//   video_id,utterance_index,label,t_0..t_{Dt-1},a_0..a_{Da-1},v_0..v_{Dv-1}
// Values are written with 17 significant digits.
//
// Binary "MMF1", little-endian:
//   "MMF1" u32 version u32 D_t u32 D_a u32 D_v u32 C u64 count
//   count x { u32 id_len, id bytes (UTF-8), u32 utterance_index, u32 label,
//             (D_t + D_a + D_v) f64 }

inline constexpr std::uint32_t kFeatureFileVersion = 1;

struct FeatureFile {
  ModalityDims dims;
  int classes = 0;  ///< from the binary header; 0 for CSV
  std::vector<UtteranceRecord> records;
};

std::string encode_features_binary(const std::vector<UtteranceRecord>& records,
                                   const ModalityDims& dims, int classes);
FeatureFile decode_features_binary(std::string_view bytes);

std::string encode_features_csv(const std::vector<UtteranceRecord>& records,
                                const ModalityDims& dims);
/// Labels may be class indices or, when `label_names` is given, names.
FeatureFile decode_features_csv(const std::string& text,
                                const std::vector<std::string>& label_names = {});

void write_features_binary(const std::filesystem::path& path,
                           const std::vector<UtteranceRecord>& records,
                           const ModalityDims& dims, int classes);
void write_features_csv(const std::filesystem::path& path,
                        const std::vector<UtteranceRecord>& records, const ModalityDims& dims);

/// Dispatches on the leading magic bytes.
FeatureFile read_features(const std::filesystem::path& path,
                          const std::vector<std::string>& label_names = {});

}  // namespace mmfusion
