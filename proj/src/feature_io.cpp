#include "mmfusion/feature_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "binary_io.hpp"
#include "mmfusion/checkpoint.hpp"

namespace mmfusion {

namespace {

void check_record_for_write(const UtteranceRecord& r, const ModalityDims& dims) {
  if (r.video_id.empty()) throw std::invalid_argument("record with empty video_id");
  if (r.utterance_index < 0 || r.label < 0) {
    throw std::invalid_argument("record '" + r.video_id + "' has a negative index or label");
  }
  if (r.features.dims() != dims) {
    throw ShapeError("record '" + r.video_id + "' utterance " +
                     std::to_string(r.utterance_index) + " does not match file dimensions");
  }
}

void append_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_field(const std::string& s, std::size_t line, std::size_t col) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || errno == ERANGE || *end != '\0') {
    throw DataError(DataError::Kind::kMalformed, "line " + std::to_string(line) + " column " +
                                                     std::to_string(col + 1) +
                                                     ": not a number: '" + s + "'");
  }
  return v;
}

int parse_int_field(const std::string& s, std::size_t line, const char* what) {
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0' || errno != 0 || v < 0 || v > 0x7fffffffL) {
    throw DataError(DataError::Kind::kMalformed,
                    "line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string encode_features_binary(const std::vector<UtteranceRecord>& records,
                                   const ModalityDims& dims, int classes) {
  std::string out = "MMF1";
  detail::put_u32(out, kFeatureFileVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(dims.text));
  detail::put_u32(out, static_cast<std::uint32_t>(dims.audio));
  detail::put_u32(out, static_cast<std::uint32_t>(dims.visual));
  detail::put_u32(out, static_cast<std::uint32_t>(classes));
  detail::put_u64(out, records.size());
  for (const UtteranceRecord& r : records) {
    check_record_for_write(r, dims);
    detail::put_u32(out, static_cast<std::uint32_t>(r.video_id.size()));
    out += r.video_id;
    detail::put_u32(out, static_cast<std::uint32_t>(r.utterance_index));
    detail::put_u32(out, static_cast<std::uint32_t>(r.label));
    for (const auto* part : {&r.features.text, &r.features.audio, &r.features.visual})
      for (double v : *part) detail::put_f64(out, v);
  }
  return out;
}

FeatureFile decode_features_binary(std::string_view bytes) {
  detail::Reader<FormatError> in(bytes, "feature file");
  if (in.take(4) != "MMF1") throw FormatError("feature file: bad magic (expected MMF1)");
  const std::uint32_t version = in.u32();
  if (version != kFeatureFileVersion) {
    throw FormatError("feature file: unsupported version " + std::to_string(version));
  }
  FeatureFile file;
  file.dims.text = in.u32();
  file.dims.audio = in.u32();
  file.dims.visual = in.u32();
  file.classes = static_cast<int>(in.u32());
  const std::uint64_t count = in.u64();
  const std::size_t width = file.dims.total();
  // Each record needs at least 12 header bytes plus its features.
  if (count > in.remaining() / (12 + 8 * width)) {
    throw FormatError("feature file: truncated file (header claims " + std::to_string(count) +
                      " records)");
  }
  file.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    UtteranceRecord r;
    const std::uint32_t id_len = in.u32();
    r.video_id = std::string(in.take(id_len));
    r.utterance_index = static_cast<int>(in.u32());
    r.label = static_cast<int>(in.u32());
    r.features.text.resize(file.dims.text);
    r.features.audio.resize(file.dims.audio);
    r.features.visual.resize(file.dims.visual);
    for (auto* part : {&r.features.text, &r.features.audio, &r.features.visual})
      for (double& v : *part) v = in.f64();
    file.records.push_back(std::move(r));
  }
  if (!in.at_end()) throw FormatError("feature file: trailing bytes after last record");
  return file;
}

std::string encode_features_csv(const std::vector<UtteranceRecord>& records,
                                const ModalityDims& dims) {
  std::string out = "video_id,utterance_index,label";
  for (std::size_t i = 0; i < dims.text; ++i) out += ",t_" + std::to_string(i);
  for (std::size_t i = 0; i < dims.audio; ++i) out += ",a_" + std::to_string(i);
  for (std::size_t i = 0; i < dims.visual; ++i) out += ",v_" + std::to_string(i);
  out += '\n';
  for (const UtteranceRecord& r : records) {
    check_record_for_write(r, dims);
    if (r.video_id.find_first_of(",\n\r") != std::string::npos) {
      throw std::invalid_argument("video_id '" + r.video_id + "' cannot be written to CSV");
    }
    out += r.video_id;
    out += ',' + std::to_string(r.utterance_index) + ',' + std::to_string(r.label);
    for (const auto* part : {&r.features.text, &r.features.audio, &r.features.visual}) {
      for (double v : *part) {
        out += ',';
        append_number(out, v);
      }
    }
    out += '\n';
  }
  return out;
}

FeatureFile decode_features_csv(const std::string& text,
                                const std::vector<std::string>& label_names) {
  std::istringstream in(text);
  std::string line;
  FeatureFile file;
  if (!std::getline(in, line)) return file;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "video_id" || header[1] != "utterance_index" ||
      header[2] != "label") {
    throw DataError(DataError::Kind::kMalformed,
                    "line 1: header must start with video_id,utterance_index,label");
  }
  // Columns must be grouped t_*, then a_*, then v_*.
  int stage = 0;
  for (std::size_t c = 3; c < header.size(); ++c) {
    const char p = header[c].empty() ? '?' : header[c][0];
    const int s = p == 't' ? 0 : p == 'a' ? 1 : p == 'v' ? 2 : -1;
    if (s < stage || header[c].size() < 3 || header[c][1] != '_') {
      throw DataError(DataError::Kind::kMalformed,
                      "line 1: unexpected column '" + header[c] + "'");
    }
    stage = s;
    (s == 0 ? file.dims.text : s == 1 ? file.dims.audio : file.dims.visual) += 1;
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(DataError::Kind::kDimension,
                      "line " + std::to_string(lineno) + ": " + std::to_string(fields.size()) +
                          " fields, header declares " + std::to_string(header.size()));
    }
    UtteranceRecord r;
    r.video_id = fields[0];
    if (r.video_id.empty()) {
      throw DataError(DataError::Kind::kMalformed,
                      "line " + std::to_string(lineno) + ": empty video_id");
    }
    r.utterance_index = parse_int_field(fields[1], lineno, "utterance_index");
    const std::string& label = fields[2];
    bool named = false;
    for (std::size_t k = 0; k < label_names.size(); ++k) {
      if (label_names[k] == label) {
        r.label = static_cast<int>(k);
        named = true;
      }
    }
    if (!named) {
      if (label.empty() || label.find_first_not_of("0123456789") != std::string::npos) {
        throw DataError(DataError::Kind::kUnknownLabel,
                        "line " + std::to_string(lineno) + ": unknown label '" + label + "'");
      }
      r.label = parse_int_field(label, lineno, "label");
    }
    std::size_t col = 3;
    for (auto [part, n] : {std::pair{&r.features.text, file.dims.text},
                           std::pair{&r.features.audio, file.dims.audio},
                           std::pair{&r.features.visual, file.dims.visual}}) {
      part->resize(n);
      for (double& v : *part) {
        v = parse_field(fields[col], lineno, col);
        ++col;
      }
    }
    file.records.push_back(std::move(r));
  }
  return file;
}

void write_features_binary(const std::filesystem::path& path,
                           const std::vector<UtteranceRecord>& records,
                           const ModalityDims& dims, int classes) {
  write_file_bytes(path, encode_features_binary(records, dims, classes));
}

void write_features_csv(const std::filesystem::path& path,
                        const std::vector<UtteranceRecord>& records, const ModalityDims& dims) {
  write_file_bytes(path, encode_features_csv(records, dims));
}

FeatureFile read_features(const std::filesystem::path& path,
                          const std::vector<std::string>& label_names) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.empty()) return {};
  if (bytes.compare(0, 8, "video_id") != 0) return decode_features_binary(bytes);
  return decode_features_csv(bytes, label_names);
}

}  // namespace mmfusion
