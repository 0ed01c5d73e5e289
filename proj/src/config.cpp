#include "mmfusion/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mmfusion {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got '" +
                        line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (std::any_of(kv.begin(), kv.end(), [&](const auto& p) { return p.first == key; })) {
      throw ConfigError("duplicate key '" + key + "'");
    }
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_key_values(ss.str());
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (value.empty() || value[0] == '-') {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (errno != 0 || end == value.c_str() || *end != '\0') {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (errno != 0 || end == value.c_str() || *end != '\0' || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string to_string(ClassifierKind k) { return k == ClassifierKind::kLr ? "lr" : "bclstm"; }

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::kVae: return "vae";
    case FusionKind::kAe: return "ae";
    case FusionKind::kConcat: return "concat";
  }
  return "?";
}

std::string to_string(LatentMode m) { return m == LatentMode::kMean ? "mean" : "sample"; }

void TrainConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("learning_rate", learning_rate);
  positive("clf_learning_rate", clf_learning_rate);
  positive("batch_size", static_cast<double>(batch_size));
  positive("video_batch_size", static_cast<double>(video_batch_size));
  positive("d_l", static_cast<double>(d_l));
  if (fusion != FusionKind::kConcat) {
    positive("d_h", static_cast<double>(d_h));
    positive("d_z", static_cast<double>(d_z));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be nonnegative");
  if (joint && fusion == FusionKind::kConcat) {
    throw ConfigError("joint training needs a learned fusion (vae or ae)");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "seed=" << seed << "\n"
     << "learning_rate=" << format_double(learning_rate) << "\n"
     << "clf_learning_rate=" << format_double(clf_learning_rate) << "\n"
     << "batch_size=" << batch_size << "\n"
     << "video_batch_size=" << video_batch_size << "\n"
     << "epochs=" << epochs << "\n"
     << "clf_epochs=" << clf_epochs << "\n"
     << "d_h=" << d_h << "\n"
     << "d_z=" << d_z << "\n"
     << "d_l=" << d_l << "\n"
     << "dropout=" << format_double(dropout) << "\n"
     << "kl_weight=" << format_double(kl_weight) << "\n"
     << "latent_mode=" << to_string(latent_mode) << "\n"
     << "classifier=" << to_string(classifier) << "\n"
     << "fusion=" << to_string(fusion) << "\n"
     << "clip_norm=" << format_double(clip_norm) << "\n"
     << "normalize=" << (normalize ? "true" : "false") << "\n"
     << "joint=" << (joint ? "true" : "false") << "\n"
     << "report_timing=" << (report_timing ? "true" : "false") << "\n";
  return os.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string TrainConfig::hash() const {
  std::string text = to_text();
  text.erase(0, text.find('\n') + 1);  // drop the seed line
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

TrainConfig apply_config(TrainConfig c, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "learning_rate") c.learning_rate = parse_double(key, value);
    else if (key == "clf_learning_rate") c.clf_learning_rate = parse_double(key, value);
    else if (key == "batch_size") c.batch_size = parse_size(key, value);
    else if (key == "video_batch_size") c.video_batch_size = parse_size(key, value);
    else if (key == "epochs") c.epochs = parse_size(key, value);
    else if (key == "clf_epochs") c.clf_epochs = parse_size(key, value);
    else if (key == "d_h") c.d_h = parse_size(key, value);
    else if (key == "d_z") c.d_z = parse_size(key, value);
    else if (key == "d_l") c.d_l = parse_size(key, value);
    else if (key == "dropout") c.dropout = parse_double(key, value);
    else if (key == "kl_weight") c.kl_weight = parse_double(key, value);
    else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
    else if (key == "normalize") c.normalize = parse_bool(key, value);
    else if (key == "joint") c.joint = parse_bool(key, value);
    else if (key == "report_timing") c.report_timing = parse_bool(key, value);
    else if (key == "latent_mode") {
      if (value == "mean") c.latent_mode = LatentMode::kMean;
      else if (value == "sample") c.latent_mode = LatentMode::kSample;
      else throw ConfigError("latent_mode must be mean or sample");
    } else if (key == "classifier") {
      if (value == "lr") c.classifier = ClassifierKind::kLr;
      else if (value == "bclstm" || value == "bc-lstm") c.classifier = ClassifierKind::kBcLstm;
      else throw ConfigError("classifier must be lr or bclstm");
    } else if (key == "fusion") {
      if (value == "vae") c.fusion = FusionKind::kVae;
      else if (value == "ae") c.fusion = FusionKind::kAe;
      else if (value == "concat") c.fusion = FusionKind::kConcat;
      else throw ConfigError("fusion must be vae, ae or concat");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const std::filesystem::path& path, TrainConfig base) {
  return apply_config(base, read_key_values(path));
}

}  // namespace mmfusion
