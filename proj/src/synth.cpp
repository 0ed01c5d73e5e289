#include "mmfusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mmfusion/feature_io.hpp"

namespace mmfusion {

void SyntheticConfig::validate() const {
  const std::size_t min_dim = std::min({dims.text, dims.audio, dims.visual});
  if (latent_dim == 0 || latent_dim > min_dim) {
    throw ConfigError("synthetic latent_dim must lie in [1, min(d_t, d_a, d_v)]");
  }
  if (!(noise >= 0.0)) throw ConfigError("synthetic noise must be nonnegative");
  if (classes < 2) throw ConfigError("synthetic classes must be >= 2");
  if (min_utterances == 0 || min_utterances > max_utterances) {
    throw ConfigError("synthetic utterance range must satisfy 1 <= min <= max");
  }
  if (train_videos == 0 || test_videos == 0) {
    throw ConfigError("synthetic train/test video counts must be positive");
  }
  if (label_lag > 1) throw ConfigError("synthetic label_lag must be 0 or 1");
}

SyntheticConfig apply_synth_config(SyntheticConfig c, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "train_videos") c.train_videos = parse_size(key, value);
    else if (key == "test_videos") c.test_videos = parse_size(key, value);
    else if (key == "val_videos") c.val_videos = parse_size(key, value);
    else if (key == "min_utterances") c.min_utterances = parse_size(key, value);
    else if (key == "max_utterances") c.max_utterances = parse_size(key, value);
    else if (key == "d_t") c.dims.text = parse_size(key, value);
    else if (key == "d_a") c.dims.audio = parse_size(key, value);
    else if (key == "d_v") c.dims.visual = parse_size(key, value);
    else if (key == "classes") c.classes = static_cast<int>(parse_size(key, value));
    else if (key == "latent_dim") c.latent_dim = parse_size(key, value);
    else if (key == "noise") c.noise = parse_double(key, value);
    else if (key == "label_lag") c.label_lag = parse_size(key, value);
    else throw ConfigError("unknown synthetic config key '" + key + "'");
  }
  c.validate();
  return c;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::numbers::sqrt2);
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int synth_label(const SyntheticData& data, std::span<const double> latent) {
  double score = 0.0;
  for (std::size_t i = 0; i < latent.size(); ++i) score += data.score_weights[i] * latent[i];
  int label = 0;
  for (double t : data.thresholds)
    if (score >= t) ++label;
  return label;
}

namespace {

Matrix random_mix(Rng& rng, std::size_t rows, std::size_t k) {
  Matrix a = gaussian_sample(rng, rows, k);
  a *= 1.0 / std::sqrt(static_cast<double>(k));
  return a;
}

std::vector<double> observe(const Matrix& mix, const std::vector<double>& offset,
                            std::span<const double> u, double noise, Rng& rng) {
  std::vector<double> f(mix.rows());
  for (std::size_t r = 0; r < mix.rows(); ++r) {
    double s = offset[r];
    for (std::size_t c = 0; c < mix.cols(); ++c) s += mix(r, c) * u[c];
    f[r] = s + noise * rng.normal();
  }
  return f;
}

struct SplitOutput {
  std::vector<UtteranceRecord> records;
  Matrix latents;
};

SplitOutput generate_split(const SyntheticConfig& cfg, const SyntheticData& data,
                           const std::vector<double>& off_t, const std::vector<double>& off_a,
                           const std::vector<double>& off_v, std::size_t videos,
                           const std::string& prefix, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t k = cfg.latent_dim;
  std::vector<std::vector<double>> latents;
  SplitOutput out;
  const std::size_t span = cfg.max_utterances - cfg.min_utterances + 1;
  for (std::size_t v = 0; v < videos; ++v) {
    char id[64];
    std::snprintf(id, sizeof id, "%s_v%05zu", prefix.c_str(), v);
    const std::size_t n = cfg.min_utterances + rng.uniform_index(span);
    std::vector<std::vector<double>> video_latents(n);
    for (auto& u : video_latents) {
      u.resize(k);
      for (double& x : u) x = rng.normal();
    }
    for (std::size_t j = 0; j < n; ++j) {
      const auto& u = video_latents[j];
      const auto& label_source =
          (cfg.label_lag > 0 && j >= cfg.label_lag) ? video_latents[j - cfg.label_lag] : u;
      UtteranceRecord r;
      r.video_id = id;
      r.utterance_index = static_cast<int>(j);
      r.label = synth_label(data, label_source);
      r.features.text = observe(data.mix_text, off_t, u, cfg.noise, rng);
      r.features.audio = observe(data.mix_audio, off_a, u, cfg.noise, rng);
      r.features.visual = observe(data.mix_visual, off_v, u, cfg.noise, rng);
      out.records.push_back(std::move(r));
      latents.push_back(u);
    }
  }
  out.latents = Matrix(k, latents.size());
  for (std::size_t i = 0; i < latents.size(); ++i) out.latents.set_col(i, latents[i]);
  return out;
}

}  // namespace

SyntheticData synth_generate(const SyntheticConfig& config) {
  config.validate();
  SyntheticData data;
  const std::size_t k = config.latent_dim;
  Rng mix_rng(derive_seed(config.seed, 0));
  data.mix_text = random_mix(mix_rng, config.dims.text, k);
  data.mix_audio = random_mix(mix_rng, config.dims.audio, k);
  data.mix_visual = random_mix(mix_rng, config.dims.visual, k);
  auto offsets = [&](std::size_t n) {
    std::vector<double> b(n);
    for (double& x : b) x = 0.5 * mix_rng.normal();
    return b;
  };
  const auto off_t = offsets(config.dims.text);
  const auto off_a = offsets(config.dims.audio);
  const auto off_v = offsets(config.dims.visual);

  data.score_weights.resize(k);
  double norm2 = 0.0;
  for (double& w : data.score_weights) {
    w = mix_rng.normal();
    norm2 += w * w;
  }
  // w.u ~ N(0, |w|^2), so equal-probability bins sit at |w| * Phi^-1(j / C).
  for (int j = 1; j < config.classes; ++j) {
    data.thresholds.push_back(std::sqrt(norm2) *
                              normal_quantile(static_cast<double>(j) / config.classes));
  }

  auto train = generate_split(config, data, off_t, off_a, off_v, config.train_videos, "train",
                              derive_seed(config.seed, 1));
  auto test = generate_split(config, data, off_t, off_a, off_v, config.test_videos, "test",
                             derive_seed(config.seed, 2));
  data.train = std::move(train.records);
  data.train_latents = std::move(train.latents);
  data.test = std::move(test.records);
  data.test_latents = std::move(test.latents);
  if (config.val_videos > 0) {
    auto val = generate_split(config, data, off_t, off_a, off_v, config.val_videos, "val",
                              derive_seed(config.seed, 3));
    data.val = std::move(val.records);
    data.val_latents = std::move(val.latents);
  }
  return data;
}

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                              const SyntheticData& data,
                                              const SyntheticConfig& config, bool binary) {
  std::filesystem::create_directories(dir);
  const std::string ext = binary ? ".mmf" : ".csv";
  DatasetManifest m;
  m.name = "synthetic";
  m.dims = config.dims;
  m.classes = config.classes;
  for (int c = 0; c < config.classes; ++c) m.label_names.push_back("class" + std::to_string(c));
  auto write = [&](const std::vector<UtteranceRecord>& recs, const std::string& split) {
    const std::filesystem::path p = dir / (split + ext);
    if (binary) write_features_binary(p, recs, config.dims, config.classes);
    else write_features_csv(p, recs, config.dims);
    return std::filesystem::path(split + ext);
  };
  m.train_path = write(data.train, "train");
  m.test_path = write(data.test, "test");
  m.expect_train = data.train.size();
  m.expect_test = data.test.size();
  if (!data.val.empty()) {
    m.val_path = write(data.val, "val");
    m.expect_val = data.val.size();
  }
  const std::filesystem::path manifest_path = dir / "manifest.txt";
  write_manifest(manifest_path, m);
  return manifest_path;
}

}  // namespace mmfusion
