#include "mmfusion/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <stdexcept>

#include "mmfusion/adam.hpp"
#include "mmfusion/checkpoint.hpp"

namespace mmfusion {

namespace {

// Substreams of a run's seed.
constexpr std::uint64_t kStreamFusionInit = 101;
constexpr std::uint64_t kStreamFusionBatches = 102;
constexpr std::uint64_t kStreamFusionNoise = 103;
constexpr std::uint64_t kStreamClfInit = 201;
constexpr std::uint64_t kStreamClfBatches = 202;
constexpr std::uint64_t kStreamClfDropout = 203;
constexpr std::uint64_t kStreamHoldout = 401;

AdamConfig adam_config(double lr, double clip) {
  AdamConfig c;
  c.learning_rate = lr;
  c.clip_norm = clip;
  return c;
}

void check_finite(double loss, const char* what, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s loss is not finite at epoch %zu, batch %zu", what,
                  epoch + 1, batch + 1);
    throw TrainingError(buf, static_cast<int>(epoch + 1), static_cast<int>(batch + 1));
  }
}

// A collapsed posterior scale (sigma underflowing to 0) is divergence too.
template <class F>
auto guarded(const char* what, std::size_t epoch, std::size_t batch, F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s loss is undefined at epoch %zu, batch %zu: %s", what,
                  epoch + 1, batch + 1, e.what());
    throw TrainingError(buf, static_cast<int>(epoch + 1), static_cast<int>(batch + 1));
  }
}

void accumulate(ElboBreakdown& sum, const ElboBreakdown& b, double weight) {
  sum.recon_term += weight * b.recon_term;
  sum.kl_term += weight * b.kl_term;
  sum.total_loss += weight * b.total_loss;
}

ElboBreakdown scaled(ElboBreakdown e, double n) {
  e.recon_term /= n;
  e.kl_term /= n;
  e.total_loss /= n;
  return e;
}

ClassifierModel make_classifier(const TrainConfig& config, std::size_t input_dim, int classes) {
  ClassifierModel m;
  m.kind = config.classifier;
  const auto C = static_cast<std::size_t>(classes);
  if (m.kind == ClassifierKind::kLr) {
    m.lr = LrClassifier(input_dim, C);
  } else {
    m.lstm = BiLstmClassifier(input_dim, config.d_l, C, config.dropout, config.dropout);
  }
  return m;
}

void init_classifier(ClassifierModel& m, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamClfInit));
  if (m.kind == ClassifierKind::kLr) m.lr.init(rng);
  else m.lstm.init(rng);
}

std::vector<std::size_t> flatten_videos(const std::vector<VideoGroup>& videos,
                                        const std::vector<std::size_t>& chosen) {
  std::vector<std::size_t> cols;
  for (std::size_t v : chosen)
    cols.insert(cols.end(), videos[v].record_indices.begin(), videos[v].record_indices.end());
  return cols;
}

std::vector<int> pick(const std::vector<int>& labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

/// Cross-entropy and dL/d(inputs) for the given columns of `fused`, batch
/// mean over every utterance involved.
double classifier_batch(ClassifierModel& m, const Matrix& fused, const std::vector<int>& labels,
                        const std::vector<VideoGroup>& videos,
                        const std::vector<std::size_t>& batch, Rng& dropout_rng,
                        Matrix* input_grad) {
  if (m.kind == ClassifierKind::kLr) {
    const Matrix z = fused.gather_cols(batch);
    const auto targets = pick(labels, batch);
    LossAndGrad lg = m.lr.loss_and_backward(z, targets);
    if (input_grad) *input_grad = std::move(lg.grad);
    return lg.loss;
  }
  std::size_t total = 0;
  for (std::size_t v : batch) total += videos[v].record_indices.size();
  if (input_grad) *input_grad = Matrix(fused.rows(), total);
  double loss = 0.0;
  std::size_t offset = 0;
  for (std::size_t v : batch) {
    const auto& idx = videos[v].record_indices;
    const Matrix seq = fused.gather_cols(idx);
    m.lstm.forward(seq, true, &dropout_rng);
    const auto targets = pick(labels, idx);
    LossAndGrad lg = m.lstm.loss_and_backward(targets, static_cast<double>(total));
    loss += lg.loss;
    if (input_grad) {
      for (std::size_t j = 0; j < idx.size(); ++j) input_grad->set_col(offset + j, lg.grad.col(j));
    }
    offset += idx.size();
  }
  return loss;
}

std::size_t batch_items(const ClassifierModel& m, const std::vector<VideoGroup>& videos,
                        const std::vector<std::size_t>& batch) {
  if (m.kind == ClassifierKind::kLr) return batch.size();
  std::size_t n = 0;
  for (std::size_t v : batch) n += videos[v].record_indices.size();
  return n;
}

struct JointResult {
  FusionModel fusion;
  ClassifierModel classifier;
  std::vector<ElboBreakdown> elbo_trace;
  std::vector<double> clf_trace;
};

JointResult train_joint(const TrainConfig& config, const Matrix& raw, const std::vector<int>& labels,
                        const std::vector<VideoGroup>& videos, const ModalityDims& dims,
                        int classes) {
  JointResult r;
  r.fusion.kind = config.fusion;
  Matrix features = raw;
  if (config.normalize) {
    r.fusion.normalizer = FeatureNormalizer::fit(raw);
    r.fusion.normalizer.apply(features);
  }
  r.fusion.vae = VaeModel(VaeDims{dims, config.d_h, config.d_z});
  Rng init_rng(derive_seed(config.seed, kStreamFusionInit));
  r.fusion.vae.init(init_rng);
  r.classifier = make_classifier(config, config.d_z, classes);
  init_classifier(r.classifier, config.seed);

  ParamStore store = r.fusion.vae.params();
  r.classifier.collect(store);
  Adam adam(adam_config(config.learning_rate, config.clip_norm));
  Rng batch_rng(derive_seed(config.seed, kStreamFusionBatches));
  Rng noise_rng(derive_seed(config.seed, kStreamFusionNoise));
  Rng dropout_rng(derive_seed(config.seed, kStreamClfDropout));
  const bool by_video = config.classifier == ClassifierKind::kBcLstm;
  const std::size_t units = by_video ? videos.size() : features.cols();
  const std::size_t batch_size = by_video ? config.video_batch_size : config.batch_size;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(units, batch_size, batch_rng);
    ElboBreakdown elbo_sum;
    elbo_sum.kl_weight = config.kl_weight;
    double clf_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const std::vector<std::size_t> cols =
          by_video ? flatten_videos(videos, batches[b]) : batches[b];
      const Matrix fb = features.gather_cols(cols);
      // The classifier sees mu; its gradient is fed back into the encoder.
      Matrix fused = r.fusion.vae.encode_infer(fb).mu;
      Matrix dmu;
      double clf_loss = 0.0;
      if (by_video) {
        // Columns of `fused` are the batch's videos back to back.
        std::vector<VideoGroup> local;
        std::size_t offset = 0;
        std::vector<std::size_t> order;
        for (std::size_t v : batches[b]) {
          VideoGroup g{videos[v].video_id, {}};
          for (std::size_t j = 0; j < videos[v].record_indices.size(); ++j)
            g.record_indices.push_back(offset + j);
          offset += g.record_indices.size();
          order.push_back(local.size());
          local.push_back(std::move(g));
        }
        const auto local_labels = pick(labels, cols);
        clf_loss =
            classifier_batch(r.classifier, fused, local_labels, local, order, dropout_rng, &dmu);
      } else {
        std::vector<std::size_t> all(cols.size());
        std::iota(all.begin(), all.end(), 0);
        const auto local_labels = pick(labels, cols);
        clf_loss = classifier_batch(r.classifier, fused, local_labels, videos, all, dropout_rng,
                                    &dmu);
      }
      check_finite(clf_loss, "joint classifier", epoch, b);
      const ElboBreakdown e = guarded("joint fusion", epoch, b, [&] {
        ElboBreakdown out;
        if (config.fusion == FusionKind::kAe) {
          out.kl_weight = 0.0;
          out.recon_term = out.total_loss = r.fusion.vae.ae_loss(fb, true, &dmu);
        } else {
          const Matrix eps = gaussian_sample(noise_rng, config.d_z, fb.cols());
          out = r.fusion.vae.elbo_loss_with_noise(fb, eps, config.kl_weight, true, &dmu);
        }
        return out;
      });
      check_finite(e.total_loss, "joint fusion", epoch, b);
      adam.step(store);
      const double w = static_cast<double>(fb.cols());
      accumulate(elbo_sum, e, w);
      clf_sum += clf_loss * w;
      seen += fb.cols();
    }
    if (seen > 0) {
      r.elbo_trace.push_back(scaled(elbo_sum, static_cast<double>(seen)));
      r.clf_trace.push_back(clf_sum / static_cast<double>(seen));
    }
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureNormalizer FeatureNormalizer::fit(const Matrix& features) {
  FeatureNormalizer n;
  const std::size_t D = features.rows(), N = features.cols();
  if (N == 0) throw std::invalid_argument("cannot fit a normalizer on zero records");
  n.mean.assign(D, 0.0);
  n.inv_std.assign(D, 1.0);
  for (std::size_t r = 0; r < D; ++r) {
    double s = 0.0;
    for (double v : features.row(r)) s += v;
    const double mean = s / static_cast<double>(N);
    double ss = 0.0;
    for (double v : features.row(r)) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(N));
    n.mean[r] = mean;
    if (sd > 0.0) n.inv_std[r] = 1.0 / sd;
  }
  return n;
}

void FeatureNormalizer::apply(Matrix& features) const {
  if (!active()) return;
  if (features.rows() != mean.size()) {
    throw ShapeError("normalizer fitted on " + std::to_string(mean.size()) +
                     " features, got " + features.shape_str());
  }
  for (std::size_t r = 0; r < features.rows(); ++r)
    for (double& v : features.row(r)) v = (v - mean[r]) * inv_std[r];
}

Matrix feature_matrix(const std::vector<UtteranceRecord>& records, const ModalityDims& dims) {
  std::vector<const ModalityFeatures*> items;
  items.reserve(records.size());
  for (const auto& r : records) items.push_back(&r.features);
  return concat_batch(items, dims);
}

std::vector<int> record_labels(const std::vector<UtteranceRecord>& records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return labels;
}

// ---------------------------------------------------------------------------

std::size_t FusionModel::output_dim(const ModalityDims& dims) const {
  return kind == FusionKind::kConcat ? dims.total() : vae.latent_dim();
}

Matrix FusionModel::fuse(const Matrix& raw, LatentMode mode, Rng* rng) const {
  Matrix f = raw;
  normalizer.apply(f);
  if (kind == FusionKind::kConcat) return f;
  // The autoencoder has no meaningful posterior spread; always use its code.
  if (kind == FusionKind::kAe) mode = LatentMode::kMean;
  return vae.extract_latent(f, mode, rng);
}

void FusionModel::save(const std::filesystem::path& path) {
  ParamStore store;
  if (kind != FusionKind::kConcat) vae.collect(store);
  Param norm_mean, norm_scale;
  if (normalizer.active()) {
    norm_mean = Param("norm.mean", normalizer.mean.size(), 1);
    norm_scale = Param("norm.inv_std", normalizer.inv_std.size(), 1);
    norm_mean.value = Matrix::column(normalizer.mean);
    norm_scale.value = Matrix::column(normalizer.inv_std);
    store.add(norm_mean);
    store.add(norm_scale);
  }
  save_checkpoint(path, store);
}

FusionModel FusionModel::load(const std::filesystem::path& path, const ModalityDims& dims,
                              FusionKind kind) {
  FusionModel m;
  m.kind = kind;
  std::vector<NamedMatrix> model_params;
  for (auto& nm : read_checkpoint(path)) {
    if (nm.name == "norm.mean") m.normalizer.mean = nm.value.col(0);
    else if (nm.name == "norm.inv_std") m.normalizer.inv_std = nm.value.col(0);
    else model_params.push_back(std::move(nm));
  }
  if (m.normalizer.mean.size() != m.normalizer.inv_std.size()) {
    throw FormatError(path.string() + ": incomplete normalizer");
  }
  if (kind != FusionKind::kConcat) m.vae = vae_from_params(model_params, dims);
  else if (!model_params.empty()) throw FormatError(path.string() + ": unexpected parameters");
  return m;
}

void ClassifierModel::collect(ParamStore& store) {
  if (kind == ClassifierKind::kLr) lr.collect(store);
  else lstm.collect(store);
}

std::vector<int> ClassifierModel::predict(const Matrix& fused,
                                          const std::vector<VideoGroup>& videos) const {
  if (kind == ClassifierKind::kLr) return lr.predict(fused).labels;
  std::vector<int> out(fused.cols(), -1);
  for (const VideoGroup& v : videos) {
    const Prediction p = lstm.infer(fused.gather_cols(v.record_indices));
    for (std::size_t j = 0; j < v.record_indices.size(); ++j) out[v.record_indices[j]] = p.labels[j];
  }
  return out;
}

void ClassifierModel::save(const std::filesystem::path& path) {
  ParamStore store;
  collect(store);
  save_checkpoint(path, store);
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path, ClassifierKind kind,
                                      std::size_t input_dim, int classes) {
  const auto saved = read_checkpoint(path);
  ClassifierModel m;
  m.kind = kind;
  const auto C = static_cast<std::size_t>(classes);
  if (kind == ClassifierKind::kLr) {
    m.lr = LrClassifier(input_dim, C);
  } else {
    auto it = std::find_if(saved.begin(), saved.end(),
                           [](const NamedMatrix& nm) { return nm.name == "lstm.fwd.Wh"; });
    if (it == saved.end()) throw FormatError(path.string() + ": not a bc-LSTM checkpoint");
    m.lstm = BiLstmClassifier(input_dim, it->value.cols(), C, 0.0, 0.0);
  }
  ParamStore store;
  m.collect(store);
  restore_params(saved, store);
  return m;
}

// ---------------------------------------------------------------------------

FusionTrainResult train_fusion(const TrainConfig& config, const Matrix& raw_features,
                               const ModalityDims& dims) {
  config.validate();
  FusionTrainResult r;
  r.fusion.kind = config.fusion;
  Matrix features = raw_features;
  if (config.normalize) {
    r.fusion.normalizer = FeatureNormalizer::fit(raw_features);
    r.fusion.normalizer.apply(features);
  }
  if (config.fusion == FusionKind::kConcat) return r;

  VaeModel& model = r.fusion.vae;
  model = VaeModel(VaeDims{dims, config.d_h, config.d_z});
  Rng init_rng(derive_seed(config.seed, kStreamFusionInit));
  model.init(init_rng);
  ParamStore store = model.params();
  Adam adam(adam_config(config.learning_rate, config.clip_norm));
  Rng batch_rng(derive_seed(config.seed, kStreamFusionBatches));
  Rng noise_rng(derive_seed(config.seed, kStreamFusionNoise));
  const bool variational = config.fusion == FusionKind::kVae;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = make_batches(features.cols(), config.batch_size, batch_rng);
    ElboBreakdown sum;
    sum.kl_weight = variational ? config.kl_weight : 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Matrix fb = features.gather_cols(batches[b]);
      const char* what = variational ? "VAE" : "autoencoder";
      const ElboBreakdown e = guarded(what, epoch, b, [&] {
        ElboBreakdown out;
        if (variational) {
          const Matrix eps = gaussian_sample(noise_rng, config.d_z, fb.cols());
          out = model.elbo_loss_with_noise(fb, eps, config.kl_weight, true);
        } else {
          out.kl_weight = 0.0;
          out.recon_term = out.total_loss = model.ae_loss(fb, true);
        }
        return out;
      });
      check_finite(e.total_loss, what, epoch, b);
      adam.step(store);
      accumulate(sum, e, static_cast<double>(fb.cols()));
    }
    if (features.cols() > 0) r.trace.push_back(scaled(sum, static_cast<double>(features.cols())));
  }
  return r;
}

ClassifierTrainResult train_classifier(const TrainConfig& config, const Matrix& fused,
                                       const std::vector<int>& labels,
                                       const std::vector<VideoGroup>& videos, int classes) {
  config.validate();
  if (labels.size() != fused.cols()) {
    throw ShapeError("train_classifier: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(fused.cols()) + " inputs");
  }
  ClassifierTrainResult r;
  r.model = make_classifier(config, fused.rows(), classes);
  init_classifier(r.model, config.seed);
  ParamStore store;
  r.model.collect(store);
  Adam adam(adam_config(config.clf_learning_rate, config.clip_norm));
  Rng batch_rng(derive_seed(config.seed, kStreamClfBatches));
  Rng dropout_rng(derive_seed(config.seed, kStreamClfDropout));
  const bool by_video = config.classifier == ClassifierKind::kBcLstm;
  const std::size_t units = by_video ? videos.size() : fused.cols();
  const std::size_t batch_size = by_video ? config.video_batch_size : config.batch_size;

  for (std::size_t epoch = 0; epoch < config.clf_epochs; ++epoch) {
    const auto batches = make_batches(units, batch_size, batch_rng);
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const double loss =
          classifier_batch(r.model, fused, labels, videos, batches[b], dropout_rng, nullptr);
      check_finite(loss, "classifier", epoch, b);
      adam.step(store);
      const std::size_t n = batch_items(r.model, videos, batches[b]);
      sum += loss * static_cast<double>(n);
      seen += n;
    }
    if (seen > 0) r.trace.push_back(sum / static_cast<double>(seen));
  }
  return r;
}

PipelineResult run_pipeline(const TrainConfig& config, const std::vector<UtteranceRecord>& train,
                            const std::vector<UtteranceRecord>& eval, const ModalityDims& dims,
                            int classes) {
  config.validate();
  if (train.empty() || eval.empty()) throw std::invalid_argument("run_pipeline: empty split");
  const auto start = std::chrono::steady_clock::now();
  PipelineResult r;
  const Matrix train_raw = feature_matrix(train, dims);
  const std::vector<int> train_labels = record_labels(train);
  const auto train_videos = group_by_video(train);

  if (config.joint) {
    JointResult j = train_joint(config, train_raw, train_labels, train_videos, dims, classes);
    r.fusion = std::move(j.fusion);
    r.classifier = std::move(j.classifier);
    r.elbo_trace = std::move(j.elbo_trace);
    r.clf_trace = std::move(j.clf_trace);
  } else {
    FusionTrainResult f = train_fusion(config, train_raw, dims);
    r.fusion = std::move(f.fusion);
    r.elbo_trace = std::move(f.trace);
    Rng latent_rng(derive_seed(config.seed, kTrainLatentStream));
    const Matrix fused = r.fusion.fuse(train_raw, config.latent_mode, &latent_rng);
    ClassifierTrainResult c =
        train_classifier(config, fused, train_labels, train_videos, classes);
    r.classifier = std::move(c.model);
    r.clf_trace = std::move(c.trace);
  }

  Rng eval_rng(derive_seed(config.seed, kEvalLatentStream));
  const Matrix eval_fused = r.fusion.fuse(feature_matrix(eval, dims), config.latent_mode, &eval_rng);
  r.predictions = r.classifier.predict(eval_fused, group_by_video(eval));
  r.metrics = evaluate(r.predictions, record_labels(eval), classes);
  if (config.report_timing) {
    r.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return r;
}

// ---------------------------------------------------------------------------

HoldoutSplit holdout_split(const std::vector<UtteranceRecord>& records, double fraction,
                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("holdout fraction must be in (0, 1)");
  const auto videos = group_by_video(records);
  if (videos.size() < 2) {
    throw std::invalid_argument("holdout split needs at least two videos");
  }
  std::vector<std::size_t> order(videos.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kStreamHoldout));
  shuffle_indices(order, rng);
  auto held = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(videos.size())));
  held = std::clamp<std::size_t>(held, 1, videos.size() - 1);
  std::vector<bool> is_held(videos.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_held[order[i]] = true;
  std::vector<bool> record_held(records.size(), false);
  for (std::size_t v = 0; v < videos.size(); ++v)
    if (is_held[v])
      for (std::size_t i : videos[v].record_indices) record_held[i] = true;
  HoldoutSplit split;
  for (std::size_t i = 0; i < records.size(); ++i)
    (record_held[i] ? split.holdout : split.train).push_back(records[i]);
  return split;
}

GridSpec GridSpec::parse(const KeyValues& kv) {
  GridSpec g;
  for (const auto& [key, value] : kv) {
    const auto items = split_list(value);
    if (key == "d_h") {
      for (const auto& s : items) g.d_h.push_back(parse_size(key, s));
    } else if (key == "d_l") {
      for (const auto& s : items) g.d_l.push_back(parse_size(key, s));
    } else if (key == "learning_rate" || key == "lr") {
      for (const auto& s : items) g.learning_rate.push_back(parse_double(key, s));
    } else {
      throw ConfigError("unknown grid key '" + key + "'");
    }
  }
  return g;
}

namespace {

std::string cell_label(const GridCell& c) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "grid cell %zu (d_h=%zu, d_l=%zu, lr=%g)", c.index, c.config.d_h,
                c.config.d_l, c.config.learning_rate);
  return buf;
}

bool better(const GridCell& a, const GridCell& b) {
  if (a.metrics.weighted_f1 != b.metrics.weighted_f1)
    return a.metrics.weighted_f1 > b.metrics.weighted_f1;
  if (a.config.d_h != b.config.d_h) return a.config.d_h < b.config.d_h;
  if (a.config.d_l != b.config.d_l) return a.config.d_l < b.config.d_l;
  return a.config.learning_rate < b.config.learning_rate;
}

}  // namespace

GridResult grid_search(const TrainConfig& base, const GridSpec& grid,
                       const std::vector<UtteranceRecord>& train,
                       const std::vector<UtteranceRecord>& val, const ModalityDims& dims,
                       int classes) {
  if (grid.size() == 0) throw std::invalid_argument("grid search needs a nonempty grid");
  GridResult result;
  result.used_validation = !val.empty();
  HoldoutSplit split;
  if (result.used_validation) {
    split.train = train;
    split.holdout = val;
  } else {
    split = holdout_split(train, 0.1, base.seed);
  }

  for (std::size_t h : grid.d_h)
    for (std::size_t l : grid.d_l)
      for (double lr : grid.learning_rate) {
        GridCell cell;
        cell.index = result.cells.size();
        cell.config = base;
        cell.config.d_h = h;
        cell.config.d_l = l;
        cell.config.learning_rate = lr;
        cell.config.clf_learning_rate = lr;
        cell.config.seed = derive_seed(base.seed, cell.index);
        result.cells.push_back(std::move(cell));
      }

  const auto n = static_cast<long>(result.cells.size());
  std::vector<std::exception_ptr> failures(result.cells.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    GridCell& cell = result.cells[static_cast<std::size_t>(i)];
    try {
      cell.metrics = run_pipeline(cell.config, split.train, split.holdout, dims, classes).metrics;
    } catch (const TrainingError& e) {
      cell.diverged = true;
      cell.error = e.what();
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error(cell_label(result.cells[i]) + ": " + e.what());
    }
  }

  const GridCell* best = nullptr;
  for (const GridCell& c : result.cells) {
    if (c.diverged) continue;
    if (best == nullptr || better(c, *best)) best = &c;
  }
  if (best == nullptr) {
    throw TrainingError("every grid cell diverged; first: " + cell_label(result.cells[0]) + ": " +
                            result.cells[0].error,
                        0, 0);
  }
  result.best = best->index;
  return result;
}

// ---------------------------------------------------------------------------

std::string latents_csv(const FusionModel& fusion, const std::vector<UtteranceRecord>& records,
                        const ModalityDims& dims) {
  const Matrix z = fusion.fuse(feature_matrix(records, dims), LatentMode::kMean);
  std::string out = "video_id,utterance_index,label";
  for (std::size_t k = 0; k < z.rows(); ++k) out += ",z_" + std::to_string(k);
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const UtteranceRecord& r = records[i];
    out += r.video_id + ',' + std::to_string(r.utterance_index) + ',' + std::to_string(r.label);
    for (std::size_t k = 0; k < z.rows(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.17g", z(k, i));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void export_latents(const FusionModel& fusion, const std::vector<UtteranceRecord>& records,
                    const ModalityDims& dims, const std::filesystem::path& path) {
  write_file_bytes(path, latents_csv(fusion, records, dims));
}

}  // namespace mmfusion
