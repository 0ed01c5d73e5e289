#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mmfusion/checkpoint.hpp"
#include "mmfusion/dataset.hpp"
#include "mmfusion/feature_io.hpp"
#include "mmfusion/harness.hpp"
#include "mmfusion/report.hpp"
#include "mmfusion/synth.hpp"

namespace fs = std::filesystem;
using namespace mmfusion;

namespace {

struct CommonArgs {
  std::string manifest;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--manifest", a.manifest, "dataset manifest (key=value file)");
  cmd->add_option("--config", a.config, "configuration file (key=value)");
  cmd->add_option("--seed", a.seed, "random seed, overrides the config file");
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
}

DatasetManifest need_manifest(const CommonArgs& a) {
  if (a.manifest.empty()) throw CLI::ValidationError("--manifest", "a manifest is required");
  return read_manifest(a.manifest);
}

/// Preset widths for known corpora, then the config file, then --seed.
TrainConfig load_config(const CommonArgs& a, const DatasetManifest* manifest) {
  TrainConfig c;
  if (manifest) {
    for (const DatasetPreset& p : dataset_presets()) {
      if (p.name == manifest->name) {
        c.d_h = p.vae_hidden;
        c.d_z = p.vae_latent;
        c.d_l = p.lstm_dim;
      }
    }
  }
  if (!a.config.empty()) c = read_train_config(a.config, c);
  if (a.seed) c.seed = *a.seed;
  c.validate();
  return c;
}

fs::path out_dir(const CommonArgs& a) {
  fs::create_directories(a.out);
  return a.out;
}

void write_text(const fs::path& p, const std::string& text) {
  write_file_bytes(p, text);
  std::cout << "wrote " << p.string() << "\n";
}

std::string elbo_trace_csv(const std::vector<ElboBreakdown>& trace) {
  std::string out = "epoch,total,recon,kl\n";
  char buf[128];
  for (std::size_t e = 0; e < trace.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e + 1, trace[e].total_loss,
                  trace[e].recon_term, trace[e].kl_term);
    out += buf;
  }
  return out;
}

std::string predictions_csv(const std::vector<UtteranceRecord>& records,
                            const std::vector<int>& predictions) {
  std::string out = "video_id,utterance_index,label,prediction\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out += records[i].video_id + ',' + std::to_string(records[i].utterance_index) + ',' +
           std::to_string(records[i].label) + ',' + std::to_string(predictions[i]) + '\n';
  }
  return out;
}

void write_run_outputs(const fs::path& dir, const RunReport& report) {
  write_text(dir / "report.txt", format_report(report));
  write_text(dir / "summary.csv", std::string(kSummaryHeader) + "\n" + summary_row(report) + "\n");
  std::printf("weighted_f1=%.4f macro_f1=%.4f accuracy=%.4f\n", report.metrics.weighted_f1,
              report.metrics.macro_f1, report.metrics.accuracy);
}

const std::vector<UtteranceRecord>& split_records(const Dataset& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "test") return d.test;
  if (split == "val") {
    if (d.val.empty()) throw std::invalid_argument("manifest has no validation split");
    return d.val;
  }
  throw std::invalid_argument("split must be train, test or val");
}

// ---------------------------------------------------------------------------

int cmd_synth(const CommonArgs& a, const std::string& format) {
  SyntheticConfig sc;
  if (!a.config.empty()) sc = apply_synth_config(sc, read_key_values(a.config));
  if (a.seed) sc.seed = *a.seed;
  sc.validate();
  const SyntheticData data = synth_generate(sc);
  const fs::path dir = out_dir(a);
  const fs::path manifest = write_synthetic_dataset(dir, data, sc, format == "binary");
  auto latents = [&](const std::vector<UtteranceRecord>& recs, const Matrix& u) {
    std::string out = "video_id,utterance_index,label";
    for (std::size_t k = 0; k < u.rows(); ++k) out += ",u_" + std::to_string(k);
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < recs.size(); ++i) {
      out += recs[i].video_id + ',' + std::to_string(recs[i].utterance_index) + ',' +
             std::to_string(recs[i].label);
      for (std::size_t k = 0; k < u.rows(); ++k) {
        std::snprintf(buf, sizeof buf, ",%.17g", u(k, i));
        out += buf;
      }
      out += '\n';
    }
    return out;
  };
  write_text(dir / "true_latents_train.csv", latents(data.train, data.train_latents));
  write_text(dir / "true_latents_test.csv", latents(data.test, data.test_latents));
  if (!data.val.empty()) write_text(dir / "true_latents_val.csv", latents(data.val, data.val_latents));
  std::cout << "wrote " << manifest.string() << " (" << data.train.size() << " train, "
            << data.test.size() << " test utterances)\n";
  return 0;
}

int cmd_train_vae(const CommonArgs& a) {
  const DatasetManifest m = need_manifest(a);
  TrainConfig c = load_config(a, &m);
  if (c.fusion == FusionKind::kConcat) {
    throw std::invalid_argument("train-vae needs fusion=vae or fusion=ae");
  }
  const Dataset d = load_dataset(m);
  FusionTrainResult r = train_fusion(c, feature_matrix(d.train, m.dims), m.dims);
  const fs::path dir = out_dir(a);
  r.fusion.save(dir / "fusion.ckpt");
  std::cout << "wrote " << (dir / "fusion.ckpt").string() << "\n";
  write_text(dir / "elbo_trace.csv", elbo_trace_csv(r.trace));
  write_text(dir / "config.txt", c.to_text());
  if (!r.trace.empty()) {
    std::printf("final epoch: total=%.6f recon=%.6f kl=%.6f\n", r.trace.back().total_loss,
                r.trace.back().recon_term, r.trace.back().kl_term);
  }
  return 0;
}

int cmd_extract(const CommonArgs& a, const std::string& fusion_path) {
  const DatasetManifest m = need_manifest(a);
  const TrainConfig c = load_config(a, &m);
  const Dataset d = load_dataset(m);
  const FusionModel fusion = FusionModel::load(fusion_path, m.dims, c.fusion);
  const fs::path dir = out_dir(a);
  DatasetManifest out = m;
  out.name = m.name + "-fused";
  out.dims = ModalityDims{fusion.output_dim(m.dims), 0, 0};
  Rng rng(derive_seed(c.seed, kEvalLatentStream));
  auto write = [&](const std::vector<UtteranceRecord>& recs, const std::string& split) {
    const Matrix z = fusion.fuse(feature_matrix(recs, m.dims), c.latent_mode, &rng);
    std::vector<UtteranceRecord> fused = recs;
    for (std::size_t i = 0; i < fused.size(); ++i) {
      fused[i].features = ModalityFeatures{z.col(i), {}, {}};
    }
    const fs::path p = dir / (split + ".mmf");
    write_features_binary(p, fused, out.dims, m.classes);
    std::cout << "wrote " << p.string() << "\n";
    return fs::path(split + ".mmf");
  };
  out.train_path = write(d.train, "train");
  out.test_path = write(d.test, "test");
  if (!d.val.empty()) out.val_path = write(d.val, "val");
  write_manifest(dir / "manifest.txt", out);
  std::cout << "wrote " << (dir / "manifest.txt").string() << "\n";
  return 0;
}

int cmd_train_clf(const CommonArgs& a, const std::string& fusion_path) {
  const DatasetManifest m = need_manifest(a);
  const TrainConfig c = load_config(a, &m);
  const Dataset d = load_dataset(m);
  const fs::path dir = out_dir(a);
  RunReport report;
  report.dataset = m.name;
  report.config = c;
  report.label_names = m.label_names;

  FusionModel fusion;
  ClassifierModel classifier;
  std::vector<int> predictions;
  if (fusion_path.empty()) {
    PipelineResult r = run_pipeline(c, d.train, d.test, m.dims, m.classes);
    fusion = std::move(r.fusion);
    classifier = std::move(r.classifier);
    predictions = std::move(r.predictions);
    report.metrics = r.metrics;
    report.elbo_trace = std::move(r.elbo_trace);
    report.clf_trace = std::move(r.clf_trace);
    report.elapsed_s = r.elapsed_s;
  } else {
    if (c.joint) throw std::invalid_argument("--fusion cannot be combined with joint=true");
    const auto start = std::chrono::steady_clock::now();
    fusion = FusionModel::load(fusion_path, m.dims, c.fusion);
    Rng train_rng(derive_seed(c.seed, kTrainLatentStream));
    const Matrix z = fusion.fuse(feature_matrix(d.train, m.dims), c.latent_mode, &train_rng);
    ClassifierTrainResult cr =
        train_classifier(c, z, record_labels(d.train), group_by_video(d.train), m.classes);
    classifier = std::move(cr.model);
    report.clf_trace = std::move(cr.trace);
    Rng eval_rng(derive_seed(c.seed, kEvalLatentStream));
    const Matrix zt = fusion.fuse(feature_matrix(d.test, m.dims), c.latent_mode, &eval_rng);
    predictions = classifier.predict(zt, group_by_video(d.test));
    report.metrics = evaluate(predictions, record_labels(d.test), m.classes);
    if (c.report_timing) {
      report.elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
  if (c.fusion != FusionKind::kConcat) {
    fusion.save(dir / "fusion.ckpt");
  }
  classifier.save(dir / "classifier.ckpt");
  write_text(dir / "predictions.csv", predictions_csv(d.test, predictions));
  write_run_outputs(dir, report);
  return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& predictions_path,
             const std::string& fusion_path, const std::string& classifier_path,
             const std::string& split) {
  const DatasetManifest m = need_manifest(a);
  const TrainConfig c = load_config(a, &m);
  RunReport report;
  report.dataset = m.name;
  report.config = c;
  report.label_names = m.label_names;
  if (!predictions_path.empty()) {
    std::vector<int> preds, targets;
    const std::string text = read_file_bytes(predictions_path);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line.rfind("video_id,utterance_index,label,prediction", 0) != 0) {
      throw std::invalid_argument(predictions_path +
                                  ": expected header video_id,utterance_index,label,prediction");
    }
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split_list(line);
      if (fields.size() != 4) throw std::invalid_argument("bad predictions row: " + line);
      targets.push_back(static_cast<int>(parse_size("label", fields[2])));
      preds.push_back(static_cast<int>(parse_size("prediction", fields[3])));
    }
    report.metrics = evaluate(preds, targets, m.classes);
  } else {
    if (classifier_path.empty()) {
      throw CLI::ValidationError("eval", "give --predictions or --classifier");
    }
    const Dataset d = load_dataset(m);
    const auto& records = split_records(d, split);
    FusionModel fusion;
    if (c.fusion != FusionKind::kConcat || !fusion_path.empty()) {
      if (fusion_path.empty()) throw CLI::ValidationError("eval", "--fusion is required");
      fusion = FusionModel::load(fusion_path, m.dims, c.fusion);
    }
    Rng rng(derive_seed(c.seed, kEvalLatentStream));
    const Matrix z = fusion.fuse(feature_matrix(records, m.dims), c.latent_mode, &rng);
    const ClassifierModel clf =
        ClassifierModel::load(classifier_path, c.classifier, z.rows(), m.classes);
    report.metrics =
        evaluate(clf.predict(z, group_by_video(records)), record_labels(records), m.classes);
  }
  write_run_outputs(out_dir(a), report);
  return 0;
}

int cmd_grid(const CommonArgs& a, const std::string& grid_path, bool retrain) {
  const DatasetManifest m = need_manifest(a);
  const TrainConfig c = load_config(a, &m);
  if (grid_path.empty()) throw CLI::ValidationError("--grid", "a grid file is required");
  const GridSpec spec = GridSpec::parse(read_key_values(grid_path));
  const Dataset d = load_dataset(m);
  const GridResult g = grid_search(c, spec, d.train, d.val, m.dims, m.classes);
  const fs::path dir = out_dir(a);
  std::string table = "cell,d_h,d_l,learning_rate,seed,status,weighted_f1,macro_f1,accuracy\n";
  char buf[256];
  for (const GridCell& cell : g.cells) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%llu,%s,%.17g,%.17g,%.17g\n", cell.index,
                  cell.config.d_h, cell.config.d_l, cell.config.learning_rate,
                  static_cast<unsigned long long>(cell.config.seed),
                  cell.diverged ? "diverged" : "ok", cell.metrics.weighted_f1,
                  cell.metrics.macro_f1, cell.metrics.accuracy);
    table += buf;
    if (cell.diverged) std::cerr << "cell " << cell.index << ": " << cell.error << "\n";
  }
  write_text(dir / "grid.csv", table);
  TrainConfig best = g.best_config();
  best.seed = c.seed;
  write_text(dir / "best_config.txt", best.to_text());
  std::printf("selected cell %zu (d_h=%zu d_l=%zu lr=%g) by %s weighted F1 %.4f\n", g.best,
              best.d_h, best.d_l, best.learning_rate,
              g.used_validation ? "validation" : "holdout", g.cells[g.best].metrics.weighted_f1);
  if (retrain) {
    PipelineResult r = run_pipeline(best, d.train, d.test, m.dims, m.classes);
    RunReport report;
    report.dataset = m.name;
    report.config = best;
    report.label_names = m.label_names;
    report.metrics = r.metrics;
    report.elbo_trace = std::move(r.elbo_trace);
    report.clf_trace = std::move(r.clf_trace);
    report.elapsed_s = r.elapsed_s;
    write_run_outputs(dir, report);
  }
  return 0;
}

int cmd_ttest(const CommonArgs& a, const std::string& path_a, const std::string& path_b) {
  const auto sa = read_scores(read_file_bytes(path_a));
  const auto sb = read_scores(read_file_bytes(path_b));
  const TTestResult r = paired_t_test(sa, sb);
  char buf[256];
  std::snprintf(buf, sizeof buf, "n=%zu\nmean_difference=%.17g\nt=%.17g\ndf=%zu\np=%.17g\n",
                sa.size(), r.mean_difference, r.t, r.df, r.p);
  std::cout << buf;
  if (a.out != ".") write_text(out_dir(a) / "ttest.txt", buf);
  return 0;
}

int cmd_export(const CommonArgs& a, const std::string& fusion_path, const std::string& split) {
  const DatasetManifest m = need_manifest(a);
  const TrainConfig c = load_config(a, &m);
  const Dataset d = load_dataset(m);
  FusionModel fusion;
  if (!fusion_path.empty()) fusion = FusionModel::load(fusion_path, m.dims, c.fusion);
  else if (c.fusion != FusionKind::kConcat) throw CLI::ValidationError("--fusion", "required");
  const fs::path p = out_dir(a) / ("latents_" + split + ".csv");
  export_latents(fusion, split_records(d, split), m.dims, p);
  std::cout << "wrote " << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational multimodal fusion: training, evaluation and analysis"};
  app.require_subcommand(1);

  CommonArgs synth_a, vae_a, extract_a, clf_a, eval_a, grid_a, ttest_a, export_a;
  std::string format = "csv";
  std::string fusion_path, predictions_path, classifier_path, grid_path, score_a, score_b;
  std::string split = "test";
  bool retrain = true;

  auto* synth = app.add_subcommand("synth", "generate a synthetic multimodal dataset");
  add_common(synth, synth_a);
  synth->add_option("--format", format, "csv or binary")
      ->check(CLI::IsMember({"csv", "binary"}))
      ->capture_default_str();

  auto* vae = app.add_subcommand("train-vae", "train the fusion model (VAE or AE)");
  add_common(vae, vae_a);

  auto* extract = app.add_subcommand("extract", "write fused features for every split");
  add_common(extract, extract_a);
  extract->add_option("--fusion", fusion_path, "fusion checkpoint from train-vae")->required();

  auto* clf = app.add_subcommand("train-clf", "train and evaluate a classifier");
  add_common(clf, clf_a);
  clf->add_option("--fusion", fusion_path, "reuse a trained fusion checkpoint");

  auto* ev = app.add_subcommand("eval", "compute metrics for predictions or a saved model");
  add_common(ev, eval_a);
  ev->add_option("--predictions", predictions_path, "predictions CSV from train-clf");
  ev->add_option("--fusion", fusion_path, "fusion checkpoint");
  ev->add_option("--classifier", classifier_path, "classifier checkpoint");
  ev->add_option("--split", split, "train, test or val")->capture_default_str();

  auto* grid = app.add_subcommand("grid", "grid search over d_h, d_l and learning rate");
  add_common(grid, grid_a);
  grid->add_option("--grid", grid_path, "grid file: d_h=..., d_l=..., learning_rate=...")
      ->required();
  grid->add_flag("--retrain,!--no-retrain", retrain,
                 "retrain the winner on the full train split and report on test");

  auto* tt = app.add_subcommand("ttest", "paired t-test between two score lists");
  add_common(tt, ttest_a);
  tt->add_option("a", score_a, "summary CSV or score list")->required();
  tt->add_option("b", score_b, "summary CSV or score list")->required();

  auto* ex = app.add_subcommand("export-latents", "write posterior means as CSV");
  add_common(ex, export_a);
  ex->add_option("--fusion", fusion_path, "fusion checkpoint");
  ex->add_option("--split", split, "train, test or val")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_a, format);
    if (vae->parsed()) return cmd_train_vae(vae_a);
    if (extract->parsed()) return cmd_extract(extract_a, fusion_path);
    if (clf->parsed()) return cmd_train_clf(clf_a, fusion_path);
    if (ev->parsed()) return cmd_eval(eval_a, predictions_path, fusion_path, classifier_path, split);
    if (grid->parsed()) return cmd_grid(grid_a, grid_path, retrain);
    if (tt->parsed()) return cmd_ttest(ttest_a, score_a, score_b);
    if (ex->parsed()) return cmd_export(export_a, fusion_path, split);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
