#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mmfusion/harness.hpp"
#include "mmfusion/report.hpp"
#include "mmfusion/synth.hpp"

using namespace mmfusion;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("mmfusion_harness_" + std::to_string(::getpid()) + "_" + name);
}

SyntheticData small_data(std::uint64_t seed = 3, std::size_t lag = 0) {
  SyntheticConfig s;
  s.seed = seed;
  s.train_videos = 30;
  s.test_videos = 10;
  s.label_lag = lag;
  return synth_generate(s);
}

const ModalityDims kDims{8, 8, 8};

TrainConfig small_config() {
  TrainConfig c;
  c.d_h = 16;
  c.d_z = 4;
  c.d_l = 6;
  c.epochs = 5;
  c.clf_epochs = 5;
  c.batch_size = 50;
  c.report_timing = false;
  return c;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST(Normalizer, StandardizesAndCentresConstantDims) {
  const Matrix x{{1.0, 3.0, 5.0}, {2.0, 2.0, 2.0}};
  const FeatureNormalizer n = FeatureNormalizer::fit(x);
  ASSERT_TRUE(n.active());
  Matrix y = x;
  n.apply(y);
  EXPECT_NEAR(y(0, 0) + y(0, 1) + y(0, 2), 0.0, 1e-15);
  EXPECT_NEAR((y(0, 0) * y(0, 0) + y(0, 1) * y(0, 1) + y(0, 2) * y(0, 2)) / 3.0, 1.0, 1e-12);
  EXPECT_EQ(y(1, 0), 0.0);
  EXPECT_EQ(n.inv_std[1], 1.0);
  Matrix untouched = x;
  FeatureNormalizer{}.apply(untouched);
  EXPECT_EQ(untouched, x);
}

TEST(FeatureMatrix, ColumnsFollowRecords) {
  const SyntheticData d = small_data();
  const Matrix f = feature_matrix(d.train, kDims);
  ASSERT_EQ(f.cols(), d.train.size());
  EXPECT_EQ(f(0, 3), d.train[3].features.text[0]);
  EXPECT_EQ(f(8, 3), d.train[3].features.audio[0]);
  EXPECT_EQ(f(23, 3), d.train[3].features.visual[7]);
  EXPECT_EQ(record_labels(d.train)[5], d.train[5].label);
}

TEST(TrainFusion, ZeroEpochsReturnsInitialModel) {
  TrainConfig c = small_config();
  c.epochs = 0;
  const Matrix raw = feature_matrix(small_data().train, kDims);
  const FusionTrainResult a = train_fusion(c, raw, kDims);
  EXPECT_TRUE(a.trace.empty());
  c.epochs = 1;
  const FusionTrainResult b = train_fusion(c, raw, kDims);
  ASSERT_EQ(b.trace.size(), 1u);
  // Same initialization, then one epoch of updates.
  EXPECT_NE(a.fusion.fuse(raw), b.fusion.fuse(raw));
}

TEST(TrainFusion, DeterministicAndDecreasing) {
  TrainConfig c = small_config();
  c.epochs = 30;
  c.learning_rate = 0.005;
  const Matrix raw = feature_matrix(small_data().train, kDims);
  const FusionTrainResult a = train_fusion(c, raw, kDims), b = train_fusion(c, raw, kDims);
  ASSERT_EQ(a.trace.size(), 30u);
  for (std::size_t e = 0; e < a.trace.size(); ++e) {
    EXPECT_EQ(a.trace[e].total_loss, b.trace[e].total_loss);
    EXPECT_GE(a.trace[e].kl_term, 0.0);
  }
  EXPECT_LT(a.trace.back().total_loss, a.trace.front().total_loss);
  c.seed = 2;
  EXPECT_NE(train_fusion(c, raw, kDims).trace.back().total_loss, a.trace.back().total_loss);
}

TEST(TrainFusion, AutoencoderHasNoKl) {
  TrainConfig c = small_config();
  c.fusion = FusionKind::kAe;
  const FusionTrainResult r = train_fusion(c, feature_matrix(small_data().train, kDims), kDims);
  for (const auto& e : r.trace) EXPECT_EQ(e.kl_term, 0.0);
}

TEST(TrainFusion, ConcatOnlyFitsNormalizer) {
  TrainConfig c = small_config();
  c.fusion = FusionKind::kConcat;
  const Matrix raw = feature_matrix(small_data().train, kDims);
  const FusionTrainResult r = train_fusion(c, raw, kDims);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.fusion.output_dim(kDims), 24u);
  EXPECT_EQ(r.fusion.fuse(raw), raw);
}

TEST(TrainFusion, NonFiniteLossReportsEpochAndBatch) {
  TrainConfig c = small_config();
  c.batch_size = 1000;  // single batch per epoch
  Matrix raw = feature_matrix(small_data().train, kDims);
  raw(2, 7) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_fusion(c, raw, kDims);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_EQ(e.batch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(TrainClassifier, LogisticRegressionSeparatesLinearData) {
  Rng rng(12);
  const std::size_t n = 400;
  Matrix x = gaussian_sample(rng, 3, n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = x(0, i) - 2.0 * x(1, i) + 0.5 * x(2, i);
    if (std::fabs(s) < 0.2) x(0, i) += s > 0 ? 0.4 : -0.4;  // margin
    y[i] = x(0, i) - 2.0 * x(1, i) + 0.5 * x(2, i) > 0 ? 1 : 0;
  }
  TrainConfig c;
  c.clf_epochs = 100;
  c.clf_learning_rate = 0.05;
  c.batch_size = 50;
  const ClassifierTrainResult r = train_classifier(c, x, y, {}, 2);
  EXPECT_EQ(r.trace.size(), 100u);
  EXPECT_LT(r.trace.back(), r.trace.front());
  const std::vector<int> pred = r.model.predict(x, {});
  EXPECT_GT(evaluate(pred, y, 2).accuracy, 0.99);
}

TEST(TrainClassifier, BcLstmPredictsEveryUtterance) {
  const SyntheticData d = small_data(4, 1);
  TrainConfig c = small_config();
  c.classifier = ClassifierKind::kBcLstm;
  c.fusion = FusionKind::kConcat;
  const PipelineResult r = run_pipeline(c, d.train, d.test, kDims, 2);
  EXPECT_EQ(r.predictions.size(), d.test.size());
  EXPECT_EQ(r.clf_trace.size(), 5u);
  EXPECT_EQ(r.metrics.count, d.test.size());
}

TEST(Pipeline, ByteIdenticalReportsWithoutTiming) {
  const SyntheticData d = small_data();
  TrainConfig c = small_config();
  c.seed = 7;
  auto report = [&] {
    const PipelineResult r = run_pipeline(c, d.train, d.test, kDims, 2);
    EXPECT_EQ(r.elapsed_s, 0.0);
    RunReport rep{"synthetic", c, {"class0", "class1"}, r.metrics, r.elbo_trace, r.clf_trace,
                  r.elapsed_s};
    return format_report(rep) + summary_row(rep);
  };
  EXPECT_EQ(report(), report());
}

TEST(Pipeline, SampleModeAndJointRun) {
  const SyntheticData d = small_data();
  TrainConfig c = small_config();
  c.latent_mode = LatentMode::kSample;
  const PipelineResult a = run_pipeline(c, d.train, d.test, kDims, 2);
  EXPECT_EQ(a.predictions.size(), d.test.size());
  c.latent_mode = LatentMode::kMean;
  c.joint = true;
  const PipelineResult b = run_pipeline(c, d.train, d.test, kDims, 2);
  EXPECT_EQ(b.elbo_trace.size(), c.epochs);
  EXPECT_EQ(b.predictions.size(), d.test.size());
}

TEST(Holdout, SplitsWholeVideos) {
  const SyntheticData d = small_data();
  const HoldoutSplit s = holdout_split(d.train, 0.1, 5);
  EXPECT_EQ(s.train.size() + s.holdout.size(), d.train.size());
  ASSERT_FALSE(s.holdout.empty());
  std::set<std::string> train_ids, held_ids;
  for (const auto& r : s.train) train_ids.insert(r.video_id);
  for (const auto& r : s.holdout) held_ids.insert(r.video_id);
  for (const auto& id : held_ids) EXPECT_EQ(train_ids.count(id), 0u) << id;
  EXPECT_EQ(held_ids.size(), 3u);  // 10% of 30 videos
  EXPECT_EQ(holdout_split(d.train, 0.1, 5).holdout, s.holdout);

  std::vector<UtteranceRecord> one_video(d.train.begin(), d.train.begin() + 3);
  for (auto& r : one_video) r.video_id = "only";
  EXPECT_THROW(holdout_split(one_video, 0.1, 1), std::invalid_argument);
  std::vector<UtteranceRecord> two(d.train.begin(), d.train.begin() + 2);
  two[0].video_id = "a";
  two[0].utterance_index = 0;
  two[1].video_id = "b";
  two[1].utterance_index = 0;
  EXPECT_EQ(holdout_split(two, 0.1, 1).holdout.size(), 1u);
}

TEST(Grid, ParseSpec) {
  const GridSpec g = GridSpec::parse({{"d_h", "16, 32"}, {"d_l", "8"}, {"lr", "0.001,0.01"}});
  EXPECT_EQ(g.d_h, (std::vector<std::size_t>{16, 32}));
  EXPECT_EQ(g.d_l, (std::vector<std::size_t>{8}));
  EXPECT_EQ(g.learning_rate, (std::vector<double>{0.001, 0.01}));
  EXPECT_EQ(g.size(), 4u);
  EXPECT_THROW(GridSpec::parse({{"depth", "3"}}), ConfigError);
}

TEST(Grid, SingleCellMatchesSingleRun) {
  const SyntheticData d = small_data();
  const TrainConfig base = small_config();
  GridSpec g;
  g.d_h = {base.d_h};
  g.d_l = {base.d_l};
  g.learning_rate = {base.learning_rate};
  const GridResult r = grid_search(base, g, d.train, d.test, kDims, 2);
  ASSERT_EQ(r.cells.size(), 1u);
  EXPECT_TRUE(r.used_validation);
  EXPECT_EQ(r.best, 0u);
  TrainConfig single = base;
  single.seed = derive_seed(base.seed, 0);
  const PipelineResult p = run_pipeline(single, d.train, d.test, kDims, 2);
  EXPECT_EQ(r.cells[0].metrics.weighted_f1, p.metrics.weighted_f1);
  EXPECT_EQ(r.cells[0].metrics.confusion, p.metrics.confusion);
  EXPECT_EQ(r.best_config().to_text(), single.to_text());
}

TEST(Grid, DivergentLearningRateNeverSelected) {
  const SyntheticData d = small_data();
  TrainConfig base = small_config();
  base.epochs = 20;
  base.clf_epochs = 40;
  GridSpec g;
  g.d_h = {16};
  g.d_l = {6};
  g.learning_rate = {0.01, 10.0};
  const GridResult r = grid_search(base, g, d.train, {}, kDims, 2);
  EXPECT_FALSE(r.used_validation);
  ASSERT_EQ(r.cells.size(), g.size());
  EXPECT_EQ(r.best_config().learning_rate, 0.01);
  for (const GridCell& c : r.cells) {
    if (!c.diverged) EXPECT_LE(c.metrics.weighted_f1, r.cells[r.best].metrics.weighted_f1);
  }
}

TEST(Grid, ReportCountAndOrder) {
  const SyntheticData d = small_data();
  TrainConfig base = small_config();
  base.epochs = 1;
  base.clf_epochs = 1;
  GridSpec g;
  g.d_h = {8, 12};
  g.d_l = {4};
  g.learning_rate = {0.001, 0.002, 0.003};
  const GridResult r = grid_search(base, g, d.train, {}, kDims, 2);
  ASSERT_EQ(r.cells.size(), 6u);
  for (std::size_t i = 0; i < r.cells.size(); ++i) EXPECT_EQ(r.cells[i].index, i);
  EXPECT_EQ(r.cells[0].config.d_h, 8u);
  EXPECT_EQ(r.cells[3].config.d_h, 12u);
  EXPECT_EQ(r.cells[4].config.learning_rate, 0.002);
  EXPECT_THROW(grid_search(base, GridSpec{}, d.train, {}, kDims, 2), std::invalid_argument);
}

TEST(Grid, NonTrainingFailureIsTaggedWithCell) {
  const SyntheticData d = small_data();
  TrainConfig base = small_config();
  GridSpec g;
  g.d_h = {16};
  g.d_l = {6};
  g.learning_rate = {0.001};
  try {
    grid_search(base, g, d.train, d.test, ModalityDims{8, 8, 7}, 2);
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("grid cell 0"), std::string::npos) << e.what();
  }
}

TEST(ExportLatents, FormatAndDeterminism) {
  const SyntheticData d = small_data();
  TrainConfig c = small_config();
  c.d_z = 100;
  const FusionModel f = train_fusion(c, feature_matrix(d.train, kDims), kDims).fusion;
  const std::string csv = latents_csv(f, d.test, kDims);
  const auto lines = lines_of(csv);
  ASSERT_EQ(lines.size(), d.test.size() + 1);
  EXPECT_EQ(split_commas(lines[0]).size(), 103u);
  EXPECT_EQ(split_commas(lines[0])[3], "z_0");
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const auto fields = split_commas(lines[i + 1]);
    ASSERT_EQ(fields.size(), 103u);
    EXPECT_EQ(fields[0], d.test[i].video_id);
    EXPECT_EQ(std::stoi(fields[1]), d.test[i].utterance_index);
    EXPECT_EQ(std::stoi(fields[2]), d.test[i].label);
  }
  const FusionModel again = train_fusion(c, feature_matrix(d.train, kDims), kDims).fusion;
  const fs::path p1 = temp_path("l1.csv"), p2 = temp_path("l2.csv");
  export_latents(f, d.test, kDims, p1);
  export_latents(again, d.test, kDims, p2);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(ba, csv);
  EXPECT_EQ(ba, bb);
  fs::remove(p1);
  fs::remove(p2);
}

TEST(Checkpoints, FusionModelRoundTrip) {
  const SyntheticData d = small_data();
  for (FusionKind kind : {FusionKind::kVae, FusionKind::kAe, FusionKind::kConcat}) {
    TrainConfig c = small_config();
    c.fusion = kind;
    c.normalize = true;
    const Matrix raw = feature_matrix(d.train, kDims);
    FusionModel f = train_fusion(c, raw, kDims).fusion;
    const fs::path p = temp_path("fusion.ckpt");
    f.save(p);
    const FusionModel back = FusionModel::load(p, kDims, kind);
    EXPECT_EQ(back.fuse(raw), f.fuse(raw)) << to_string(kind);
    fs::remove(p);
  }
}

TEST(Checkpoints, ClassifierModelRoundTrip) {
  const SyntheticData d = small_data();
  for (ClassifierKind kind : {ClassifierKind::kLr, ClassifierKind::kBcLstm}) {
    TrainConfig c = small_config();
    c.classifier = kind;
    c.fusion = FusionKind::kConcat;
    const Matrix x = feature_matrix(d.train, kDims);
    const auto videos = group_by_video(d.train);
    ClassifierModel m = train_classifier(c, x, record_labels(d.train), videos, 2).model;
    const fs::path p = temp_path("clf.ckpt");
    m.save(p);
    const ClassifierModel back = ClassifierModel::load(p, kind, 24, 2);
    EXPECT_EQ(back.predict(x, videos), m.predict(x, videos)) << to_string(kind);
    if (kind == ClassifierKind::kBcLstm) EXPECT_EQ(back.lstm.forward_cell.wh.value, m.lstm.forward_cell.wh.value);
    fs::remove(p);
  }
}

TEST(Report, SectionsAndSummaryRoundTrip) {
  RunReport rep;
  rep.dataset = "synthetic";
  rep.config = small_config();
  rep.config.seed = 11;
  rep.label_names = {"neg", "pos"};
  rep.metrics = evaluate(std::vector<int>{0, 1, 1, 0}, std::vector<int>{0, 1, 0, 0}, 2);
  rep.elbo_trace = {ElboBreakdown{1.5, 0.5, 1.0, 2.0}};
  rep.clf_trace = {0.69, 0.5};
  rep.elapsed_s = 1.25;
  const std::string text = format_report(rep);
  for (const char* section : {"[config]", "[metrics]", "[per_class]", "[confusion]",
                              "[elbo_trace]", "[classifier_trace]"}) {
    EXPECT_NE(text.find(section), std::string::npos) << section;
  }
  const std::string csv = std::string(kSummaryHeader) + "\n" + summary_row(rep) + "\n";
  const auto rows = parse_summary(csv);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].config_hash, rep.config.hash());
  EXPECT_EQ(rows[0].seed, 11u);
  EXPECT_EQ(rows[0].weighted_f1, rep.metrics.weighted_f1);
  EXPECT_EQ(rows[0].accuracy, 0.75);
  EXPECT_NEAR(rows[0].elapsed_s, 1.25, 1e-9);
  EXPECT_EQ(read_scores(csv), (std::vector<double>{rep.metrics.weighted_f1}));
  EXPECT_EQ(read_scores("0.5\n0.25 0.125\n"), (std::vector<double>{0.5, 0.25, 0.125}));
}

TEST(Config, HashIgnoresSeedAndTextRoundTrips) {
  TrainConfig a = small_config(), b = small_config();
  b.seed = 99;
  EXPECT_EQ(a.hash(), b.hash());
  b.d_h = 17;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  const TrainConfig back = apply_config({}, parse_key_values(a.to_text()));
  EXPECT_EQ(back.to_text(), a.to_text());
  EXPECT_THROW(apply_config({}, {{"learning_rat", "0.1"}}), ConfigError);
  TrainConfig bad;
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}
