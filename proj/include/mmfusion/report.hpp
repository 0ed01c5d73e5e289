#pragma once

#include <string>
#include <vector>

#include "mmfusion/config.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/vae.hpp"

namespace mmfusion {

struct RunReport {
  std::string dataset;
  TrainConfig config;
  std::vector<std::string> label_names;
  Metrics metrics;
  std::vector<ElboBreakdown> elbo_trace;
  std::vector<double> clf_trace;
  double elapsed_s = 0.0;
};

/// Human-readable report: config, metrics, confusion matrix, traces.
std::string format_report(const RunReport& report);

inline constexpr const char* kSummaryHeader =
    "config_hash,seed,weighted_f1,macro_f1,accuracy,elapsed_s";

/// One CSV row matching kSummaryHeader, without a trailing newline.
std::string summary_row(const RunReport& report);

struct SummaryRow {
  std::string config_hash;
  std::uint64_t seed = 0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  double elapsed_s = 0.0;
};

/// Parses a summary CSV (header optional, may repeat between rows).
std::vector<SummaryRow> parse_summary(const std::string& text);

/// Reads a score list: a summary CSV (weighted_f1 column) or one number
/// per line.
std::vector<double> read_scores(const std::string& text);

}  // namespace mmfusion
