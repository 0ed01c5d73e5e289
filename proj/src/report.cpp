#include "mmfusion/report.hpp"

#include <cstdio>
#include <sstream>

namespace mmfusion {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string label_name(const RunReport& r, std::size_t c) {
  return c < r.label_names.size() ? r.label_names[c] : std::to_string(c);
}

}  // namespace

std::string format_report(const RunReport& r) {
  std::ostringstream os;
  const Metrics& m = r.metrics;
  os << "# run report\n";
  if (!r.dataset.empty()) os << "dataset: " << r.dataset << "\n";
  os << "seed: " << r.config.seed << "\n";
  os << "config_hash: " << r.config.hash() << "\n";
  os << "elapsed_s: " << fmt("%.3f", r.elapsed_s) << "\n\n";

  os << "[config]\n" << r.config.to_text() << "\n";

  os << "[metrics]\n";
  os << "utterances: " << m.count << "\n";
  os << "accuracy: " << fmt("%.6f", m.accuracy) << "\n";
  os << "weighted_f1: " << fmt("%.6f", m.weighted_f1) << "\n";
  os << "macro_f1: " << fmt("%.6f", m.macro_f1) << "\n\n";

  os << "[per_class]\n";
  os << "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const ClassMetrics& cm = m.per_class[c];
    os << label_name(r, c) << ',' << fmt("%.6f", cm.precision) << ',' << fmt("%.6f", cm.recall)
       << ',' << fmt("%.6f", cm.f1) << ',' << cm.support << "\n";
  }
  os << "\n[confusion]  # rows: true class, columns: predicted\n";
  os << "true\\pred";
  for (std::size_t c = 0; c < m.confusion.size(); ++c) os << ',' << label_name(r, c);
  os << "\n";
  for (std::size_t c = 0; c < m.confusion.size(); ++c) {
    os << label_name(r, c);
    for (std::size_t v : m.confusion[c]) os << ',' << v;
    os << "\n";
  }

  os << "\n[elbo_trace]\n";
  if (!r.elbo_trace.empty()) os << "epoch,total,recon,kl\n";
  for (std::size_t e = 0; e < r.elbo_trace.size(); ++e) {
    const ElboBreakdown& b = r.elbo_trace[e];
    os << e + 1 << ',' << fmt("%.9g", b.total_loss) << ',' << fmt("%.9g", b.recon_term) << ','
       << fmt("%.9g", b.kl_term) << "\n";
  }
  os << "\n[classifier_trace]\n";
  if (!r.clf_trace.empty()) os << "epoch,cross_entropy\n";
  for (std::size_t e = 0; e < r.clf_trace.size(); ++e)
    os << e + 1 << ',' << fmt("%.9g", r.clf_trace[e]) << "\n";
  return os.str();
}

std::string summary_row(const RunReport& r) {
  std::ostringstream os;
  os << r.config.hash() << ',' << r.config.seed << ',' << fmt("%.17g", r.metrics.weighted_f1)
     << ',' << fmt("%.17g", r.metrics.macro_f1) << ',' << fmt("%.17g", r.metrics.accuracy) << ','
     << fmt("%.6f", r.elapsed_s);
  return os.str();
}

std::vector<SummaryRow> parse_summary(const std::string& text) {
  std::vector<SummaryRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == kSummaryHeader) continue;
    const auto fields = split_list(line);
    if (fields.size() != 6) {
      throw std::invalid_argument("summary line " + std::to_string(lineno) +
                                  ": expected 6 fields");
    }
    SummaryRow r;
    r.config_hash = fields[0];
    r.seed = parse_u64("seed", fields[1]);
    r.weighted_f1 = parse_double("weighted_f1", fields[2]);
    r.macro_f1 = parse_double("macro_f1", fields[3]);
    r.accuracy = parse_double("accuracy", fields[4]);
    r.elapsed_s = parse_double("elapsed_s", fields[5]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<double> read_scores(const std::string& text) {
  if (text.find(',') != std::string::npos) {
    std::vector<double> out;
    for (const SummaryRow& r : parse_summary(text)) out.push_back(r.weighted_f1);
    return out;
  }
  std::vector<double> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto items = split_list(line, ' ');
    for (const auto& s : items) {
      if (s[0] == '#') break;
      out.push_back(parse_double("score", s));
    }
  }
  return out;
}

}  // namespace mmfusion
