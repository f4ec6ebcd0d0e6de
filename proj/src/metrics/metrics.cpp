#include "metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "common/errors.hpp"

namespace lesion {

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                 std::size_t k) {
  if (predicted.size() != truth.size())
    throw DimensionError("confusion_matrix: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= k || predicted[i] >= k) throw ConfigError("confusion_matrix: label out of range");
    ++cm.at(truth[i], predicted[i]);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  return n == 0 ? 0.0 : static_cast<double>(cm.trace()) / static_cast<double>(n);
}

namespace {

struct ClassCounts {
  std::int64_t tp = 0, fp = 0, fn = 0;
};

ClassCounts class_counts(const ConfusionMatrix& cm, std::size_t c) {
  ClassCounts out;
  out.tp = cm.at(c, c);
  for (std::size_t j = 0; j < cm.classes(); ++j) {
    if (j == c) continue;
    out.fp += cm.at(j, c);
    out.fn += cm.at(c, j);
  }
  return out;
}

double safe_ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double precision_macro(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) return 0;
  double acc = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto cc = class_counts(cm, c);
    acc += safe_ratio(cc.tp, cc.tp + cc.fp);
  }
  return acc / static_cast<double>(cm.classes());
}

double f1_macro(const ConfusionMatrix& cm) {
  if (cm.classes() == 0) return 0;
  double acc = 0;
  for (std::size_t c = 0; c < cm.classes(); ++c) {
    const auto cc = class_counts(cm, c);
    const double p = safe_ratio(cc.tp, cc.tp + cc.fp);
    const double r = safe_ratio(cc.tp, cc.tp + cc.fn);
    acc += (p + r) == 0 ? 0.0 : 2 * p * r / (p + r);
  }
  return acc / static_cast<double>(cm.classes());
}

double roc_auc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw DimensionError("roc_auc_binary: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 2*rank over positives; ties share the average rank. Doubling
  // keeps everything integral.
  std::int64_t positives = 0, negatives = 0, twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const auto twice_avg_rank = static_cast<std::int64_t>(i + 1 + j);  // (i+1 + j) = 2 * mean(i+1..j)
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        ++positives;
        twice_rank_sum += twice_avg_rank;
      } else {
        ++negatives;
      }
    }
    i = j;
  }
  if (positives == 0 || negatives == 0)
    throw UndefinedMetricError("AUC needs at least one positive and one negative label");
  const std::int64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double roc_auc_ovr_macro(std::span<const double> probs, std::size_t k, std::span<const std::size_t> labels) {
  const std::size_t n = labels.size();
  if (probs.size() != n * k)
    throw DimensionError("roc_auc_ovr_macro: " + std::to_string(probs.size()) + " probabilities for " +
                         std::to_string(n) + "x" + std::to_string(k));
  double acc = 0;
  std::vector<double> scores(n);
  std::vector<int> binary(n);
  for (std::size_t c = 0; c < k; ++c) {
    bool present = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = probs[i * k + c];
      binary[i] = labels[i] == c ? 1 : 0;
      present = present || binary[i];
    }
    if (!present) throw UndefinedMetricError("AUC undefined: class " + std::to_string(c) + " has no samples");
    acc += roc_auc_binary(scores, binary);
  }
  return acc / static_cast<double>(k);
}

MetricsReport compute_report(std::span<const double> probs, std::size_t k, std::span<const std::size_t> labels) {
  const std::size_t n = labels.size();
  if (probs.size() != n * k) throw DimensionError("compute_report: probability array does not match labels");
  std::vector<std::size_t> predicted(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = probs.subspan(i * k, k);
    predicted[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  MetricsReport report;
  report.n = n;
  report.confusion = confusion_matrix(predicted, labels, k);
  report.acc = accuracy(report.confusion);
  report.precision_macro = precision_macro(report.confusion);
  report.f1_macro = f1_macro(report.confusion);
  try {
    report.auc_macro = roc_auc_ovr_macro(probs, k, labels);
  } catch (const UndefinedMetricError&) {
    report.auc_macro.reset();
  }
  return report;
}

namespace {
std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
}  // namespace

std::string format_report_lines(const MetricsReport& report) {
  std::ostringstream out;
  out << "n=" << report.n << '\n';
  out << "acc=" << fixed(report.acc) << '\n';
  out << "auc=" << (report.auc_macro ? fixed(*report.auc_macro) : std::string("undefined")) << '\n';
  out << "f1=" << fixed(report.f1_macro) << '\n';
  out << "precision=" << fixed(report.precision_macro) << '\n';
  for (std::size_t i = 0; i < report.confusion.classes(); ++i) {
    out << "confusion." << i << '=';
    for (std::size_t j = 0; j < report.confusion.classes(); ++j) out << (j ? "," : "") << report.confusion.at(i, j);
    out << '\n';
  }
  return out.str();
}

std::string format_report_table(const MetricsReport& report) {
  char buf[160];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf, "%-10s%-10s%-10s%-10s\n", "ACC", "AUC", "F1-Score", "Precision");
  out << buf;
  std::string auc = "n/a";
  if (report.auc_macro) {
    char v[32];
    std::snprintf(v, sizeof v, "%.3f", *report.auc_macro);
    auc = v;
  }
  std::snprintf(buf, sizeof buf, "%-10.3f%-10s%-10.3f%-10.3f\n", report.acc, auc.c_str(), report.f1_macro,
                report.precision_macro);
  out << buf;
  return out.str();
}

}  // namespace lesion
