#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lesion {

// rows = true class, cols = predicted class
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

  std::size_t classes() const { return k_; }
  std::int64_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * k_ + pred]; }
  std::int64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * k_ + pred]; }
  std::int64_t total() const;
  std::int64_t trace() const;
  const std::vector<std::int64_t>& counts() const { return counts_; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t k_;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                                 std::size_t k);

double accuracy(const ConfusionMatrix& cm);
double precision_macro(const ConfusionMatrix& cm);
double f1_macro(const ConfusionMatrix& cm);

// Mann-Whitney statistic P(s+ > s-) + P(tie)/2, computed from average ranks.
double roc_auc_binary(std::span<const double> scores, std::span<const int> labels);

// Row-major n x k probabilities; unweighted mean of per-class one-vs-rest AUC.
double roc_auc_ovr_macro(std::span<const double> probs, std::size_t k, std::span<const std::size_t> labels);

struct MetricsReport {
  double acc = 0;
  std::optional<double> auc_macro;  // empty when some class is absent
  double f1_macro = 0;
  double precision_macro = 0;
  ConfusionMatrix confusion{0};
  std::size_t n = 0;
};

MetricsReport compute_report(std::span<const double> probs, std::size_t k, std::span<const std::size_t> labels);

// `metric=value` lines, then the confusion matrix as `confusion.i=a,b,c` lines.
std::string format_report_lines(const MetricsReport& report);
// Human table with the columns ACC, AUC, F1-Score, Precision.
std::string format_report_table(const MetricsReport& report);

}  // namespace lesion
