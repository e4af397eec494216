#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace htn {

// Classification metrics. F1 and AUC are reported for binary tasks only
// (class 1 is the designated positive class); otherwise they are absent.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> f1;
  std::optional<double> auc;
  std::vector<std::size_t> confusion;  // [K x K], row = true class, col = predicted
  std::size_t K = 0;

  std::size_t confusion_at(std::size_t truth, std::size_t predicted) const {
    return confusion[truth * K + predicted];
  }
};

// labels: true classes; predictions: argmax classes; scores: positive-class
// probability per sample (used for AUC when K == 2, may be empty otherwise).
Metrics compute_metrics(const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& predictions,
                        const std::vector<double>& scores, std::size_t K);

// Area under the ROC curve by the rank statistic, ties counted half.
// Absent when either class is empty.
std::optional<double> auc_from_scores(const std::vector<std::size_t>& labels,
                                      const std::vector<double>& scores);

}  // namespace htn
