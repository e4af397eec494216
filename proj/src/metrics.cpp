#include "htn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace htn {

std::optional<double> auc_from_scores(const std::vector<std::size_t>& labels,
                                      const std::vector<double>& scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("size mismatch");
  const std::size_t n = labels.size();
  std::size_t positives = 0;
  for (std::size_t lab : labels) positives += lab == 1 ? 1 : 0;
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // average ranks within tie groups
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(positives) *
                                      static_cast<double>(positives + 1);
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

Metrics compute_metrics(const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& predictions,
                        const std::vector<double>& scores, std::size_t K) {
  if (labels.size() != predictions.size()) throw std::invalid_argument("size mismatch");
  if (labels.empty()) throw std::invalid_argument("no samples");

  Metrics m;
  m.K = K;
  m.confusion.assign(K * K, 0);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] >= K || predictions[s] >= K)
      throw std::invalid_argument("class index out of range");
    ++m.confusion[labels[s] * K + predictions[s]];
    correct += labels[s] == predictions[s] ? 1 : 0;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

  if (K == 2) {
    const double tp = static_cast<double>(m.confusion_at(1, 1));
    const double fp = static_cast<double>(m.confusion_at(0, 1));
    const double fn = static_cast<double>(m.confusion_at(1, 0));
    const double denom = 2.0 * tp + fp + fn;
    m.f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    if (!scores.empty()) m.auc = auc_from_scores(labels, scores);
  }
  return m;
}

}  // namespace htn
