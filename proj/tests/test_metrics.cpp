#include <doctest.h>

#include "htn/metrics.hpp"

using namespace htn;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("perfect predictions") {
  const std::vector<std::size_t> labels = {0, 1, 1, 0};
  const Metrics m = compute_metrics(labels, labels, {0.1, 0.9, 0.8, 0.2}, 2);
  CHECK(m.accuracy == 1.0);
  REQUIRE(m.f1.has_value());
  CHECK(*m.f1 == 1.0);
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == 1.0);
}

TEST_CASE("hand-counted confusion: TP=3 FP=1 FN=2") {
  const std::vector<std::size_t> labels = {1, 1, 1, 1, 1, 0, 0, 0};
  const std::vector<std::size_t> preds = {1, 1, 1, 0, 0, 1, 0, 0};
  const Metrics m = compute_metrics(labels, preds, {}, 2);
  CHECK(m.confusion_at(1, 1) == 3);
  CHECK(m.confusion_at(0, 1) == 1);
  CHECK(m.confusion_at(1, 0) == 2);
  CHECK(m.confusion_at(0, 0) == 2);
  REQUIRE(m.f1.has_value());
  CHECK(*m.f1 == 2.0 * 3.0 / (2.0 * 3.0 + 1.0 + 2.0));
  CHECK(m.accuracy == 5.0 / 8.0);
}

TEST_CASE("constant scores on a balanced set give AUC one half") {
  const std::vector<std::size_t> labels = {0, 1, 0, 1};
  const auto auc = auc_from_scores(labels, {0.7, 0.7, 0.7, 0.7});
  REQUIRE(auc.has_value());
  CHECK(*auc == 0.5);
}

TEST_CASE("rank-statistic AUC with partial ties") {
  // scores: neg 0.1, pos 0.4, neg 0.4, pos 0.8
  // pairs: (0.1 vs 0.4)=1, (0.1 vs 0.8)=1, (0.4 vs 0.4)=0.5, (0.4 vs 0.8)=1
  // AUC = 3.5 / 4
  const std::vector<std::size_t> labels = {0, 1, 0, 1};
  const auto auc = auc_from_scores(labels, {0.1, 0.4, 0.4, 0.8});
  REQUIRE(auc.has_value());
  CHECK(*auc == doctest::Approx(3.5 / 4.0).epsilon(1e-15));
}

TEST_CASE("AUC absent for single-class truth") {
  CHECK(!auc_from_scores({1, 1}, {0.5, 0.6}).has_value());
}

TEST_CASE("multiclass reports no F1 or AUC") {
  const std::vector<std::size_t> labels = {0, 1, 2};
  const Metrics m = compute_metrics(labels, labels, {}, 3);
  CHECK(m.accuracy == 1.0);
  CHECK(!m.f1.has_value());
  CHECK(!m.auc.has_value());
}

TEST_CASE("confusion rows sum to per-class counts") {
  const std::vector<std::size_t> labels = {0, 0, 0, 1, 1, 2};
  const std::vector<std::size_t> preds = {0, 1, 2, 1, 1, 0};
  const Metrics m = compute_metrics(labels, preds, {}, 3);
  std::vector<std::size_t> expected = {3, 2, 1};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t row = 0;
    for (std::size_t p = 0; p < 3; ++p) row += m.confusion_at(k, p);
    CHECK(row == expected[k]);
  }
}

TEST_SUITE_END();
