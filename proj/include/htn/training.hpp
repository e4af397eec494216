#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "htn/dataset.hpp"
#include "htn/metrics.hpp"
#include "htn/network.hpp"

namespace htn {

struct TrainConfig {
  std::size_t C = 2;
  std::size_t M = 2;
  std::size_t K = 0;  // 0: take from the dataset
  std::size_t L = 0;  // 0: take from the dataset
  std::size_t V = 0;  // 0: take from the dataset
  std::size_t epochs = 100;
  double lr0 = 0.01;
  double decay = 0.97;
  double alpha0 = 0.5;
  double alphaT = 0.9;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::raw;
  std::size_t pretrain_em_iters = 0;
  std::size_t minibatch = 1;

  // Copy with unset dimensions filled in from a dataset.
  TrainConfig resolved(const Dataset& data) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<Metrics> validation;
};

struct TrainResult {
  HtnModel model;
  std::vector<EpochRecord> history;
};

// Optional per-module EM pretraining, then `epochs` epochs of shuffled
// per-sample (or minibatch-accumulated) Nesterov SGD. Deterministic under
// (config, data): the shuffle stream depends only on the master seed, so
// changing C or M never perturbs the data order. `on_epoch` (when given)
// observes each record as soon as the epoch finishes.
using EpochCallback = std::function<void(const EpochRecord&)>;
TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset* validation_set = nullptr,
                  const EpochCallback& on_epoch = nullptr);

Metrics evaluate(const HtnModel& model, const Dataset& dataset);

// Validation scheme for grid search.
struct SelectionScheme {
  std::size_t folds = 3;            // k-fold CV when holdout_fraction == 0
  double holdout_fraction = 0.0;    // else one stratified holdout split
};

struct GridCell {
  std::size_t C = 0;
  std::size_t M = 0;
  std::size_t fold = 0;
  double score = 0.0;
  Metrics metrics;
};

struct GridSearchResult {
  TrainConfig best;
  double best_score = 0.0;
  std::vector<GridCell> cells;
};

// Trains one model per (C, M, fold); selects by mean validation score
// (F1 for binary tasks, accuracy otherwise), ties toward smaller C then
// smaller M. Cells run as independent jobs.
GridSearchResult grid_search(const std::vector<std::size_t>& c_grid,
                             const std::vector<std::size_t>& m_grid,
                             const Dataset& dataset, const SelectionScheme& scheme,
                             const TrainConfig& base_config);

// One HTMM per class fitted by EM on that class's training trees;
// classification by max class log-likelihood plus the empirical log prior.
Metrics generative_baseline(const Dataset& train_set, const Dataset& test_set,
                            std::size_t C, std::size_t em_iters, std::uint64_t seed);

// Analytic-vs-central-difference report for one (model, sample) pair.
struct GroupCheck {
  std::string group;        // "w_out", "module0.lambda_a", ...
  double max_rel_error = 0.0;  // over coordinates with gradient magnitude >= 1e-3
  double max_abs_error = 0.0;  // over the remaining near-zero coordinates
  bool passed = false;
};

std::vector<GroupCheck> finite_difference_report(const HtnModel& model,
                                                 const LabeledTree& sample,
                                                 std::size_t target_class, double step,
                                                 double rel_tolerance = 1e-4,
                                                 double abs_tolerance = 1e-7);

}  // namespace htn
