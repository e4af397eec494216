#include "htn/training.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "htn/rng.hpp"

namespace htn {

namespace {
constexpr std::uint64_t kShuffleTag = 0x5f7e;
constexpr std::uint64_t kBaselineTag = 0xba5e;
}  // namespace

TrainConfig TrainConfig::resolved(const Dataset& data) const {
  TrainConfig out = *this;
  if (out.K == 0) out.K = data.K;
  if (out.L == 0) out.L = data.L;
  if (out.V == 0) out.V = data.V();
  return out;
}

namespace {

void check_dimensions(const TrainConfig& cfg, const Dataset& data, const char* what) {
  if (data.trees.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
  if (cfg.K < data.K || cfg.L < data.L || cfg.V < data.V())
    throw std::invalid_argument(std::string(what) +
                                ": dataset dimensions exceed the configuration");
  if (cfg.lr0 <= 0.0 || cfg.decay <= 0.0 || cfg.decay > 1.0)
    throw std::invalid_argument(std::string(what) + ": bad learning-rate schedule");
  if (cfg.alpha0 < 0.0 || cfg.alphaT < cfg.alpha0 || cfg.alphaT >= 1.0)
    throw std::invalid_argument(std::string(what) + ": bad momentum schedule");
}

}  // namespace

TrainResult train(const TrainConfig& raw_config, const Dataset& train_set,
                  const Dataset* validation_set, const EpochCallback& on_epoch) {
  const TrainConfig cfg = raw_config.resolved(train_set);
  check_dimensions(cfg, train_set, "train");
  if (cfg.minibatch < 1) throw std::invalid_argument("minibatch must be >= 1");

  TrainResult result;
  result.model = HtnModel(cfg.M, cfg.C, cfg.L, cfg.V, cfg.K, cfg.seed, cfg.normalization);

  for (std::size_t it = 0; it < cfg.pretrain_em_iters; ++it)
    for (auto& module : result.model.modules) module = em_step(module, train_set.trees);

  OptimizerState state = OptimizerState::for_model(result.model);
  state.lr0 = cfg.lr0;
  state.decay = cfg.decay;
  state.alpha0 = cfg.alpha0;
  state.alphaT = cfg.alphaT;
  state.total_epochs = cfg.epochs;

  // dedicated stream: data order is a function of (seed, epoch) only
  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleTag));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    state.epoch = epoch;
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;

    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end = std::min(order.size(), pos + cfg.minibatch);
      std::optional<HtnGradients> batch;
      for (; pos < batch_end; ++pos) {
        const LabeledTree& tree = train_set.trees[order[pos]];
        const auto target = static_cast<std::size_t>(tree.klass);
        const ForwardTrace trace = forward(result.model, tree);
        loss_sum += loss(trace, target);
        HtnGradients g = backward(result.model, tree, trace, target);
        if (!batch)
          batch = std::move(g);
        else
          batch->add_scaled(g, 1.0);
      }
      sgd_update(result.model, *batch, state);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = loss_sum / static_cast<double>(train_set.size());
    if (validation_set) record.validation = evaluate(result.model, *validation_set);
    if (on_epoch) on_epoch(record);
    result.history.push_back(std::move(record));
  }
  return result;
}

Metrics evaluate(const HtnModel& model, const Dataset& dataset) {
  if (dataset.trees.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<std::size_t> labels, predictions;
  std::vector<double> scores;
  labels.reserve(dataset.size());
  predictions.reserve(dataset.size());
  scores.reserve(dataset.size());
  for (const auto& tree : dataset.trees) {
    auto [klass, probs] = predict(model, tree);
    labels.push_back(static_cast<std::size_t>(tree.klass));
    predictions.push_back(klass);
    scores.push_back(probs.size() > 1 ? probs[1] : 1.0);
  }
  return compute_metrics(labels, predictions, scores, model.K);
}

namespace {

double selection_score(const Metrics& m) {
  if (m.K == 2 && m.f1) return *m.f1;
  return m.accuracy;
}

}  // namespace

GridSearchResult grid_search(const std::vector<std::size_t>& c_grid,
                             const std::vector<std::size_t>& m_grid,
                             const Dataset& dataset, const SelectionScheme& scheme,
                             const TrainConfig& base_config) {
  if (c_grid.empty() || m_grid.empty()) throw std::invalid_argument("empty grid");

  std::vector<FoldSplit> splits;
  if (scheme.holdout_fraction > 0.0) {
    const auto k = static_cast<std::size_t>(
        std::max(2.0, std::round(1.0 / scheme.holdout_fraction)));
    splits = {stratified_folds(dataset, k, base_config.seed)[0]};
  } else {
    splits = stratified_folds(dataset, scheme.folds, base_config.seed);
  }

  GridSearchResult result;
  result.cells.resize(c_grid.size() * m_grid.size() * splits.size());

  // independent jobs; same master seed everywhere so that data order does
  // not depend on the cell
  std::vector<std::size_t> cell_ids(result.cells.size());
  std::iota(cell_ids.begin(), cell_ids.end(), 0);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(),
                                                     cell_ids.size()));
  auto run_cell = [&](std::size_t id) {
    const std::size_t per_c = m_grid.size() * splits.size();
    const std::size_t ci = id / per_c;
    const std::size_t mi = (id / splits.size()) % m_grid.size();
    const std::size_t fi = id % splits.size();
    TrainConfig cfg = base_config;
    cfg.C = c_grid[ci];
    cfg.M = m_grid[mi];
    // per-fold initialization streams; still independent of C and M
    cfg.seed = derive_seed(base_config.seed, 0xf01d0 + fi);
    const Dataset fold_train = dataset.subset(splits[fi].train);
    const Dataset fold_test = dataset.subset(splits[fi].test);
    TrainResult trained = train(cfg, fold_train);
    GridCell cell;
    cell.C = cfg.C;
    cell.M = cfg.M;
    cell.fold = fi;
    cell.metrics = evaluate(trained.model, fold_test);
    cell.score = selection_score(cell.metrics);
    result.cells[id] = std::move(cell);
  };
  for (std::size_t begin = 0; begin < cell_ids.size(); begin += workers) {
    std::vector<std::future<void>> jobs;
    for (std::size_t id = begin; id < std::min(cell_ids.size(), begin + workers); ++id)
      jobs.push_back(std::async(std::launch::async, run_cell, id));
    for (auto& j : jobs) j.get();
  }

  result.best = base_config;
  double best = -1.0;
  for (std::size_t ci = 0; ci < c_grid.size(); ++ci) {
    for (std::size_t mi = 0; mi < m_grid.size(); ++mi) {
      double mean = 0.0;
      for (std::size_t fi = 0; fi < splits.size(); ++fi)
        mean += result.cells[(ci * m_grid.size() + mi) * splits.size() + fi].score;
      mean /= static_cast<double>(splits.size());
      // grid iterated in (C asc, M asc) order: strict improvement keeps the
      // smallest C then smallest M on ties
      if (mean > best) {
        best = mean;
        result.best.C = c_grid[ci];
        result.best.M = m_grid[mi];
      }
    }
  }
  result.best_score = best;
  return result;
}

Metrics generative_baseline(const Dataset& train_set, const Dataset& test_set,
                            std::size_t C, std::size_t em_iters, std::uint64_t seed) {
  if (train_set.trees.empty() || test_set.trees.empty())
    throw std::invalid_argument("generative_baseline: empty split");
  const std::size_t K = train_set.K;

  std::vector<std::vector<LabeledTree>> per_class(K);
  for (const auto& tree : train_set.trees)
    per_class[static_cast<std::size_t>(tree.klass)].push_back(tree);
  for (std::size_t k = 0; k < K; ++k)
    if (per_class[k].empty())
      throw std::invalid_argument("class " + std::to_string(k) + " empty in training split");

  std::vector<HtmmParameters> models;
  std::vector<double> log_prior(K);
  for (std::size_t k = 0; k < K; ++k) {
    HtmmParameters model = HtmmParameters::random_init(C, train_set.L, train_set.V(),
                                                       derive_seed(seed, kBaselineTag + k));
    for (std::size_t it = 0; it < em_iters; ++it) model = em_step(model, per_class[k]);
    models.push_back(std::move(model));
    log_prior[k] = std::log(static_cast<double>(per_class[k].size()) /
                            static_cast<double>(train_set.size()));
  }
  std::vector<ProbTables> tables;
  for (const auto& m : models) tables.push_back(materialize(m));

  std::vector<std::size_t> labels, predictions;
  std::vector<double> scores;
  for (const auto& tree : test_set.trees) {
    std::vector<double> joint(K);
    for (std::size_t k = 0; k < K; ++k)
      joint[k] = log_prior[k] + upward_log_likelihood(tables[k], tree);
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (joint[k] > joint[best]) best = k;
    labels.push_back(static_cast<std::size_t>(tree.klass));
    predictions.push_back(best);
    if (K == 2) {
      // posterior of the positive class as the ranking score
      const double mx = std::max(joint[0], joint[1]);
      const double z = std::exp(joint[0] - mx) + std::exp(joint[1] - mx);
      scores.push_back(std::exp(joint[1] - mx) / z);
    }
  }
  return compute_metrics(labels, predictions, scores, K);
}

namespace {

struct GroupRef {
  std::string name;
  std::vector<double>* values;
  const std::vector<double>* grads;
};

}  // namespace

std::vector<GroupCheck> finite_difference_report(const HtnModel& model,
                                                 const LabeledTree& sample,
                                                 std::size_t target_class, double step,
                                                 double rel_tolerance,
                                                 double abs_tolerance) {
  HtnModel work = model;
  const ForwardTrace trace = forward(work, sample);
  const HtnGradients analytic = backward(work, sample, trace, target_class);

  std::vector<GroupRef> groups;
  groups.push_back({"w_out", &work.w_out, &analytic.w_out});
  for (std::size_t m = 0; m < work.module_count(); ++m) {
    const std::string prefix = "module" + std::to_string(m) + ".";
    groups.push_back({prefix + "lambda_a", &work.modules[m].lambda_a,
                      &analytic.modules[m].lambda_a});
    groups.push_back({prefix + "lambda_pi", &work.modules[m].lambda_pi,
                      &analytic.modules[m].lambda_pi});
    groups.push_back({prefix + "lambda_b", &work.modules[m].lambda_b,
                      &analytic.modules[m].lambda_b});
    groups.push_back({prefix + "lambda_phi", &work.modules[m].lambda_phi,
                      &analytic.modules[m].lambda_phi});
  }

  std::vector<GroupCheck> report;
  for (auto& group : groups) {
    GroupCheck check;
    check.group = group.name;
    for (std::size_t idx = 0; idx < group.values->size(); ++idx) {
      const double saved = (*group.values)[idx];
      (*group.values)[idx] = saved + step;
      const double up = loss(forward(work, sample), target_class);
      (*group.values)[idx] = saved - step;
      const double down = loss(forward(work, sample), target_class);
      (*group.values)[idx] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = (*group.grads)[idx];
      const double magnitude = std::max(std::abs(fd), std::abs(an));
      if (magnitude >= 1e-3)
        check.max_rel_error = std::max(check.max_rel_error, std::abs(an - fd) / magnitude);
      else
        check.max_abs_error = std::max(check.max_abs_error, std::abs(an - fd));
    }
    check.passed =
        check.max_rel_error <= rel_tolerance && check.max_abs_error <= abs_tolerance;
    report.push_back(std::move(check));
  }
  return report;
}

}  // namespace htn
