#include <doctest.h>

#include <cmath>

#include "htn/archive.hpp"
#include "htn/rng.hpp"
#include "htn/training.hpp"

#include "helpers.hpp"

using namespace htn;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.C = 2;
  cfg.M = 3;
  cfg.epochs = 4;
  cfg.seed = 11;
  cfg.normalization = Normalization::per_node;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("training");

TEST_CASE("identical configuration and seed give bitwise-identical runs") {
  const Dataset data = testing::separable_train(20);
  const Dataset val = testing::separable_test(10);
  const TrainConfig cfg = small_config();
  const TrainResult a = train(cfg, data, &val);
  const TrainResult b = train(cfg, data, &val);
  CHECK(a.model == b.model);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
    REQUIRE(a.history[e].validation.has_value());
    CHECK(a.history[e].validation->accuracy == b.history[e].validation->accuracy);
  }
}

TEST_CASE("single-class dataset trains to zero loss trivially") {
  SyntheticSpec spec;
  spec.class_models.push_back(testing::random_params(2, 2, 3, 12));
  spec.min_nodes = 2;
  spec.max_nodes = 6;
  spec.samples_per_class = 15;
  const Dataset data = generate_synthetic(spec, 13);
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  const TrainResult result = train(cfg, data);
  for (const auto& record : result.history) CHECK(record.mean_loss == 0.0);
  CHECK(evaluate(result.model, data).accuracy == 1.0);
}

TEST_CASE("repeated small steps on one sample descend while the gradient is alive") {
  Rng rng(14);
  HtnModel model(2, 2, 2, 3, 2, 15);
  const LabeledTree t = testing::random_tree(rng, 6, 2, 3);
  OptimizerState state = OptimizerState::for_model(model);
  state.lr0 = 1e-4;
  state.decay = 1.0;
  state.alpha0 = 0.0;
  state.alphaT = 0.0;
  double previous = loss(forward(model, t), 0);
  for (int step = 0; step < 50; ++step) {
    const ForwardTrace trace = forward(model, t);
    const HtnGradients g = backward(model, t, trace, 0);
    if (g.squared_norm() <= 1e-16) break;
    sgd_update(model, g, state);
    const double current = loss(forward(model, t), 0);
    CHECK(current <= previous);
    previous = current;
  }
}

TEST_CASE("evaluate is pure") {
  const Dataset data = testing::separable_train(15);
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  const TrainResult result = train(cfg, data);
  const Metrics a = evaluate(result.model, data);
  const Metrics b = evaluate(result.model, data);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.confusion == b.confusion);
}

TEST_CASE("minibatch accumulation trains deterministically") {
  const Dataset data = testing::separable_train(12);
  TrainConfig cfg = small_config();
  cfg.minibatch = 4;
  cfg.epochs = 3;
  const TrainResult a = train(cfg, data);
  const TrainResult b = train(cfg, data);
  CHECK(a.model == b.model);
}

TEST_CASE("grid search runs one job per cell and selects deterministically") {
  const Dataset data = testing::separable_train(12);  // 24 trees
  TrainConfig base = small_config();
  base.epochs = 2;
  SelectionScheme scheme;
  scheme.folds = 2;
  const GridSearchResult result = grid_search({2}, {2, 3}, data, scheme, base);
  CHECK(result.cells.size() == 1 * 2 * 2);
  CHECK(result.best.C == 2);
  const GridSearchResult again = grid_search({2}, {2, 3}, data, scheme, base);
  CHECK(again.best.M == result.best.M);
  for (std::size_t c = 0; c < result.cells.size(); ++c)
    CHECK(result.cells[c].score == again.cells[c].score);

  const GridSearchResult single = grid_search({2}, {2}, data, scheme, base);
  CHECK(single.cells.size() == 2);
  CHECK(single.best.C == 2);
  CHECK(single.best.M == 2);
}

TEST_CASE("grid search over a fixed holdout split") {
  const Dataset data = testing::separable_train(12);
  TrainConfig base = small_config();
  base.epochs = 2;
  SelectionScheme scheme;
  scheme.holdout_fraction = 0.25;  // one stratified split, no folding
  const GridSearchResult result = grid_search({2, 3}, {2}, data, scheme, base);
  CHECK(result.cells.size() == 2);
  for (const auto& cell : result.cells) CHECK(cell.fold == 0);
}

TEST_CASE("learning on the separable task beats chance quickly") {
  const Dataset data = testing::separable_train(30);
  const Dataset test = testing::separable_test(20);
  TrainConfig cfg;
  cfg.C = 2;
  cfg.M = 2;
  cfg.epochs = 20;
  cfg.seed = 16;
  cfg.normalization = Normalization::per_node;
  const TrainResult result = train(cfg, data);
  CHECK(evaluate(result.model, test).accuracy >= 0.8);
}

TEST_CASE("generative baseline on its own data") {
  const Dataset data = testing::separable_train(30);
  const Dataset test = testing::separable_test(20);
  const Metrics m = generative_baseline(data, test, 2, 5, 17);
  CHECK(m.accuracy >= 0.9);
}

TEST_CASE("generative baseline on a single class is trivially right") {
  SyntheticSpec spec;
  spec.class_models.push_back(testing::random_params(2, 2, 3, 18));
  spec.min_nodes = 2;
  spec.max_nodes = 6;
  spec.samples_per_class = 10;
  const Dataset data = generate_synthetic(spec, 19);
  CHECK(generative_baseline(data, data, 2, 2, 20).accuracy == 1.0);
}

TEST_CASE("empty training set is rejected") {
  const Dataset data = testing::separable_train(5);
  Dataset empty = data;
  empty.trees.clear();
  CHECK_THROWS_AS(train(small_config(), empty), std::invalid_argument);
}

TEST_CASE("dimension mismatch is rejected") {
  const Dataset data = testing::separable_train(5);
  TrainConfig cfg = small_config();
  cfg.V = 2;  // dataset uses 4 symbols
  CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
}

TEST_CASE("schedule invariants are enforced") {
  const Dataset data = testing::separable_train(5);
  TrainConfig cfg = small_config();
  cfg.lr0 = 0.0;
  CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
  cfg = small_config();
  cfg.decay = 1.5;
  CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
  cfg = small_config();
  cfg.alpha0 = 0.9;
  cfg.alphaT = 0.5;  // must not shrink
  CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
  cfg = small_config();
  cfg.alphaT = 1.0;  // momentum must stay below one
  CHECK_THROWS_AS(train(cfg, data), std::invalid_argument);
}

TEST_CASE("EM pretraining stays deterministic and trains") {
  const Dataset data = testing::separable_train(12);
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  cfg.pretrain_em_iters = 2;
  const TrainResult a = train(cfg, data);
  const TrainResult b = train(cfg, data);
  CHECK(a.model == b.model);
}

TEST_SUITE_END();
