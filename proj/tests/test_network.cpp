#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "htn/network.hpp"
#include "htn/rng.hpp"

#include "helpers.hpp"

using namespace htn;

namespace {

// C=1 modules have a single state, so the log-likelihood is just the sum of
// log emission probabilities; handy for pinning exact loglik values.
HtmmParameters point_module(const std::vector<double>& emission) {
  HtmmParameters p(1, 1, emission.size());
  p.lambda_b = testing::log_of(emission);
  return p;
}

LabeledTree single_node_tree(std::size_t label) {
  LabeledTree t;
  t.nodes.emplace_back();
  t.nodes[0].label = label;
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("pair index shapes") {
  CHECK(pair_index(2) == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  const auto p4 = pair_index(4);
  REQUIRE(p4.size() == 6);
  CHECK(p4.front() == std::pair<std::size_t, std::size_t>{0, 1});
  CHECK(p4.back() == std::pair<std::size_t, std::size_t>{2, 3});
  CHECK(pair_index(60).size() == 1770);
  CHECK_THROWS_AS(pair_index(1), std::invalid_argument);
}

TEST_CASE("identical modules give zero activations and uniform output") {
  Rng rng(80);
  HtnModel model(3, 2, 2, 3, 4, 81);
  model.modules[1] = model.modules[0];
  model.modules[2] = model.modules[0];
  const LabeledTree t = testing::random_tree(rng, 6, 2, 3);
  const ForwardTrace trace = forward(model, t);
  for (double h : trace.h) CHECK(h == 0.0);
  for (double p : trace.p) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));
  // uniform tie breaks to class 0
  CHECK(predict(model, t).first == 0);
}

TEST_CASE("contrastive unit is tanh of the loglik difference") {
  HtnModel model;
  model.modules = {point_module({std::exp(-10.0), 1.0 - std::exp(-10.0)}),
                   point_module({std::exp(-10.5), 1.0 - std::exp(-10.5)})};
  model.pairs = pair_index(2);
  model.K = 2;
  model.w_out.assign(2, 1.0);
  const ForwardTrace trace = forward(model, single_node_tree(0));
  CHECK(trace.logliks[0] == doctest::Approx(-10.0).epsilon(1e-12));
  CHECK(trace.logliks[1] == doctest::Approx(-10.5).epsilon(1e-12));
  CHECK(trace.h[0] == doctest::Approx(0.462117157260010).epsilon(1e-9));
}

TEST_CASE("saturated units stay finite and inside the open interval") {
  HtnModel model;
  model.modules = {point_module({std::exp(-30.0), 1.0 - std::exp(-30.0)}),
                   point_module({0.5, 0.5})};
  model.pairs = pair_index(2);
  model.K = 2;
  model.w_out.assign(2, 1.0);
  const ForwardTrace trace = forward(model, single_node_tree(0));
  CHECK(std::isfinite(trace.h[0]));
  CHECK(trace.h[0] < 0.0);
  CHECK(trace.h[0] > -1.0);
  CHECK(std::abs(trace.h[0] + 1.0) <= 1e-12);
  double sum = 0.0;
  for (double p : trace.p) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("per-node normalization divides by the node count") {
  Rng rng(82);
  HtnModel model(2, 2, 2, 3, 2, 83);
  const LabeledTree t = testing::random_tree(rng, 8, 2, 3);
  const ForwardTrace raw = forward(model, t);
  model.normalization = Normalization::per_node;
  const ForwardTrace scaled = forward(model, t);
  for (std::size_t m = 0; m < 2; ++m)
    CHECK(scaled.logliks[m] == doctest::Approx(raw.logliks[m] / 8.0).epsilon(1e-12));
}

TEST_CASE("cross-entropy reference values") {
  ForwardTrace trace;
  trace.net = {0.0, 0.0};
  CHECK(loss(trace, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  trace.net = {std::log(0.7311), std::log(0.2689)};
  CHECK(loss(trace, 0) == doctest::Approx(0.313).epsilon(1e-3));
  // exact prediction: zero loss
  trace.net = {0.0};
  CHECK(loss(trace, 0) == 0.0);
}

TEST_CASE("forward output is a distribution for random models") {
  Rng rng(84);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t M = 2 + rng.next_below(3);
    const std::size_t K = 1 + rng.next_below(4);
    const HtnModel model(M, 1 + rng.next_below(2), 2, 3, K, 900 + rep);
    const LabeledTree t = testing::random_tree(rng, 1 + rng.next_below(9), 2, 3);
    const ForwardTrace trace = forward(model, t);
    double sum = 0.0;
    for (double p : trace.p) {
      CHECK(std::isfinite(p));
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (double h : trace.h) {
      CHECK(h > -1.0);
      CHECK(h < 1.0);
    }
  }
}

TEST_CASE("module permutation with matching sign flips preserves the output") {
  Rng rng(85);
  HtnModel model(4, 2, 2, 3, 3, 86);
  const LabeledTree t = testing::random_tree(rng, 7, 2, 3);
  const ForwardTrace before = forward(model, t);

  const std::vector<std::size_t> perm = {2, 0, 3, 1};  // new index of old module m
  HtnModel permuted = model;
  for (std::size_t m = 0; m < 4; ++m) permuted.modules[perm[m]] = model.modules[m];
  std::fill(permuted.w_out.begin(), permuted.w_out.end(), 0.0);
  const auto new_pairs = pair_index(4);
  for (std::size_t p = 0; p < model.pairs.size(); ++p) {
    const auto [m, r] = model.pairs[p];
    const std::size_t nm = std::min(perm[m], perm[r]);
    const std::size_t nr = std::max(perm[m], perm[r]);
    const double sign = perm[m] < perm[r] ? 1.0 : -1.0;
    const auto it = std::find(new_pairs.begin(), new_pairs.end(), std::pair{nm, nr});
    const auto np = static_cast<std::size_t>(it - new_pairs.begin());
    for (std::size_t k = 0; k < model.K; ++k)
      permuted.w(np, k) = sign * model.w(p, k);
  }
  const ForwardTrace after = forward(permuted, t);
  for (std::size_t k = 0; k < model.K; ++k)
    CHECK(after.p[k] == doctest::Approx(before.p[k]).epsilon(1e-12));
}

TEST_CASE("shifting every net input preserves the prediction") {
  Rng rng(87);
  HtnModel model(3, 2, 2, 3, 3, 88);
  const LabeledTree t = testing::random_tree(rng, 6, 2, 3);
  const auto [klass, probs] = predict(model, t);
  HtnModel shifted = model;
  for (double& w : shifted.w_out) w += 2.5;  // adds the same constant to every net_k
  const auto [klass2, probs2] = predict(shifted, t);
  CHECK(klass2 == klass);
}

TEST_CASE("predict takes the argmax class") {
  HtnModel model;
  model.modules = {point_module({0.4, 0.6}), point_module({0.7, 0.3})};
  model.pairs = pair_index(2);
  model.K = 2;
  // label 0: h = tanh(log 0.4 - log 0.7) < 0, so these weights favor class 0
  model.w_out = {-4.0, 4.0};
  const auto [klass, probs] = predict(model, single_node_tree(0));
  CHECK(klass == 0);
  CHECK(probs[0] > probs[1]);
  model.w_out = {4.0, -4.0};
  const auto [other, probs2] = predict(model, single_node_tree(0));
  CHECK(other == 1);
  CHECK(probs2[1] > 0.5);
}

TEST_CASE("tie-break picks the lowest class") {
  HtnModel model;
  model.modules = {point_module({0.4, 0.6}), point_module({0.7, 0.3})};
  model.pairs = pair_index(2);
  model.K = 2;
  model.w_out.assign(2, 0.0);  // zero weights: p is uniform regardless of h
  const auto [klass, probs] = predict(model, single_node_tree(0));
  CHECK(probs[0] == probs[1]);
  CHECK(klass == 0);
}

TEST_CASE("gradient accumulation is order-independent within tolerance") {
  Rng rng(92);
  HtnModel model(3, 2, 2, 3, 2, 93);
  std::vector<HtnGradients> grads;
  for (int s = 0; s < 6; ++s) {
    const LabeledTree t = testing::random_tree(rng, 5 + s, 2, 3);
    grads.push_back(backward(model, t, forward(model, t), s % 2));
  }
  HtnGradients fwd = grads[0];
  for (std::size_t s = 1; s < grads.size(); ++s) fwd.add_scaled(grads[s], 1.0);
  HtnGradients rev = grads.back();
  for (std::size_t s = grads.size() - 1; s-- > 0;) rev.add_scaled(grads[s], 1.0);
  CHECK(std::abs(std::sqrt(fwd.squared_norm()) - std::sqrt(rev.squared_norm())) <= 1e-9);
}

TEST_CASE("optimizer schedules") {
  OptimizerState state;
  state.lr0 = 0.01;
  state.decay = 0.97;
  state.alpha0 = 0.5;
  state.alphaT = 0.9;
  state.total_epochs = 100;
  state.epoch = 0;
  CHECK(state.learning_rate() == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(state.momentum() == doctest::Approx(0.5).epsilon(1e-15));
  state.epoch = 99;
  CHECK(state.momentum() == doctest::Approx(0.9).epsilon(1e-15));
  state.epoch = 1;
  CHECK(state.learning_rate() == doctest::Approx(0.0097).epsilon(1e-15));
}

TEST_CASE("zero gradient and zero velocity leave parameters untouched") {
  HtnModel model(2, 2, 2, 3, 2, 89);
  const HtnModel before = model;
  OptimizerState state = OptimizerState::for_model(model);
  HtnGradients zero;
  zero.w_out.assign(model.w_out.size(), 0.0);
  for (const auto& m : model.modules)
    zero.modules.push_back(HtmmParameters::zeros(m.C, m.L, m.V));
  sgd_update(model, zero, state);
  CHECK(model == before);
}

TEST_CASE("a small plain-gradient step reduces the loss") {
  Rng rng(90);
  HtnModel model(2, 2, 2, 3, 2, 91);
  const LabeledTree t = testing::random_tree(rng, 6, 2, 3);
  const ForwardTrace trace = forward(model, t);
  const double before = loss(trace, 1);
  const HtnGradients g = backward(model, t, trace, 1);
  REQUIRE(g.squared_norm() > 0.0);
  OptimizerState state = OptimizerState::for_model(model);
  state.lr0 = 1e-4;
  state.decay = 1.0;
  state.alpha0 = 0.0;
  state.alphaT = 0.0;
  sgd_update(model, g, state);
  CHECK(loss(forward(model, t), 1) < before);
}

TEST_SUITE_END();
