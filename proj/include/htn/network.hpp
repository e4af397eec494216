#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "htn/htmm.hpp"
#include "htn/tree.hpp"

namespace htn {

// How module log-likelihoods enter the contrastive units: raw, or divided
// by the node count so large trees do not pin the tanh at its rails.
enum class Normalization { raw, per_node };

// Lexicographically ordered strict upper triangle (m, r), m < r, of the
// module indices; one contrastive unit per pair.
std::vector<std::pair<std::size_t, std::size_t>> pair_index(std::size_t module_count);

// The hybrid classifier: M generative modules whose log-likelihoods feed
// M-choose-2 fixed-weight contrastive tanh units (+1 for the lower-indexed
// module of a pair, -1 for the higher; never trained), combined by an
// adaptive softmax output layer.
struct HtnModel {
  std::vector<HtmmParameters> modules;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<double> w_out;  // [P x K], row per pair, column per class
  std::size_t K = 0;
  Normalization normalization = Normalization::raw;

  HtnModel() = default;
  HtnModel(std::size_t module_count, std::size_t C, std::size_t L, std::size_t V,
           std::size_t K, std::uint64_t seed, Normalization normalization = Normalization::raw);

  std::size_t module_count() const { return modules.size(); }
  std::size_t pair_count() const { return pairs.size(); }
  double w(std::size_t p, std::size_t k) const { return w_out[p * K + k]; }
  double& w(std::size_t p, std::size_t k) { return w_out[p * K + k]; }

  bool operator==(const HtnModel&) const = default;
};

// Everything the forward pass computed for one tree.
struct ForwardTrace {
  std::vector<double> logliks;  // per module, after normalization
  std::vector<double> h;        // per pair, tanh of the loglik difference
  std::vector<double> net;      // per class
  std::vector<double> p;        // softmax of net
  std::size_t node_count = 0;
};

ForwardTrace forward(const HtnModel& model, const LabeledTree& tree);

// Cross-entropy against a one-hot target, from stabilized log-probabilities.
double loss(const ForwardTrace& trace, std::size_t target_class);

struct HtnGradients {
  std::vector<double> w_out;            // same layout as HtnModel::w_out
  std::vector<HtmmGradients> modules;   // same shapes as the module lambdas

  void add_scaled(const HtnGradients& other, double factor);
  double squared_norm() const;
};

// Exact gradient of the loss for one sample with respect to every trainable
// parameter (the output weights and every module lambda group).
HtnGradients backward(const HtnModel& model, const LabeledTree& tree,
                      const ForwardTrace& trace, std::size_t target_class);

// Nesterov-momentum SGD. Per-epoch schedules:
//   learning rate nu_t  = lr0 * decay^epoch
//   momentum      alpha = alpha0 + (alphaT - alpha0) * epoch / (T - 1)
// Update (gradient g evaluated at the current parameters):
//   v     <- alpha * v - nu * g
//   theta <- theta + alpha * v - nu * g
struct OptimizerState {
  std::vector<double> velocity_w;
  std::vector<HtmmParameters> velocity_modules;
  std::size_t epoch = 0;
  double lr0 = 0.01;
  double decay = 0.97;
  double alpha0 = 0.5;
  double alphaT = 0.9;
  std::size_t total_epochs = 100;

  static OptimizerState for_model(const HtnModel& model);
  double learning_rate() const;
  double momentum() const;
};

void sgd_update(HtnModel& model, const HtnGradients& grads, OptimizerState& state);

// Argmax class; ties break toward the lowest index.
std::pair<std::size_t, std::vector<double>> predict(const HtnModel& model,
                                                    const LabeledTree& tree);

}  // namespace htn
