#include "htn/network.hpp"

#include <cmath>
#include <stdexcept>

#include "htn/rng.hpp"

namespace htn {

std::vector<std::pair<std::size_t, std::size_t>> pair_index(std::size_t module_count) {
  if (module_count < 2) throw std::invalid_argument("need at least two modules");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(module_count * (module_count - 1) / 2);
  for (std::size_t m = 0; m < module_count; ++m)
    for (std::size_t r = m + 1; r < module_count; ++r) pairs.emplace_back(m, r);
  return pairs;
}

namespace {
constexpr std::uint64_t kModuleInitTag = 0x6d0d;
constexpr std::uint64_t kOutputInitTag = 0x0a7;
}  // namespace

HtnModel::HtnModel(std::size_t module_count, std::size_t C, std::size_t L,
                   std::size_t V, std::size_t K, std::uint64_t seed,
                   Normalization normalization)
    : pairs(pair_index(module_count)), K(K), normalization(normalization) {
  modules.reserve(module_count);
  for (std::size_t m = 0; m < module_count; ++m)
    modules.push_back(
        HtmmParameters::random_init(C, L, V, derive_seed(seed, kModuleInitTag + m)));
  w_out.resize(pairs.size() * K);
  Rng rng(derive_seed(seed, kOutputInitTag));
  for (double& x : w_out) x = 0.1 * rng.next_gaussian();
}

namespace {

// tanh pushed back inside the open interval so downstream code can rely on
// h in (-1, 1) even at full saturation.
double contrastive(double d) {
  double h = std::tanh(d);
  if (h >= 1.0) h = std::nextafter(1.0, 0.0);
  if (h <= -1.0) h = std::nextafter(-1.0, 0.0);
  return h;
}

void softmax_inplace(std::vector<double>& x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

}  // namespace

ForwardTrace forward(const HtnModel& model, const LabeledTree& tree) {
  const std::size_t M = model.module_count();
  const std::size_t P = model.pair_count();
  ForwardTrace trace;
  trace.node_count = tree.size();
  trace.logliks.resize(M);
  const double scale =
      model.normalization == Normalization::per_node ? 1.0 / static_cast<double>(tree.size()) : 1.0;
  for (std::size_t m = 0; m < M; ++m)
    trace.logliks[m] = scale * upward_log_likelihood(model.modules[m], tree);

  trace.h.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    const auto [m, r] = model.pairs[p];
    trace.h[p] = contrastive(trace.logliks[m] - trace.logliks[r]);
  }

  trace.net.assign(model.K, 0.0);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t k = 0; k < model.K; ++k) trace.net[k] += model.w(p, k) * trace.h[p];

  trace.p = trace.net;
  softmax_inplace(trace.p);
  return trace;
}

double loss(const ForwardTrace& trace, std::size_t target_class) {
  // -log p_k through log-sum-exp, never through the materialized p
  double mx = trace.net[0];
  for (double v : trace.net) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : trace.net) sum += std::exp(v - mx);
  return std::log(sum) - (trace.net.at(target_class) - mx);
}

void HtnGradients::add_scaled(const HtnGradients& other, double factor) {
  for (std::size_t k = 0; k < w_out.size(); ++k) w_out[k] += factor * other.w_out[k];
  for (std::size_t m = 0; m < modules.size(); ++m)
    modules[m].add_scaled(other.modules[m], factor);
}

double HtnGradients::squared_norm() const {
  double s = 0.0;
  for (double x : w_out) s += x * x;
  for (const auto& mod : modules)
    for (const auto* group : {&mod.lambda_a, &mod.lambda_pi, &mod.lambda_b, &mod.lambda_phi})
      for (double x : *group) s += x * x;
  return s;
}

HtnGradients backward(const HtnModel& model, const LabeledTree& tree,
                      const ForwardTrace& trace, std::size_t target_class) {
  const std::size_t M = model.module_count();
  const std::size_t P = model.pair_count();
  const std::size_t K = model.K;
  if (trace.h.size() != P || trace.p.size() != K || target_class >= K)
    throw std::invalid_argument("trace does not match model");

  HtnGradients grads;
  grads.w_out.assign(P * K, 0.0);
  grads.modules.reserve(M);
  for (const auto& mod : model.modules)
    grads.modules.emplace_back(HtmmParameters::zeros(mod.C, mod.L, mod.V));

  // dL/dnet_k = p_k - d_k
  std::vector<double> dnet = trace.p;
  dnet[target_class] -= 1.0;

  std::vector<double> dloglik(M, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    double dh = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      grads.w_out[p * K + k] = dnet[k] * trace.h[p];
      dh += dnet[k] * model.w(p, k);
    }
    const double dd = dh * (1.0 - trace.h[p] * trace.h[p]);
    const auto [m, r] = model.pairs[p];
    dloglik[m] += dd;
    dloglik[r] -= dd;
  }

  const double scale = model.normalization == Normalization::per_node
                           ? 1.0 / static_cast<double>(trace.node_count)
                           : 1.0;
  for (std::size_t m = 0; m < M; ++m) {
    if (dloglik[m] == 0.0) continue;  // the posterior pass is the expensive part
    const NodePosteriors post = upward_downward(model.modules[m], tree);
    const HtmmGradients inner = loglik_gradients(model.modules[m], tree, post);
    grads.modules[m].add_scaled(inner, dloglik[m] * scale);
  }
  return grads;
}

OptimizerState OptimizerState::for_model(const HtnModel& model) {
  OptimizerState state;
  state.velocity_w.assign(model.w_out.size(), 0.0);
  state.velocity_modules.reserve(model.module_count());
  for (const auto& mod : model.modules)
    state.velocity_modules.emplace_back(HtmmParameters::zeros(mod.C, mod.L, mod.V));
  return state;
}

double OptimizerState::learning_rate() const {
  return lr0 * std::pow(decay, static_cast<double>(epoch));
}

double OptimizerState::momentum() const {
  if (total_epochs <= 1) return alpha0;
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return alpha0 + (alphaT - alpha0) * frac;
}

namespace {

void nesterov(std::vector<double>& theta, std::vector<double>& velocity,
              const std::vector<double>& grad, double nu, double alpha) {
  for (std::size_t k = 0; k < theta.size(); ++k) {
    velocity[k] = alpha * velocity[k] - nu * grad[k];
    theta[k] += alpha * velocity[k] - nu * grad[k];
  }
}

}  // namespace

void sgd_update(HtnModel& model, const HtnGradients& grads, OptimizerState& state) {
  if (grads.modules.size() != model.module_count() ||
      grads.w_out.size() != model.w_out.size())
    throw std::invalid_argument("gradient shapes do not match model");
  const double nu = state.learning_rate();
  const double alpha = state.momentum();
  nesterov(model.w_out, state.velocity_w, grads.w_out, nu, alpha);
  for (std::size_t m = 0; m < model.module_count(); ++m) {
    auto& mod = model.modules[m];
    auto& vel = state.velocity_modules[m];
    const auto& g = grads.modules[m];
    nesterov(mod.lambda_a, vel.lambda_a, g.lambda_a, nu, alpha);
    nesterov(mod.lambda_pi, vel.lambda_pi, g.lambda_pi, nu, alpha);
    nesterov(mod.lambda_b, vel.lambda_b, g.lambda_b, nu, alpha);
    nesterov(mod.lambda_phi, vel.lambda_phi, g.lambda_phi, nu, alpha);
  }
}

std::pair<std::size_t, std::vector<double>> predict(const HtnModel& model,
                                                    const LabeledTree& tree) {
  ForwardTrace trace = forward(model, tree);
  std::size_t best = 0;
  for (std::size_t k = 1; k < trace.p.size(); ++k)
    if (trace.p[k] > trace.p[best]) best = k;
  return {best, std::move(trace.p)};
}

}  // namespace htn
