#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "htn/tree.hpp"

namespace htn {

// Free parameters of one bottom-up hidden tree Markov model. Every
// probability table of the model is the softmax of one lambda group over
// its normalization axis, so the entries here are unconstrained reals:
//   lambda_a  [C x C x L]  transition to parent state i given child state j
//                          at position l; normalized over i per (j, l)
//   lambda_pi [C]          leaf state prior; normalized over i
//   lambda_b  [C x V]      label emission; normalized over v per state i
//   lambda_phi[L]          switching-parent position weight; normalized over l
//
// The same struct doubles as the gradient holder, since gradients share the
// shapes exactly.
struct HtmmParameters {
  std::size_t C = 0;
  std::size_t L = 0;
  std::size_t V = 0;
  std::vector<double> lambda_a;
  std::vector<double> lambda_pi;
  std::vector<double> lambda_b;
  std::vector<double> lambda_phi;

  HtmmParameters() = default;
  HtmmParameters(std::size_t C, std::size_t L, std::size_t V);

  static HtmmParameters zeros(std::size_t C, std::size_t L, std::size_t V);
  // i.i.d. Gaussian entries, mean 0, the conventional near-uniform start.
  static HtmmParameters random_init(std::size_t C, std::size_t L, std::size_t V,
                                    std::uint64_t seed, double stddev = 0.1);

  double& a(std::size_t i, std::size_t j, std::size_t l) {
    return lambda_a[(i * C + j) * L + l];
  }
  double a(std::size_t i, std::size_t j, std::size_t l) const {
    return lambda_a[(i * C + j) * L + l];
  }
  double& b(std::size_t i, std::size_t v) { return lambda_b[i * V + v]; }
  double b(std::size_t i, std::size_t v) const { return lambda_b[i * V + v]; }

  std::size_t parameter_count() const {
    return lambda_a.size() + lambda_pi.size() + lambda_b.size() + lambda_phi.size();
  }

  void add_scaled(const HtmmParameters& other, double factor);
  void fill(double value);

  bool operator==(const HtmmParameters&) const = default;
};

using HtmmGradients = HtmmParameters;

// Materialized probability tables. Same layout as the lambda groups.
struct ProbTables {
  std::size_t C = 0;
  std::size_t L = 0;
  std::size_t V = 0;
  std::vector<double> a;    // a[(i*C+j)*L+l], sums to 1 over i per (j, l)
  std::vector<double> pi;   // sums to 1
  std::vector<double> b;    // b[i*V+v], row i sums to 1
  std::vector<double> phi;  // sums to 1

  double A(std::size_t i, std::size_t j, std::size_t l) const {
    return a[(i * C + j) * L + l];
  }
  double B(std::size_t i, std::size_t v) const { return b[i * V + v]; }

  // Switch distribution restricted to the first `arity` positions and
  // renormalized. Nodes with fewer children than L mix only over the
  // children they actually have.
  std::vector<double> phi_present(std::size_t arity) const;
};

ProbTables materialize(const HtmmParameters& params);

// Exact node and pair posteriors of one tree under one model.
//   eps_node[u*C + i]            P(Q_u = i | x)
//   eps_pair[u][(l*C + i)*C + j] P(Q_u = i, Q_child_l = j, S_u = l | x),
//                                present positions only; empty for leaves
struct NodePosteriors {
  std::size_t C = 0;
  std::vector<double> eps_node;
  std::vector<std::vector<double>> eps_pair;
  double loglik = 0.0;

  double node(std::size_t u, std::size_t i) const { return eps_node[u * C + i]; }
  double pair(std::size_t u, std::size_t l, std::size_t i, std::size_t j) const {
    return eps_pair[u][(l * C + i) * C + j];
  }
  // P(S_u = l | x)
  double switch_posterior(std::size_t u, std::size_t l) const;
};

// log P(x) by the scaled upward recursion. Throws std::invalid_argument on a
// label out of range or an arity exceeding L.
double upward_log_likelihood(const HtmmParameters& params, const LabeledTree& tree);
double upward_log_likelihood(const ProbTables& tables, const LabeledTree& tree);

// Full upward-downward pass; posteriors are exact under the switching-parent
// joint, and .loglik matches upward_log_likelihood.
NodePosteriors upward_downward(const HtmmParameters& params, const LabeledTree& tree);
NodePosteriors upward_downward(const ProbTables& tables, const LabeledTree& tree);

// Which second term the transition gradient uses. The `fisher` form follows
// from the Fisher identity and passes finite-difference checks; the
// `printed` form replaces the switch-conditioned child marginal with the
// full child marginal and is kept for comparison only.
enum class TransitionGradientForm { fisher, printed };

// Gradients of log P(x) with respect to every lambda group, evaluated at the
// posteriors of the same (params, tree) pair.
HtmmGradients loglik_gradients(
    const HtmmParameters& params, const LabeledTree& tree,
    const NodePosteriors& posteriors,
    TransitionGradientForm form = TransitionGradientForm::fisher);

// One EM iteration over the given trees: upward-downward E-step, expected
// count M-step with additive smoothing, lambda = log(probability). The total
// log-likelihood over the trees never decreases.
HtmmParameters em_step(const HtmmParameters& params,
                       std::span<const LabeledTree> trees,
                       double smoothing = 1e-8);

double total_log_likelihood(const HtmmParameters& params,
                            std::span<const LabeledTree> trees);

}  // namespace htn
