#include "htn/enumeration.hpp"

#include <cmath>
#include <stdexcept>

namespace htn {

double brute_force_joint(const HtmmParameters& params, const LabeledTree& tree,
                         const LatentAssignment& assignment) {
  if (assignment.state.size() != tree.size() || assignment.switch_pos.size() != tree.size())
    throw std::invalid_argument("assignment shape does not match tree");
  const ProbTables t = materialize(params);
  double p = 1.0;
  for (std::size_t u = 0; u < tree.size(); ++u) {
    const std::size_t q = assignment.state[u];
    p *= t.B(q, tree.nodes[u].label);
    if (tree.is_leaf(u)) {
      p *= t.pi[q];
    } else {
      const std::size_t l = assignment.switch_pos[u];
      if (l >= tree.arity(u)) throw std::invalid_argument("switch position out of range");
      const auto phi = t.phi_present(tree.arity(u));
      const std::size_t child = tree.nodes[u].children[l];
      p *= phi[l] * t.A(q, assignment.state[child], l);
    }
  }
  return p;
}

namespace {

constexpr double kEnumerationGuard = 1e7;

// Walks every (state, switch) completion with an odometer and hands the
// joint probability of each to the sink.
template <typename Sink>
void enumerate(const HtmmParameters& params, const LabeledTree& tree, Sink&& sink) {
  const std::size_t U = tree.size();
  const std::size_t C = params.C;
  double combos = 1.0;
  for (std::size_t u = 0; u < U; ++u) {
    combos *= static_cast<double>(C);
    if (!tree.is_leaf(u)) combos *= static_cast<double>(tree.arity(u));
    if (combos > kEnumerationGuard)
      throw std::invalid_argument("instance too large for enumeration");
  }

  LatentAssignment a;
  a.state.assign(U, 0);
  a.switch_pos.assign(U, 0);
  for (;;) {
    sink(brute_force_joint(params, tree, a), a);
    // advance: states first, then switch positions of internal nodes
    std::size_t u = 0;
    for (; u < U; ++u) {
      if (++a.state[u] < C) break;
      a.state[u] = 0;
    }
    if (u < U) continue;
    for (u = 0; u < U; ++u) {
      if (tree.is_leaf(u)) continue;
      if (++a.switch_pos[u] < tree.arity(u)) break;
      a.switch_pos[u] = 0;
    }
    if (u == U) return;
  }
}

}  // namespace

double brute_force_marginal(const HtmmParameters& params, const LabeledTree& tree) {
  double total = 0.0;
  enumerate(params, tree, [&](double p, const LatentAssignment&) { total += p; });
  return total;
}

NodePosteriors brute_force_posteriors(const HtmmParameters& params,
                                      const LabeledTree& tree) {
  const std::size_t C = params.C;
  const std::size_t U = tree.size();
  NodePosteriors post;
  post.C = C;
  post.eps_node.assign(U * C, 0.0);
  post.eps_pair.resize(U);
  for (std::size_t u = 0; u < U; ++u)
    if (!tree.is_leaf(u)) post.eps_pair[u].assign(tree.arity(u) * C * C, 0.0);

  double total = 0.0;
  enumerate(params, tree, [&](double p, const LatentAssignment& a) {
    total += p;
    for (std::size_t u = 0; u < U; ++u) {
      post.eps_node[u * C + a.state[u]] += p;
      if (tree.is_leaf(u)) continue;
      const std::size_t l = a.switch_pos[u];
      const std::size_t child = tree.nodes[u].children[l];
      post.eps_pair[u][(l * C + a.state[u]) * C + a.state[child]] += p;
    }
  });

  for (double& x : post.eps_node) x /= total;
  for (auto& pair : post.eps_pair)
    for (double& x : pair) x /= total;
  post.loglik = std::log(total);
  return post;
}

}  // namespace htn
