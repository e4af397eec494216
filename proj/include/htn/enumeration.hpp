#pragma once

#include <vector>

#include "htn/htmm.hpp"
#include "htn/tree.hpp"

namespace htn {

// One completion of the latent variables: a state per node and a switch
// position per internal node (indexed by node, unused entries ignored).
struct LatentAssignment {
  std::vector<std::size_t> state;
  std::vector<std::size_t> switch_pos;
};

// P(x, Q = assignment.state, S = assignment.switch_pos) as the literal
// product of model factors. Base case of the enumeration oracles below.
double brute_force_joint(const HtmmParameters& params, const LabeledTree& tree,
                         const LatentAssignment& assignment);

// Exact marginal and posteriors by summing brute_force_joint over every
// completion. Deliberately shares nothing with the upward-downward code
// path: these are the oracles the recursions are tested against. Guarded at
// C^U * prod(arity) <= 10^7 completions; throws std::invalid_argument above.
double brute_force_marginal(const HtmmParameters& params, const LabeledTree& tree);
NodePosteriors brute_force_posteriors(const HtmmParameters& params,
                                      const LabeledTree& tree);

}  // namespace htn
