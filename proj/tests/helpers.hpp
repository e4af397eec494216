#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "htn/dataset.hpp"
#include "htn/htmm.hpp"
#include "htn/rng.hpp"
#include "htn/tree.hpp"

namespace htn::testing {

// Random pre-order tree with exactly `nodes` nodes, arities <= max_outdegree,
// labels uniform below vocab_size. Children are grown depth-first so the
// recursion itself yields pre-order storage.
inline LabeledTree random_tree(Rng& rng, std::size_t nodes, std::size_t max_outdegree,
                               std::size_t vocab_size) {
  struct Builder {
    LabeledTree tree;
    std::size_t remaining;
    Rng& rng;
    std::size_t L, V;

    std::size_t build(std::size_t parent) {
      const std::size_t id = tree.nodes.size();
      tree.nodes.emplace_back();
      tree.nodes[id].parent = parent;
      tree.nodes[id].label = static_cast<std::size_t>(rng.next_below(V));
      if (remaining > 0) {
        const std::size_t arity =
            1 + static_cast<std::size_t>(rng.next_below(std::min(L, remaining)));
        remaining -= arity;
        for (std::size_t l = 0; l < arity; ++l) {
          const std::size_t child = build(id);  // may reallocate tree.nodes
          tree.nodes[id].children.push_back(child);
        }
      }
      return id;
    }
  };
  Builder b{{}, nodes - 1, rng, max_outdegree, vocab_size};
  b.build(kNoParent);
  return std::move(b.tree);
}

inline HtmmParameters random_params(std::size_t C, std::size_t L, std::size_t V,
                                    std::uint64_t seed, double stddev = 1.0) {
  return HtmmParameters::random_init(C, L, V, seed, stddev);
}

// lambda = log(p) is an exact softmax preimage, so tables come out equal to
// the requested probabilities (up to exp/log rounding).
inline std::vector<double> log_of(const std::vector<double>& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) out[k] = std::log(probs[k]);
  return out;
}

// Two-class task from two generator models that differ only in their
// emissions: class 0 prefers symbols {0, 1}, class 1 prefers {2, 3}. The
// per-node evidence is strong enough that the Bayes classifier is nearly
// perfect, which makes accuracy thresholds stable across seeds.
inline SyntheticSpec separable_spec() {
  HtmmParameters class0(2, 2, 4);
  class0.lambda_b = log_of({0.70, 0.10, 0.10, 0.10,
                            0.10, 0.70, 0.10, 0.10});
  HtmmParameters class1(2, 2, 4);
  class1.lambda_b = log_of({0.10, 0.10, 0.70, 0.10,
                            0.10, 0.10, 0.10, 0.70});
  SyntheticSpec spec;
  spec.class_models = {class0, class1};
  spec.min_nodes = 7;
  spec.max_nodes = 14;
  return spec;
}

inline Dataset separable_train(std::size_t per_class = 100, std::uint64_t seed = 2001) {
  SyntheticSpec spec = separable_spec();
  spec.samples_per_class = per_class;
  return generate_synthetic(spec, seed);
}

inline Dataset separable_test(std::size_t per_class = 50, std::uint64_t seed = 2002) {
  SyntheticSpec spec = separable_spec();
  spec.samples_per_class = per_class;
  return generate_synthetic(spec, seed);
}

}  // namespace htn::testing
