#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "htn/htmm.hpp"
#include "htn/tree.hpp"

namespace htn {

// A labeled tree corpus. K is 1 + the largest class id seen, L the maximum
// outdegree (observed, or a configured upper bound at least that large).
struct Dataset {
  std::vector<LabeledTree> trees;
  LabelVocab vocab;
  std::size_t K = 0;
  std::size_t L = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return trees.size(); }
  std::size_t V() const { return vocab.size(); }

  // Checks every structural invariant; throws std::runtime_error on the
  // first violation.
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Line format: "<class_id> \t <bracketed tree>". Blank lines and lines
// starting with '#' are skipped. With a vocabulary given, unknown labels map
// to its UNK index; otherwise the vocabulary is built in first-seen order.
Dataset load_dataset(const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path, const LabelVocab& vocab);
Dataset load_dataset(std::istream& in, const LabelVocab* vocab);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, std::ostream& out);

// Stratified k-fold split: returns (train, test) index pairs; the folds
// partition [0, N) and per-class fold sizes differ by at most one.
struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
std::vector<FoldSplit> stratified_folds(const Dataset& dataset, std::size_t k,
                                        std::uint64_t seed);

// Generator recipe: one model per class (shared dimensions), a skeleton
// distribution, and a sample count per class.
struct SyntheticSpec {
  std::vector<HtmmParameters> class_models;
  std::size_t min_nodes = 1;
  std::size_t max_nodes = 1;
  std::size_t samples_per_class = 0;
};

// Samples trees from the switching-parent joint of each class model:
// skeleton first (node count uniform in range, internal arity uniform in
// 1..L), then states bottom-up, then labels. Identical (spec, seed) inputs
// produce identical datasets.
Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace htn
