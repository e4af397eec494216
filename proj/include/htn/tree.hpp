#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace htn {

inline constexpr std::size_t kNoParent = std::numeric_limits<std::size_t>::max();
inline constexpr int kNoClass = -1;

// Thrown by the tree/dataset parsers; `offset` is the character position
// within the offending expression, `line` the 1-based file line (0 when the
// input did not come from a file).
struct ParseError : std::runtime_error {
  ParseError(std::string msg, std::size_t offset, std::size_t line = 0)
      : std::runtime_error(std::move(msg)), offset(offset), line(line) {}
  std::size_t offset;
  std::size_t line;
};

// Label alphabet. Indices are dense in [0, size). Out-of-vocabulary lookups
// resolve to `unk_index`, which always names a valid entry, so emission
// tables stay total on any input.
class LabelVocab {
 public:
  LabelVocab() = default;

  // Vocabulary of `size` placeholder symbols s0..s{size-1} (synthetic data).
  static LabelVocab placeholder(std::size_t size);

  std::size_t add(std::string_view label);           // existing index if known
  std::optional<std::size_t> find(std::string_view label) const;
  std::size_t lookup(std::string_view label) const;  // unk_index if unknown

  const std::string& symbol(std::size_t index) const { return symbols_.at(index); }
  std::size_t size() const { return symbols_.size(); }
  std::size_t unk_index() const { return unk_index_; }
  void set_unk_index(std::size_t index) {
    if (index >= symbols_.size()) throw std::out_of_range("unk_index out of range");
    unk_index_ = index;
  }

  bool operator==(const LabelVocab&) const = default;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t unk_index_ = 0;
};

struct TreeNode {
  std::size_t label = 0;               // index into the vocabulary
  std::size_t parent = kNoParent;      // kNoParent for the root
  std::vector<std::size_t> children;   // ordered; position l is significant
};

// Ordered rooted tree with one discrete label per node. Nodes are stored in
// depth-first pre-order, so the root is node 0 and every child index is
// greater than its parent's; the upward/downward recursions rely on that.
struct LabeledTree {
  std::vector<TreeNode> nodes;
  int klass = kNoClass;

  std::size_t size() const { return nodes.size(); }
  bool is_leaf(std::size_t u) const { return nodes[u].children.empty(); }
  std::size_t arity(std::size_t u) const { return nodes[u].children.size(); }
  std::size_t max_arity() const;
};

// Parses one bracketed expression "(label child1 child2 ...)". Unknown
// labels grow the vocabulary when `grow_vocab` is set and map to the UNK
// index otherwise. Throws ParseError with the character offset.
LabeledTree parse_tree(std::string_view text, LabelVocab& vocab, bool grow_vocab);

// Inverse of parse_tree up to whitespace.
std::string serialize_tree(const LabeledTree& tree, const LabelVocab& vocab);

// Structural + label equality (class ignored).
bool isomorphic(const LabeledTree& a, const LabeledTree& b);

}  // namespace htn
