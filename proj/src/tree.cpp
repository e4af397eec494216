#include "htn/tree.hpp"

#include <cctype>

namespace htn {

LabelVocab LabelVocab::placeholder(std::size_t size) {
  LabelVocab v;
  for (std::size_t i = 0; i < size; ++i) v.add("s" + std::to_string(i));
  return v;
}

std::size_t LabelVocab::add(std::string_view label) {
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const std::size_t idx = symbols_.size();
  symbols_.emplace_back(label);
  index_.emplace(symbols_.back(), idx);
  return idx;
}

std::optional<std::size_t> LabelVocab::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelVocab::lookup(std::string_view label) const {
  auto found = find(label);
  return found ? *found : unk_index_;
}

std::size_t LabeledTree::max_arity() const {
  std::size_t m = 0;
  for (const auto& n : nodes) m = std::max(m, n.children.size());
  return m;
}

namespace {

// Recursion bound for the descent parser; far beyond any realistic tree
// depth but well short of the stack limit.
constexpr std::size_t kMaxParseDepth = 10000;

struct Parser {
  std::string_view text;
  std::size_t pos = 0;
  LabelVocab& vocab;
  bool grow;
  LabeledTree tree;
  std::size_t depth = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("parse error at offset " + std::to_string(pos) + ": " + what, pos);
  }

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }

  std::size_t parse_node(std::size_t parent) {
    skip_ws();
    if (pos >= text.size() || text[pos] != '(') fail("expected '('");
    if (++depth > kMaxParseDepth) fail("nesting too deep");
    ++pos;
    skip_ws();
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != '(' && text[pos] != ')' &&
           !std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    if (pos == start) fail("empty node label");
    const std::string_view label = text.substr(start, pos - start);

    const std::size_t id = tree.nodes.size();
    tree.nodes.emplace_back();
    tree.nodes[id].parent = parent;
    tree.nodes[id].label = grow ? vocab.add(label) : vocab.lookup(label);

    skip_ws();
    while (pos < text.size() && text[pos] == '(') {
      const std::size_t child = parse_node(id);
      tree.nodes[id].children.push_back(child);
      skip_ws();
    }
    if (pos >= text.size() || text[pos] != ')') fail("expected ')'");
    ++pos;
    --depth;
    return id;
  }
};

}  // namespace

LabeledTree parse_tree(std::string_view text, LabelVocab& vocab, bool grow_vocab) {
  Parser p{text, 0, vocab, grow_vocab, {}, 0};
  p.parse_node(kNoParent);
  p.skip_ws();
  if (p.pos != text.size()) p.fail("trailing content after tree");
  return std::move(p.tree);
}

std::string serialize_tree(const LabeledTree& tree, const LabelVocab& vocab) {
  std::string out;
  // Pre-order storage lets us emit iteratively with an explicit stack.
  struct Frame {
    std::size_t node;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{0, 0}};
  out += '(';
  out += vocab.symbol(tree.nodes[0].label);
  while (!stack.empty()) {
    Frame& f = stack.back();
    const TreeNode& n = tree.nodes[f.node];
    if (f.next_child < n.children.size()) {
      const std::size_t c = n.children[f.next_child++];
      out += " (";
      out += vocab.symbol(tree.nodes[c].label);
      stack.push_back({c, 0});
    } else {
      out += ')';
      stack.pop_back();
    }
  }
  return out;
}

bool isomorphic(const LabeledTree& a, const LabeledTree& b) {
  if (a.size() != b.size()) return false;
  // Both trees are in pre-order, so structural equality is per-index
  // equality of labels and child lists.
  for (std::size_t u = 0; u < a.size(); ++u) {
    if (a.nodes[u].label != b.nodes[u].label) return false;
    if (a.nodes[u].children != b.nodes[u].children) return false;
  }
  return true;
}

}  // namespace htn
