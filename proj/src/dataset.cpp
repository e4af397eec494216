#include "htn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "htn/rng.hpp"

namespace htn {

void Dataset::validate() const {
  for (std::size_t n = 0; n < trees.size(); ++n) {
    const LabeledTree& tree = trees[n];
    const std::string where = "tree " + std::to_string(n) + ": ";
    if (tree.nodes.empty()) throw std::runtime_error(where + "empty tree");
    if (tree.klass < 0 || static_cast<std::size_t>(tree.klass) >= K)
      throw std::runtime_error(where + "class out of range");
    if (tree.nodes[0].parent != kNoParent)
      throw std::runtime_error(where + "root has a parent");
    std::size_t leaves = 0;
    for (std::size_t u = 0; u < tree.size(); ++u) {
      const TreeNode& node = tree.nodes[u];
      if (node.label >= V()) throw std::runtime_error(where + "label out of range");
      if (node.children.size() > L) throw std::runtime_error(where + "arity exceeds L");
      if (node.children.empty()) ++leaves;
      if (u > 0 && (node.parent >= tree.size() || node.parent == u))
        throw std::runtime_error(where + "bad parent link");
      for (std::size_t c : node.children) {
        if (c >= tree.size() || tree.nodes[c].parent != u)
          throw std::runtime_error(where + "inconsistent child link");
        if (c <= u) throw std::runtime_error(where + "not in pre-order");
      }
    }
    if (leaves == 0) throw std::runtime_error(where + "no leaves");
    // reachability: every non-root node must have a parent (acyclic by the
    // pre-order check above), and parents must list each node exactly once
    std::vector<std::size_t> listed(tree.size(), 0);
    for (const TreeNode& node : tree.nodes)
      for (std::size_t c : node.children) ++listed[c];
    for (std::size_t u = 1; u < tree.size(); ++u)
      if (listed[u] != 1) throw std::runtime_error(where + "node not reachable exactly once");
    if (listed[0] != 0) throw std::runtime_error(where + "root listed as a child");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.vocab = vocab;
  out.K = K;
  out.L = L;
  out.trees.reserve(indices.size());
  for (std::size_t idx : indices) out.trees.push_back(trees.at(idx));
  return out;
}

Dataset load_dataset(std::istream& in, const LabelVocab* vocab) {
  Dataset ds;
  if (vocab) ds.vocab = *vocab;
  const bool grow = vocab == nullptr;

  std::string line;
  std::size_t lineno = 0;
  long max_class = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("line " + std::to_string(lineno) + ": missing tab separator", 0, lineno);
    const std::string class_field = line.substr(0, tab);
    long klass = 0;
    std::size_t consumed = 0;
    try {
      klass = std::stol(class_field, &consumed);
    } catch (const std::exception&) {
      consumed = std::string::npos;
    }
    if (consumed != class_field.size() || klass < 0)
      throw ParseError("line " + std::to_string(lineno) + ": bad class id '" + class_field + "'",
                       0, lineno);
    std::string body = line.substr(tab + 1);
    if (!body.empty() && body.back() == '\r') body.pop_back();
    LabeledTree tree;
    try {
      tree = parse_tree(body, ds.vocab, grow);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what(), e.offset, lineno);
    }
    tree.klass = static_cast<int>(klass);
    max_class = std::max(max_class, klass);
    ds.L = std::max(ds.L, tree.max_arity());
    ds.trees.push_back(std::move(tree));
  }
  if (ds.trees.empty()) throw std::runtime_error("empty dataset");
  ds.K = static_cast<std::size_t>(max_class) + 1;

  std::vector<std::size_t> per_class(ds.K, 0);
  for (const auto& t : ds.trees) ++per_class[static_cast<std::size_t>(t.klass)];
  for (std::size_t k = 0; k < ds.K; ++k)
    if (per_class[k] == 0)
      ds.warnings.push_back("class " + std::to_string(k) + " has no samples");
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_dataset(in, nullptr);
}

Dataset load_dataset(const std::filesystem::path& path, const LabelVocab& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_dataset(in, &vocab);
}

void save_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& tree : dataset.trees)
    out << tree.klass << '\t' << serialize_tree(tree, dataset.vocab) << '\n';
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_dataset(dataset, out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<FoldSplit> stratified_folds(const Dataset& dataset, std::size_t k,
                                        std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("fold count must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t n = 0; n < dataset.size(); ++n)
    by_class[dataset.trees[n].klass].push_back(n);
  for (const auto& [klass, members] : by_class)
    if (members.size() < k)
      throw std::invalid_argument("class " + std::to_string(klass) + " has " +
                                  std::to_string(members.size()) + " samples, fewer than k=" +
                                  std::to_string(k));

  Rng rng(derive_seed(seed, 0xf01d5));
  std::vector<std::vector<std::size_t>> folds(k);
  for (auto& [klass, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t pos = 0; pos < members.size(); ++pos)
      folds[pos % k].push_back(members[pos]);
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());

  std::vector<FoldSplit> splits(k);
  for (std::size_t f = 0; f < k; ++f) {
    splits[f].test = folds[f];
    for (std::size_t g = 0; g < k; ++g)
      if (g != f)
        splits[f].train.insert(splits[f].train.end(), folds[g].begin(), folds[g].end());
    std::sort(splits[f].train.begin(), splits[f].train.end());
  }
  return splits;
}

namespace {

// Skeleton: BFS growth until the node budget is spent. Each internal node
// draws its arity uniformly in 1..L, truncated by the remaining budget.
LabeledTree sample_skeleton(std::size_t node_count, std::size_t max_outdegree, Rng& rng) {
  LabeledTree tree;
  tree.nodes.resize(node_count);
  std::vector<std::size_t> queue{0};
  std::size_t head = 0;
  std::size_t next = 1;
  while (next < node_count) {
    const std::size_t u = queue[head++];
    const std::size_t budget = std::min<std::size_t>(max_outdegree, node_count - next);
    const std::size_t arity = 1 + static_cast<std::size_t>(rng.next_below(budget));
    for (std::size_t l = 0; l < arity; ++l) {
      tree.nodes[u].children.push_back(next);
      tree.nodes[next].parent = u;
      queue.push_back(next);
      ++next;
    }
  }
  return tree;
}

// Pre-order renumbering; sample_skeleton produces BFS order but the library
// invariant is depth-first storage.
LabeledTree to_preorder(const LabeledTree& tree) {
  LabeledTree out;
  out.klass = tree.klass;
  out.nodes.reserve(tree.size());
  std::vector<std::size_t> order;
  std::vector<std::size_t> remap(tree.size(), 0);
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    remap[u] = order.size();
    order.push_back(u);
    const auto& ch = tree.nodes[u].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  for (std::size_t u : order) {
    TreeNode node;
    node.label = tree.nodes[u].label;
    node.parent = tree.nodes[u].parent == kNoParent ? kNoParent : remap[tree.nodes[u].parent];
    for (std::size_t c : tree.nodes[u].children) node.children.push_back(remap[c]);
    out.nodes.push_back(std::move(node));
  }
  return out;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.class_models.empty()) throw std::invalid_argument("no class models");
  const std::size_t C = spec.class_models[0].C;
  const std::size_t L = spec.class_models[0].L;
  const std::size_t V = spec.class_models[0].V;
  for (const auto& m : spec.class_models)
    if (m.C != C || m.L != L || m.V != V)
      throw std::invalid_argument("class models disagree on (C, L, V)");
  if (spec.min_nodes < 1 || spec.max_nodes < spec.min_nodes)
    throw std::invalid_argument("bad node count range");

  Dataset ds;
  ds.vocab = LabelVocab::placeholder(V);
  ds.K = spec.class_models.size();
  ds.L = L;
  Rng rng(derive_seed(seed, 0x5a3d));

  for (std::size_t klass = 0; klass < spec.class_models.size(); ++klass) {
    const ProbTables t = materialize(spec.class_models[klass]);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      const std::size_t nodes =
          spec.min_nodes + static_cast<std::size_t>(
                               rng.next_below(spec.max_nodes - spec.min_nodes + 1));
      LabeledTree tree = to_preorder(sample_skeleton(nodes, L, rng));
      tree.klass = static_cast<int>(klass);

      // states bottom-up: leaves from the prior, internal nodes through a
      // sampled switch and the selected child's state
      std::vector<std::size_t> state(tree.size(), 0);
      for (std::size_t uu = tree.size(); uu-- > 0;) {
        if (tree.is_leaf(uu)) {
          state[uu] = rng.next_discrete(t.pi);
        } else {
          const auto phi = t.phi_present(tree.arity(uu));
          const std::size_t l = rng.next_discrete(phi);
          const std::size_t child_state = state[tree.nodes[uu].children[l]];
          std::vector<double> column(C);
          for (std::size_t i = 0; i < C; ++i) column[i] = t.A(i, child_state, l);
          state[uu] = rng.next_discrete(column);
        }
      }
      for (std::size_t u = 0; u < tree.size(); ++u) {
        std::vector<double> row(V);
        for (std::size_t v = 0; v < V; ++v) row[v] = t.B(state[u], v);
        tree.nodes[u].label = rng.next_discrete(row);
      }
      ds.trees.push_back(std::move(tree));
    }
  }
  return ds;
}

}  // namespace htn
