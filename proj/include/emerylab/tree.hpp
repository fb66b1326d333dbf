#pragma once

// Finite filtered probability space on a rooted scenario tree, together with
// the node-indexed process types every other module works with.
//
// Time runs over the grid {0, ..., N}. A node at level t stands for an atom of
// F_t; its children are the atoms of F_{t+1} it splits into. Node ids are
// assigned in breadth-first order, so the root is always node 0 and the nodes
// of level t form a contiguous block.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "emerylab/error.hpp"

namespace emerylab {

using NodeId = std::size_t;

/// Absolute tolerance for every probability comparison.
inline constexpr double kProbabilityTolerance = 1e-12;

/// One node of a tree description; `parent` is empty for the root.
struct NodeSpec {
  std::string id;
  std::optional<std::string> parent;
  double prob = 1.0;
};

class ScenarioTree {
 public:
  struct Node {
    std::optional<NodeId> parent;
    int level = 0;
    double branch_prob = 1.0;
    double path_prob = 1.0;
    std::vector<NodeId> children;
    std::string label;
  };

  std::size_t size() const noexcept { return nodes_.size(); }
  int steps() const noexcept { return static_cast<int>(levels_.size()) - 1; }
  NodeId root() const noexcept { return 0; }

  const Node& node(NodeId n) const {
    check(n);
    return nodes_[n];
  }
  int level(NodeId n) const { return node(n).level; }
  std::optional<NodeId> parent(NodeId n) const { return node(n).parent; }
  std::span<const NodeId> children(NodeId n) const { return node(n).children; }
  bool is_leaf(NodeId n) const { return node(n).children.empty(); }
  double branch_probability(NodeId n) const { return node(n).branch_prob; }
  const std::string& label(NodeId n) const { return node(n).label; }

  std::span<const NodeId> level_nodes(int t) const {
    require(t >= 0 && t <= steps(), ErrorCode::LevelOutOfRange,
            "level " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
    return levels_[static_cast<std::size_t>(t)];
  }
  std::span<const NodeId> leaves() const { return levels_.back(); }

  /// Non-leaf nodes in breadth-first order. Each one carries one free
  /// coordinate of a predictable process (the value shared by its children).
  std::span<const NodeId> internal_nodes() const { return internal_; }

  /// Position of a leaf inside `leaves()`.
  std::size_t leaf_index(NodeId leaf) const {
    check(leaf);
    require(is_leaf(leaf), ErrorCode::UnknownNode, "node " + std::to_string(leaf) + " is not a leaf");
    return leaf - levels_.back().front();
  }

  /// Position of an internal node inside `internal_nodes()`.
  std::size_t internal_index(NodeId n) const {
    check(n);
    require(!is_leaf(n), ErrorCode::UnknownNode, "node " + std::to_string(n) + " is a leaf");
    return n;
  }

  std::optional<NodeId> find(const std::string& label) const {
    auto it = by_label_.find(label);
    if (it == by_label_.end()) return std::nullopt;
    return it->second;
  }

  NodeId at(const std::string& label) const {
    auto n = find(label);
    require(n.has_value(), ErrorCode::UnknownNode, "no node labelled '" + label + "'");
    return *n;
  }

  /// Ancestor of `n` sitting at level `t` (n itself when t == level(n)).
  NodeId ancestor_at(NodeId n, int t) const {
    require(t >= 0 && t <= level(n), ErrorCode::LevelOutOfRange, "ancestor level out of range");
    while (nodes_[n].level > t) n = *nodes_[n].parent;
    return n;
  }

  friend ScenarioTree build_tree(std::span<const NodeSpec> spec, std::optional<int> steps);

 private:
  void check(NodeId n) const {
    require(n < nodes_.size(), ErrorCode::UnknownNode, "node id " + std::to_string(n) + " not in tree");
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<NodeId>> levels_;
  std::vector<NodeId> internal_;
  std::map<std::string, NodeId> by_label_;
};

/// Validates a node list and lays it out breadth-first. Children keep the
/// order in which they appear in `spec`. When `steps` is given every leaf
/// must sit at that level; otherwise the horizon is the depth of the tree.
inline ScenarioTree build_tree(std::span<const NodeSpec> spec, std::optional<int> steps = std::nullopt) {
  require(!spec.empty(), ErrorCode::InvalidTree, "empty node list");

  std::map<std::string, std::size_t> index;
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    require(index.emplace(spec[i].id, i).second, ErrorCode::InvalidTree, "duplicate node id '" + spec[i].id + "'");
    if (!spec[i].parent) {
      require(!root.has_value(), ErrorCode::InvalidTree, "more than one root");
      root = i;
    }
  }
  require(root.has_value(), ErrorCode::InvalidTree, "no root node");
  require(std::abs(spec[*root].prob - 1.0) <= kProbabilityTolerance, ErrorCode::ProbabilitySumViolation,
          "root probability must be 1");

  std::vector<std::vector<std::size_t>> kids(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!spec[i].parent) continue;
    auto it = index.find(*spec[i].parent);
    require(it != index.end(), ErrorCode::UnknownNode,
            "parent '" + *spec[i].parent + "' of '" + spec[i].id + "' not found");
    require(spec[i].prob > 0.0, ErrorCode::NonPositiveProbability,
            "branch probability of '" + spec[i].id + "' is not strictly positive");
    kids[it->second].push_back(i);
  }

  ScenarioTree tree;
  std::vector<std::size_t> order{*root};
  std::vector<int> depth(spec.size(), -1);
  depth[*root] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (std::size_t k : kids[order[head]]) {
      require(depth[k] < 0, ErrorCode::InvalidTree, "node '" + spec[k].id + "' reached twice");
      depth[k] = depth[order[head]] + 1;
      order.push_back(k);
    }
  }
  require(order.size() == spec.size(), ErrorCode::InvalidTree, "some nodes are not reachable from the root");

  std::vector<NodeId> id_of(spec.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) id_of[order[pos]] = pos;

  int horizon = *std::max_element(depth.begin(), depth.end());
  if (steps) horizon = *steps;
  require(horizon >= 1, ErrorCode::InvalidTree, "horizon must be at least one step");

  tree.nodes_.resize(order.size());
  tree.levels_.assign(static_cast<std::size_t>(horizon) + 1, {});
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t src = order[pos];
    auto& node = tree.nodes_[pos];
    node.level = depth[src];
    node.label = spec[src].id;
    node.branch_prob = spec[src].parent ? spec[src].prob : 1.0;
    if (spec[src].parent) {
      node.parent = id_of[index.at(*spec[src].parent)];
      node.path_prob = tree.nodes_[*node.parent].path_prob * node.branch_prob;
    }
    for (std::size_t k : kids[src]) node.children.push_back(id_of[k]);
    if (node.children.empty()) {
      require(node.level == horizon, ErrorCode::RaggedDepth,
              "leaf '" + node.label + "' at level " + std::to_string(node.level) + ", expected " +
                  std::to_string(horizon));
    } else {
      require(node.level < horizon, ErrorCode::RaggedDepth, "node '" + node.label + "' extends past the horizon");
      double sum = 0.0;
      for (std::size_t k : kids[src]) sum += spec[k].prob;
      require(std::abs(sum - 1.0) <= kProbabilityTolerance, ErrorCode::ProbabilitySumViolation,
              "children of '" + node.label + "' have probabilities summing to " + std::to_string(sum));
      tree.internal_.push_back(pos);
    }
    tree.levels_[static_cast<std::size_t>(node.level)].push_back(pos);
    tree.by_label_.emplace(node.label, pos);
  }
  return tree;
}

/// Tree in which every node at every level branches with the same
/// probabilities. Labels are the root "r" followed by child indices.
inline ScenarioTree make_uniform_tree(int steps, const std::vector<double>& branch_probs) {
  require(steps >= 1, ErrorCode::InvalidTree, "horizon must be at least one step");
  require(!branch_probs.empty(), ErrorCode::InvalidTree, "no branches");
  std::vector<NodeSpec> spec{{"r", std::nullopt, 1.0}};
  std::vector<std::string> frontier{"r"};
  for (int t = 0; t < steps; ++t) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      for (std::size_t k = 0; k < branch_probs.size(); ++k) {
        std::string id = parent + std::to_string(k);
        spec.push_back({id, parent, branch_probs[k]});
        next.push_back(std::move(id));
      }
    }
    frontier = std::move(next);
  }
  return build_tree(spec, steps);
}

/// Product of branch probabilities from the root to `n`.
inline double node_probability(const ScenarioTree& tree, NodeId n) { return tree.node(n).path_prob; }

/// Node-indexed real values. Used for adapted processes and, restricted to the
/// leaves, for terminal random variables.
class AdaptedProcess {
 public:
  AdaptedProcess() = default;
  explicit AdaptedProcess(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit AdaptedProcess(std::vector<double> values) : values_(std::move(values)) {}
  AdaptedProcess(std::initializer_list<double> values) : values_(values) {}

  static AdaptedProcess constant(const ScenarioTree& tree, double c) { return AdaptedProcess(tree.size(), c); }

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](NodeId n) { return values_[n]; }
  double operator[](NodeId n) const { return values_[n]; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& raw() noexcept { return values_; }
  const std::vector<double>& raw() const noexcept { return values_; }

  /// Values at the leaves, in `tree.leaves()` order.
  std::vector<double> terminal(const ScenarioTree& tree) const {
    std::vector<double> out;
    out.reserve(tree.leaves().size());
    for (NodeId leaf : tree.leaves()) out.push_back(values_.at(leaf));
    return out;
  }

  AdaptedProcess& operator+=(const AdaptedProcess& o) { return zip(o, [](double a, double b) { return a + b; }); }
  AdaptedProcess& operator-=(const AdaptedProcess& o) { return zip(o, [](double a, double b) { return a - b; }); }
  AdaptedProcess& operator*=(const AdaptedProcess& o) { return zip(o, [](double a, double b) { return a * b; }); }
  AdaptedProcess& operator/=(const AdaptedProcess& o) { return zip(o, [](double a, double b) { return a / b; }); }
  AdaptedProcess& operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
  }
  AdaptedProcess& operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
  }

  friend AdaptedProcess operator+(AdaptedProcess a, const AdaptedProcess& b) { return a += b; }
  friend AdaptedProcess operator-(AdaptedProcess a, const AdaptedProcess& b) { return a -= b; }
  friend AdaptedProcess operator*(AdaptedProcess a, const AdaptedProcess& b) { return a *= b; }
  friend AdaptedProcess operator/(AdaptedProcess a, const AdaptedProcess& b) { return a /= b; }
  friend AdaptedProcess operator*(double c, AdaptedProcess a) { return a *= c; }
  friend AdaptedProcess operator*(AdaptedProcess a, double c) { return a *= c; }
  friend AdaptedProcess operator+(AdaptedProcess a, double c) { return a += c; }
  friend AdaptedProcess operator+(double c, AdaptedProcess a) { return a += c; }
  friend AdaptedProcess operator-(AdaptedProcess a, double c) { return a += -c; }
  friend AdaptedProcess operator-(AdaptedProcess a) { return a *= -1.0; }

  friend bool operator==(const AdaptedProcess&, const AdaptedProcess&) = default;

 private:
  template <class F>
  AdaptedProcess& zip(const AdaptedProcess& o, F f) {
    require(o.size() == size(), ErrorCode::SizeMismatch, "processes live on different trees");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] = f(values_[i], o.values_[i]);
    return *this;
  }

  std::vector<double> values_;
};

inline void require_on_tree(const ScenarioTree& tree, const AdaptedProcess& x, const char* what = "process") {
  require(x.size() == tree.size(), ErrorCode::SizeMismatch,
          std::string(what) + " has " + std::to_string(x.size()) + " values, tree has " +
              std::to_string(tree.size()) + " nodes");
}

/// A process whose value at a node is known one step earlier: all children of
/// a node carry the same value. The root value is the time-0 integrand.
class PredictableProcess {
 public:
  PredictableProcess() = default;

  PredictableProcess(const ScenarioTree& tree, std::vector<double> values) : values_(std::move(values)) {
    require(values_.size() == tree.size(), ErrorCode::SizeMismatch, "predictable process size mismatch");
    for (NodeId n : tree.internal_nodes()) {
      auto kids = tree.children(n);
      for (NodeId c : kids) {
        require(std::abs(values_[c] - values_[kids.front()]) <= kProbabilityTolerance,
                ErrorCode::PredictabilityViolation,
                "children of node '" + tree.label(n) + "' carry different integrand values");
      }
    }
  }

  static std::size_t num_coordinates(const ScenarioTree& tree) { return 1 + tree.internal_nodes().size(); }

  /// coords[0] is the root value; coords[1 + k] is shared by the children of
  /// the k-th internal node.
  static PredictableProcess from_coordinates(const ScenarioTree& tree, std::span<const double> coords) {
    require(coords.size() == num_coordinates(tree), ErrorCode::SizeMismatch, "wrong number of coordinates");
    PredictableProcess eta;
    eta.values_.assign(tree.size(), 0.0);
    eta.values_[tree.root()] = coords[0];
    const auto internal = tree.internal_nodes();
    for (std::size_t k = 0; k < internal.size(); ++k) {
      for (NodeId c : tree.children(internal[k])) eta.values_[c] = coords[1 + k];
    }
    return eta;
  }

  static PredictableProcess constant(const ScenarioTree& tree, double c) {
    PredictableProcess eta;
    eta.values_.assign(tree.size(), c);
    return eta;
  }

  std::vector<double> coordinates(const ScenarioTree& tree) const {
    std::vector<double> coords{values_.at(tree.root())};
    for (NodeId n : tree.internal_nodes()) coords.push_back(values_.at(tree.children(n).front()));
    return coords;
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](NodeId n) const { return values_[n]; }
  std::span<const double> values() const noexcept { return values_; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  std::vector<double> values_;
};

/// An equivalent probability on the leaves, stored as node masses.
class Measure {
 public:
  /// The tree's own probability P.
  static Measure physical(const ScenarioTree& tree) {
    Measure q;
    q.mass_.resize(tree.size());
    for (NodeId n = 0; n < tree.size(); ++n) q.mass_[n] = node_probability(tree, n);
    return q;
  }

  /// Leaf weights in `tree.leaves()` order; all strictly positive, summing to one.
  Measure(const ScenarioTree& tree, std::span<const double> leaf_weights) {
    const auto leaves = tree.leaves();
    require(leaf_weights.size() == leaves.size(), ErrorCode::SizeMismatch, "one weight per leaf expected");
    mass_.assign(tree.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      require(leaf_weights[i] > 0.0, ErrorCode::NonPositiveProbability,
              "measure weight of leaf '" + tree.label(leaves[i]) + "' is not strictly positive");
      mass_[leaves[i]] = leaf_weights[i];
      total += leaf_weights[i];
    }
    require(std::abs(total - 1.0) <= kProbabilityTolerance, ErrorCode::ProbabilitySumViolation,
            "measure weights sum to " + std::to_string(total));
    for (int t = tree.steps() - 1; t >= 0; --t) {
      for (NodeId n : tree.level_nodes(t)) {
        double s = 0.0;
        for (NodeId c : tree.children(n)) s += mass_[c];
        mass_[n] = s;
      }
    }
  }

  /// Normalizes arbitrary positive leaf weights.
  static Measure normalized(const ScenarioTree& tree, std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    require(total > 0.0, ErrorCode::NonPositiveProbability, "weights have no mass");
    for (double& w : weights) w /= total;
    // Renormalization can leave the sum a few ulps away from one; push the
    // residue onto the largest weight.
    double sum = 0.0;
    for (double w : weights) sum += w;
    auto biggest = std::max_element(weights.begin(), weights.end());
    *biggest += 1.0 - sum;
    return Measure(tree, weights);
  }

  double mass(NodeId n) const { return mass_.at(n); }

  /// q(child | parent).
  double conditional(const ScenarioTree& tree, NodeId child) const {
    auto p = tree.parent(child);
    if (!p) return 1.0;
    return mass_[child] / mass_[*p];
  }

  std::vector<double> leaf_weights(const ScenarioTree& tree) const {
    std::vector<double> w;
    for (NodeId leaf : tree.leaves()) w.push_back(mass_.at(leaf));
    return w;
  }

  std::size_t size() const noexcept { return mass_.size(); }

 private:
  Measure() = default;
  std::vector<double> mass_;
};

/// Sum over children of q(child | node) * X(child), for every node at level t.
inline std::vector<double> conditional_expectation(const ScenarioTree& tree, const Measure& q, const AdaptedProcess& x,
                                                   int t) {
  require(t >= 0 && t < tree.steps(), ErrorCode::LevelOutOfRange,
          "conditional expectation from level " + std::to_string(t + 1) + " to " + std::to_string(t));
  require_on_tree(tree, x);
  std::vector<double> out;
  for (NodeId n : tree.level_nodes(t)) {
    double s = 0.0;
    for (NodeId c : tree.children(n)) s += q.conditional(tree, c) * x[c];
    out.push_back(s);
  }
  return out;
}

/// E_Q[g] for a terminal variable given in leaf order.
inline double expectation(const ScenarioTree& tree, const Measure& q, std::span<const double> leaf_values) {
  const auto leaves = tree.leaves();
  require(leaf_values.size() == leaves.size(), ErrorCode::SizeMismatch, "one value per leaf expected");
  double s = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) s += q.mass(leaves[i]) * leaf_values[i];
  return s;
}

inline double expectation(const ScenarioTree& tree, const Measure& q, const AdaptedProcess& x) {
  require_on_tree(tree, x);
  double s = 0.0;
  for (NodeId leaf : tree.leaves()) s += q.mass(leaf) * x[leaf];
  return s;
}

}  // namespace emerylab
