#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "emerylab/tree.hpp"
#include "emerylab/wealthset.hpp"

namespace emerylab::testing {

using Rng = std::mt19937_64;

inline std::vector<double> random_probabilities(Rng& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (double& v : p) s += (v = u(rng));
  for (double& v : p) v /= s;
  double t = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) t += p[i];
  p.back() = 1.0 - t;
  return p;
}

/// Tree of the given depth; each internal node branches into
/// [min_branch, max_branch] children.
inline ScenarioTree random_tree(Rng& rng, int depth, std::size_t max_branch, std::size_t min_branch = 2) {
  std::uniform_int_distribution<std::size_t> branch(min_branch, max_branch);
  std::vector<NodeSpec> spec{{"n0", std::nullopt, 1.0}};
  std::vector<std::string> frontier{"n0"};
  std::size_t next_id = 1;
  for (int t = 0; t < depth; ++t) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      const auto p = random_probabilities(rng, branch(rng));
      for (double pr : p) {
        std::string id = "n" + std::to_string(next_id++);
        spec.push_back({id, parent, pr});
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  return build_tree(spec, depth);
}

/// Tree with a depth drawn from [1, max_depth] and at most `max_leaves` leaves.
inline ScenarioTree random_small_tree(Rng& rng, int max_depth, std::size_t max_branch, std::size_t max_leaves) {
  std::uniform_int_distribution<int> depth(1, max_depth);
  for (;;) {
    auto t = random_tree(rng, depth(rng), max_branch);
    if (t.leaves().size() <= max_leaves) return t;
  }
}

inline Measure random_measure(Rng& rng, const ScenarioTree& tree) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(tree.leaves().size());
  for (double& v : w) v = u(rng);
  return Measure::normalized(tree, w);
}

inline AdaptedProcess random_process(Rng& rng, const ScenarioTree& tree, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  AdaptedProcess x(tree.size());
  for (NodeId n = 0; n < tree.size(); ++n) x[n] = u(rng);
  return x;
}

inline PredictableProcess random_predictable(Rng& rng, const ScenarioTree& tree, double bound = 1.0) {
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> coords(PredictableProcess::num_coordinates(tree));
  for (double& c : coords) c = u(rng);
  return PredictableProcess::from_coordinates(tree, coords);
}

/// Strictly positive process with X_0 = 1 and one-step growths in [lo, hi].
inline AdaptedProcess random_positive_wealth(Rng& rng, const ScenarioTree& tree, double lo = 0.4, double hi = 2.2) {
  std::uniform_real_distribution<double> u(lo, hi);
  AdaptedProcess x(tree.size(), 1.0);
  for (NodeId n = 1; n < tree.size(); ++n) x[n] = x[*tree.parent(n)] * u(rng);
  return x;
}

/// Hull set: the riskless account plus `risky` random positive generators.
inline WealthSet random_hull_market(Rng& rng, const ScenarioTree& tree, std::size_t risky) {
  std::vector<AdaptedProcess> gens{AdaptedProcess::constant(tree, 1.0)};
  for (std::size_t i = 0; i < risky; ++i) gens.push_back(random_positive_wealth(rng, tree));
  return WealthSet::hull(tree, std::move(gens));
}

/// Conic market admitting an equivalent martingale measure: excess returns
/// have mean zero under random conditional weights, so no arbitrage exists.
inline WealthSet random_arbitrage_free_conic(Rng& rng, const ScenarioTree& tree, std::size_t assets) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<std::vector<std::vector<double>>> returns(tree.size());
  for (NodeId n : tree.internal_nodes()) {
    const auto m = tree.children(n).size();
    const auto q = random_probabilities(rng, m);
    for (std::size_t j = 0; j < assets; ++j) {
      std::vector<double> d(m);
      double mean = 0.0;
      for (std::size_t c = 0; c < m; ++c) mean += q[c] * (d[c] = u(rng));
      std::vector<double> row;
      for (std::size_t c = 0; c < m; ++c) row.push_back(1.0 + d[c] - mean);
      returns[n].push_back(std::move(row));
    }
  }
  return WealthSet::conic(tree, std::move(returns));
}

/// Arbitrage-free conic market with one asset at one node replaced by a
/// return vector that never loses and gains on at least one child.
inline std::pair<WealthSet, NodeId> random_planted_arbitrage(Rng& rng, const ScenarioTree& tree, std::size_t assets) {
  auto base = random_arbitrage_free_conic(rng, tree, assets);
  std::vector<std::vector<std::vector<double>>> returns(tree.size());
  for (NodeId n : tree.internal_nodes()) returns[n] = base.growth(n).returns;
  const auto internal = tree.internal_nodes();
  std::uniform_int_distribution<std::size_t> pick(0, internal.size() - 1);
  const NodeId node = internal[pick(rng)];
  std::uniform_int_distribution<std::size_t> asset(0, assets - 1);
  std::uniform_real_distribution<double> gain(0.0, 0.3);
  auto& row = returns[node][asset(rng)];
  for (double& r : row) r = 1.0 + gain(rng);
  row[0] = 1.05 + gain(rng);
  return {WealthSet::conic(tree, std::move(returns)), node};
}

}  // namespace emerylab::testing
