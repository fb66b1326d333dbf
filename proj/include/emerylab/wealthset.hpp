#pragma once

// Fork-convex sets of wealth processes on a scenario tree.
//
// Splicing strictly positive wealth processes at arbitrary nodes with
// node-measurable proportions generates exactly the processes whose one-step
// growth vector at each node is a convex combination of the generators'
// growth vectors there. A WealthSet therefore stores, per internal node, a
// finite list of growth vectors (one entry per child) whose convex hull is
// the node's growth set.
//
// Two kinds are supported:
//   Hull   strictly positive generator processes with X_0 = 1;
//   Conic  a riskless account (growth 1) plus risky assets with gross returns
//          R_j(child); the growth of dollar position theta is
//          1 + sum_j theta_j (R_j - 1), restricted to nonnegative wealth.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emerylab/lp.hpp"
#include "emerylab/tree.hpp"

namespace emerylab {

inline constexpr double kPositivityThreshold = 1e-12;
inline constexpr double kLpTolerance = 1e-9;

using GrowthVector = std::vector<double>;

enum class WealthKind { Hull, Conic };

constexpr std::string_view to_string(WealthKind k) { return k == WealthKind::Hull ? "hull" : "conic"; }

struct NodeGrowth {
  /// Every generator's growth vector at the node (duplicates allowed).
  std::vector<GrowthVector> candidates;
  /// Extreme points of the growth set, in first-seen order.
  std::vector<GrowthVector> extremes;
  /// Conic only: gross returns, one row per risky asset, one column per child.
  std::vector<std::vector<double>> returns;
  /// Conic only: false when some dollar position makes a riskless profit here.
  bool bounded = true;
};

namespace detail {

/// Minimal L1 distance between `target` and conv(points), with the optimal
/// mixing weights.
inline std::pair<double, std::vector<double>> hull_residual(const std::vector<GrowthVector>& points,
                                                            const GrowthVector& target) {
  const std::size_t k = points.size(), m = target.size();
  lp::Problem prob(k + 2 * m);
  for (std::size_t c = 0; c < 2 * m; ++c) prob.objective[k + c] = -1.0;
  std::vector<double> sum(k + 2 * m, 0.0);
  for (std::size_t i = 0; i < k; ++i) sum[i] = 1.0;
  prob.add(sum, lp::Relation::Equal, 1.0);
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> row(k + 2 * m, 0.0);
    for (std::size_t i = 0; i < k; ++i) row[i] = points[i][c];
    row[k + c] = 1.0;
    row[k + m + c] = -1.0;
    prob.add(std::move(row), lp::Relation::Equal, target[c]);
  }
  const auto sol = lp::maximize(prob, 1e-12);
  require(sol.status == lp::Status::Optimal, ErrorCode::InvalidArgument, "hull residual LP did not solve");
  return {-sol.objective, std::vector<double>(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(k))};
}

/// Among weights with residual within `slack` of the optimum, the
/// lexicographically smallest one.
inline std::vector<double> lexicographic_weights(const std::vector<GrowthVector>& points, const GrowthVector& target,
                                                 double residual, double slack) {
  const std::size_t k = points.size(), m = target.size();
  const std::size_t nv = k + 2 * m;
  lp::Problem base(nv);
  std::vector<double> sum(nv, 0.0);
  for (std::size_t i = 0; i < k; ++i) sum[i] = 1.0;
  base.add(sum, lp::Relation::Equal, 1.0);
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> row(nv, 0.0);
    for (std::size_t i = 0; i < k; ++i) row[i] = points[i][c];
    row[k + c] = 1.0;
    row[k + m + c] = -1.0;
    base.add(std::move(row), lp::Relation::Equal, target[c]);
  }
  std::vector<double> budget(nv, 0.0);
  for (std::size_t c = 0; c < 2 * m; ++c) budget[k + c] = 1.0;
  base.add(budget, lp::Relation::LessEqual, residual + slack);

  std::vector<double> fixed;
  for (std::size_t i = 0; i < k; ++i) {
    lp::Problem prob = base;
    for (std::size_t j = 0; j < i; ++j) {
      std::vector<double> row(nv, 0.0);
      row[j] = 1.0;
      prob.add(row, lp::Relation::LessEqual, fixed[j] + slack);
    }
    prob.objective.assign(nv, 0.0);
    prob.objective[i] = 1.0;
    const auto sol = lp::minimize(prob, 1e-12);
    if (sol.status != lp::Status::Optimal) break;
    fixed.push_back(std::max(0.0, sol.x[i]));
    if (i + 1 == k) {
      std::vector<double> w(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(k));
      for (double& v : w) v = std::max(0.0, v);
      return w;
    }
  }
  // Rounding can make the chained programs infeasible; fall back to any optimum.
  return hull_residual(points, target).second;
}

inline bool near_equal(const GrowthVector& a, const GrowthVector& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

/// Drops candidates lying in the convex hull of the others.
inline std::vector<GrowthVector> extreme_points(const std::vector<GrowthVector>& candidates) {
  std::vector<GrowthVector> unique;
  for (const auto& g : candidates) {
    if (std::none_of(unique.begin(), unique.end(), [&](const GrowthVector& u) { return near_equal(u, g, 1e-14); })) {
      unique.push_back(g);
    }
  }
  std::vector<bool> keep(unique.size(), true);
  for (std::size_t i = 0; i < unique.size(); ++i) {
    std::vector<GrowthVector> others;
    for (std::size_t j = 0; j < unique.size(); ++j) {
      if (j != i && keep[j]) others.push_back(unique[j]);
    }
    if (others.empty()) continue;
    if (hull_residual(others, unique[i]).first <= kLpTolerance) keep[i] = false;
  }
  std::vector<GrowthVector> out;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    if (keep[i]) out.push_back(unique[i]);
  }
  return out;
}

/// Excess-return matrix D (assets x children) from gross returns.
inline Eigen::MatrixXd excess_returns(const std::vector<std::vector<double>>& returns, std::size_t children) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(returns.size()), static_cast<Eigen::Index>(children));
  for (std::size_t j = 0; j < returns.size(); ++j) {
    for (std::size_t c = 0; c < children; ++c) d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = returns[j][c] - 1.0;
  }
  return d;
}

struct ArbitrageSearch {
  double profit_sum = 0.0;
  std::vector<double> theta;
  std::vector<double> profit;
};

/// maximize sum_c theta . D(:, c)  s.t.  theta . D(:, c) >= 0, |theta_j| <= 1.
inline ArbitrageSearch arbitrage_lp(const std::vector<std::vector<double>>& returns, std::size_t children) {
  const std::size_t k = returns.size();
  ArbitrageSearch out;
  out.theta.assign(k, 0.0);
  out.profit.assign(children, 0.0);
  if (k == 0) return out;
  lp::Problem prob(k);
  std::fill(prob.free.begin(), prob.free.end(), true);
  for (std::size_t c = 0; c < children; ++c) {
    std::vector<double> row(k);
    for (std::size_t j = 0; j < k; ++j) {
      row[j] = returns[j][c] - 1.0;
      prob.objective[j] += row[j];
    }
    prob.add(std::move(row), lp::Relation::GreaterEqual, 0.0);
  }
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> row(k, 0.0);
    row[j] = 1.0;
    prob.add(row, lp::Relation::LessEqual, 1.0);
    prob.add(row, lp::Relation::GreaterEqual, -1.0);
  }
  const auto sol = lp::maximize(prob, 1e-12);
  require(sol.status == lp::Status::Optimal, ErrorCode::InvalidArgument, "arbitrage LP did not solve");
  out.theta = sol.x;
  out.profit_sum = sol.objective;
  for (std::size_t c = 0; c < children; ++c) {
    for (std::size_t j = 0; j < k; ++j) out.profit[c] += out.theta[j] * (returns[j][c] - 1.0);
  }
  return out;
}

/// Vertices of {1 + theta . D >= 0} in growth space, assuming no arbitrage.
inline std::vector<GrowthVector> conic_vertices(const std::vector<std::vector<double>>& returns, std::size_t m) {
  const GrowthVector ones(m, 1.0);
  if (returns.empty()) return {ones};
  const Eigen::MatrixXd d = excess_returns(returns, m);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.transpose());
  qr.setThreshold(1e-12);
  const auto r = static_cast<std::size_t>(qr.rank());
  if (r == 0) return {ones};
  // Independent assets span the same growth set as all of them.
  Eigen::MatrixXd basis(static_cast<Eigen::Index>(r), d.cols());
  for (std::size_t i = 0; i < r; ++i) basis.row(static_cast<Eigen::Index>(i)) = d.row(qr.colsPermutation().indices()(static_cast<Eigen::Index>(i)));

  std::vector<GrowthVector> vertices;
  std::vector<std::size_t> pick(r);
  for (std::size_t i = 0; i < r; ++i) pick[i] = i;
  while (true) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t i = 0; i < r; ++i) a.row(static_cast<Eigen::Index>(i)) = basis.col(static_cast<Eigen::Index>(pick[i])).transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-12);
    if (lu.isInvertible()) {
      const Eigen::VectorXd theta = lu.solve(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(r), -1.0));
      const Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m)) + basis.transpose() * theta;
      if (g.minCoeff() >= -1e-10) {
        GrowthVector v(m);
        for (std::size_t c = 0; c < m; ++c) v[c] = std::max(0.0, g(static_cast<Eigen::Index>(c)));
        for (std::size_t i = 0; i < r; ++i) v[pick[i]] = 0.0;
        if (std::none_of(vertices.begin(), vertices.end(), [&](const GrowthVector& u) { return near_equal(u, v, 1e-10); })) {
          vertices.push_back(std::move(v));
        }
      }
    }
    // Next r-subset of {0..m-1} in lexicographic order.
    std::size_t i = r;
    while (i > 0 && pick[i - 1] == m - r + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < r; ++j) pick[j] = pick[j - 1] + 1;
  }
  return vertices;
}

}  // namespace detail

class WealthSet {
 public:
  /// Convex hull of strictly positive generators, each with X_0 = 1.
  static WealthSet hull(const ScenarioTree& tree, std::vector<AdaptedProcess> generators,
                        std::vector<std::string> names = {}) {
    require(!generators.empty(), ErrorCode::InvalidGenerator, "a wealth set needs at least one generator");
    WealthSet w;
    w.tree_ = tree;
    w.kind_ = WealthKind::Hull;
    w.names_ = default_names(std::move(names), generators.size(), "g");
    for (std::size_t i = 0; i < generators.size(); ++i) {
      const auto& g = generators[i];
      require_on_tree(tree, g, "generator");
      require(std::abs(g[tree.root()] - 1.0) <= kProbabilityTolerance, ErrorCode::InvalidGenerator,
              "generator '" + w.names_[i] + "' does not start at 1");
      for (NodeId n = 0; n < tree.size(); ++n) {
        require(std::isfinite(g[n]), ErrorCode::InvalidGenerator, "generator '" + w.names_[i] + "' is not finite");
        require(g[n] > kPositivityThreshold, ErrorCode::ZeroGeneratorValue,
                "generator '" + w.names_[i] + "' is not strictly positive at node '" + tree.label(n) +
                    "'; blend it with a strictly positive generator first");
      }
    }
    w.generators_ = std::move(generators);
    w.growth_.resize(tree.size());
    for (NodeId n : tree.internal_nodes()) {
      auto& ng = w.growth_[n];
      for (const auto& g : w.generators_) {
        GrowthVector v;
        for (NodeId c : tree.children(n)) v.push_back(g[c] / g[n]);
        ng.candidates.push_back(std::move(v));
      }
      ng.extremes = detail::extreme_points(ng.candidates);
    }
    return w;
  }

  /// Riskless account plus risky assets; `returns[n]` is the gross-return
  /// matrix (assets x children) at internal node n and is ignored at leaves.
  static WealthSet conic(const ScenarioTree& tree, std::vector<std::vector<std::vector<double>>> returns,
                         std::vector<std::string> asset_names = {}) {
    require(returns.size() == tree.size(), ErrorCode::SizeMismatch, "one return matrix per node expected");
    WealthSet w;
    w.tree_ = tree;
    w.kind_ = WealthKind::Conic;
    w.growth_.resize(tree.size());
    std::size_t assets = 0;
    for (NodeId n : tree.internal_nodes()) assets = std::max(assets, returns[n].size());
    w.names_ = default_names(std::move(asset_names), assets, "asset");
    w.names_.insert(w.names_.begin(), "riskless");

    for (NodeId n : tree.internal_nodes()) {
      const std::size_t m = tree.children(n).size();
      for (const auto& row : returns[n]) {
        require(row.size() == m, ErrorCode::DegenerateReturns,
                "return vector at node '" + tree.label(n) + "' does not match its " + std::to_string(m) + " children");
        for (double r : row) {
          require(std::isfinite(r) && r >= 0.0, ErrorCode::DegenerateReturns,
                  "gross returns at node '" + tree.label(n) + "' must be finite and nonnegative");
        }
      }
      auto& ng = w.growth_[n];
      ng.returns = returns[n];
      ng.candidates.push_back(GrowthVector(m, 1.0));
      for (const auto& row : ng.returns) ng.candidates.push_back(row);
      ng.bounded = detail::arbitrage_lp(ng.returns, m).profit_sum <= kLpTolerance;
      if (ng.bounded) ng.extremes = detail::conic_vertices(ng.returns, m);
    }

    // Generators: the riskless account and each asset held outright.
    w.generators_.assign(1 + assets, AdaptedProcess::constant(tree, 1.0));
    for (NodeId n : tree.internal_nodes()) {
      const auto kids = tree.children(n);
      for (std::size_t j = 0; j < assets; ++j) {
        for (std::size_t c = 0; c < kids.size(); ++c) {
          const double r = j < returns[n].size() ? returns[n][j][c] : 1.0;
          w.generators_[1 + j][kids[c]] = w.generators_[1 + j][n] * r;
        }
      }
    }
    return w;
  }

  /// Conic set whose risky assets are given as strictly positive price processes.
  static WealthSet conic_from_prices(const ScenarioTree& tree, const std::vector<AdaptedProcess>& prices,
                                     std::vector<std::string> names = {}) {
    std::vector<std::vector<std::vector<double>>> returns(tree.size());
    for (const auto& s : prices) {
      require_on_tree(tree, s, "price process");
      for (NodeId n = 0; n < tree.size(); ++n) {
        require(s[n] > kPositivityThreshold, ErrorCode::ZeroGeneratorValue,
                "price process is not strictly positive at node '" + tree.label(n) + "'");
      }
    }
    for (NodeId n : tree.internal_nodes()) {
      for (const auto& s : prices) {
        std::vector<double> row;
        for (NodeId c : tree.children(n)) row.push_back(s[c] / s[n]);
        returns[n].push_back(std::move(row));
      }
    }
    return conic(tree, std::move(returns), std::move(names));
  }

  WealthKind kind() const noexcept { return kind_; }
  const ScenarioTree& tree() const noexcept { return tree_; }
  const std::vector<AdaptedProcess>& generators() const noexcept { return generators_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const NodeGrowth& growth(NodeId n) const { return growth_.at(n); }

  /// True when every node's growth set is bounded (always for hulls).
  bool bounded() const {
    for (NodeId n : tree_.internal_nodes()) {
      if (!growth_[n].bounded) return false;
    }
    return true;
  }

  /// A strictly positive member: the first generator for hulls, the riskless
  /// account for conic sets.
  const AdaptedProcess& positive_generator() const { return generators_.front(); }

 private:
  static std::vector<std::string> default_names(std::vector<std::string> names, std::size_t n, const char* stem) {
    if (names.empty()) {
      for (std::size_t i = 0; i < n; ++i) names.push_back(std::string(stem) + std::to_string(i));
    }
    require(names.size() == n, ErrorCode::SizeMismatch, "wrong number of names");
    return names;
  }

  ScenarioTree tree_;
  WealthKind kind_ = WealthKind::Hull;
  std::vector<AdaptedProcess> generators_;
  std::vector<std::string> names_;
  std::vector<NodeGrowth> growth_;
};

/// Per-node convex hulls of the generators' one-step growth vectors.
inline std::vector<NodeGrowth> growth_hull(const ScenarioTree& tree, const std::vector<AdaptedProcess>& generators) {
  const auto w = WealthSet::hull(tree, generators);
  std::vector<NodeGrowth> out(tree.size());
  for (NodeId n : tree.internal_nodes()) out[n] = w.growth(n);
  return out;
}

/// Follow X up to level s; from each level-s node a on, put the fraction
/// alpha[a] of X_a into X' and the rest into X''.
/// `alpha` is indexed like `tree.level_nodes(s)`.
inline AdaptedProcess fork_convex_combine(const ScenarioTree& tree, const AdaptedProcess& x, const AdaptedProcess& x1,
                                          const AdaptedProcess& x2, int s, std::span<const double> alpha) {
  require_on_tree(tree, x);
  require_on_tree(tree, x1);
  require_on_tree(tree, x2);
  const auto level = tree.level_nodes(s);
  require(alpha.size() == level.size(), ErrorCode::SizeMismatch, "one proportion per level-s node expected");
  for (double a : alpha) require(a >= 0.0 && a <= 1.0, ErrorCode::AlphaOutOfRange, "proportion outside [0, 1]");
  for (NodeId n = 0; n < tree.size(); ++n) {
    require(x1[n] > 0.0 && x2[n] > 0.0, ErrorCode::NonPositiveSwitchTarget,
            "switch targets must be strictly positive (node '" + tree.label(n) + "')");
  }
  AdaptedProcess out = x;
  const NodeId first = level.front();
  for (NodeId n = first; n < tree.size(); ++n) {
    const NodeId a = tree.ancestor_at(n, s);
    const double al = alpha[a - first];
    out[n] = al * (x[a] / x1[a]) * x1[n] + (1.0 - al) * (x[a] / x2[a]) * x2[n];
  }
  return out;
}

/// (1 - lambda) X + lambda chi for lambda in (0, 1); strictly positive
/// whenever X is nonnegative.
inline AdaptedProcess blend(const ScenarioTree& tree, const AdaptedProcess& x, const AdaptedProcess& chi,
                            double lambda) {
  require_on_tree(tree, x);
  require_on_tree(tree, chi);
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::InvalidArgument, "blend weight must lie strictly inside (0, 1)");
  for (NodeId n = 0; n < tree.size(); ++n) {
    require(chi[n] > kPositivityThreshold, ErrorCode::ZeroGeneratorValue, "blend target is not strictly positive");
  }
  return (1.0 - lambda) * x + lambda * chi;
}

struct Membership {
  bool member = true;
  /// Largest per-node L1 distance between a growth vector and the growth set.
  double max_residual = 0.0;
  std::optional<NodeId> worst_node;
  /// Per internal node: mixing weights over `growth(n).extremes` (hull and
  /// bounded conic sets) or dollar positions theta (unbounded conic sets).
  /// Empty at leaves and below nodes where the wealth is zero.
  std::vector<std::vector<double>> weights;
};

/// Whether X (with X_0 = 1) lies in the set: every one-step growth vector
/// is within `tol` (L1) of the node's growth set.
inline Membership contains(const WealthSet& w, const AdaptedProcess& x, double tol = kLpTolerance) {
  const auto& tree = w.tree();
  require_on_tree(tree, x);
  Membership out;
  out.weights.resize(tree.size());
  auto fail = [&](NodeId n, double residual) {
    if (residual > out.max_residual) {
      out.max_residual = residual;
      out.worst_node = n;
    }
  };
  fail(tree.root(), std::abs(x[tree.root()] - 1.0));
  for (NodeId n = 0; n < tree.size(); ++n) fail(n, std::max(0.0, -x[n]));

  for (NodeId n : tree.internal_nodes()) {
    const auto kids = tree.children(n);
    if (x[n] <= 0.0) {
      // Zero wealth can only stay at zero.
      for (NodeId c : kids) fail(c, std::abs(x[c]));
      continue;
    }
    GrowthVector g;
    for (NodeId c : kids) g.push_back(x[c] / x[n]);
    const auto& ng = w.growth(n);
    if (ng.bounded) {
      auto [residual, weights] = detail::hull_residual(ng.extremes, g);
      fail(n, residual);
      if (residual <= tol) weights = detail::lexicographic_weights(ng.extremes, g, residual, 1e-12);
      out.weights[n] = std::move(weights);
    } else {
      // Unbounded conic growth set: g - 1 must be a dollar-position payoff and g >= 0.
      const std::size_t k = ng.returns.size(), m = g.size();
      lp::Problem prob(k + 2 * m);
      for (std::size_t j = 0; j < k; ++j) prob.free[j] = true;
      for (std::size_t c = 0; c < 2 * m; ++c) prob.objective[k + c] = -1.0;
      for (std::size_t c = 0; c < m; ++c) {
        std::vector<double> row(k + 2 * m, 0.0);
        for (std::size_t j = 0; j < k; ++j) row[j] = ng.returns[j][c] - 1.0;
        row[k + c] = 1.0;
        row[k + m + c] = -1.0;
        prob.add(std::move(row), lp::Relation::Equal, g[c] - 1.0);
      }
      const auto sol = lp::maximize(prob, 1e-12);
      double residual = -sol.objective;
      for (double v : g) residual += std::max(0.0, -v);
      fail(n, residual);
      out.weights[n].assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(k));
    }
  }
  out.member = out.max_residual <= tol;
  return out;
}

/// Random element of a bounded set: independent Dirichlet(1) weights over
/// the extreme growths at every node. Deterministic given the engine state.
template <class Rng>
AdaptedProcess sample_process(const WealthSet& w, Rng& rng) {
  const auto& tree = w.tree();
  require(w.bounded(), ErrorCode::Na1Fails, "cannot sample from an unbounded growth set");
  std::gamma_distribution<double> gamma(1.0, 1.0);
  AdaptedProcess x(tree.size(), 0.0);
  x[tree.root()] = 1.0;
  for (NodeId n : tree.internal_nodes()) {
    const auto& ext = w.growth(n).extremes;
    std::vector<double> weight(ext.size());
    double total = 0.0;
    for (double& v : weight) total += (v = gamma(rng));
    const auto kids = tree.children(n);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      double g = 0.0;
      for (std::size_t i = 0; i < ext.size(); ++i) g += weight[i] / total * ext[i][c];
      x[kids[c]] = x[n] * g;
    }
  }
  return x;
}

struct Na1Verdict {
  bool holds = true;
  /// When NA1 holds: sup over level-t nodes of the largest attainable X_t.
  std::vector<double> level_bounds;
  /// When NA1 fails: the node, a dollar position theta (|theta_j| <= 1) and
  /// its profit per child, all nonnegative with a positive entry.
  std::optional<NodeId> node;
  std::vector<double> theta;
  std::vector<double> profit;
};

inline Na1Verdict na1_check(const WealthSet& w) {
  const auto& tree = w.tree();
  Na1Verdict v;
  for (NodeId n : tree.internal_nodes()) {
    const auto& ng = w.growth(n);
    if (ng.bounded) continue;
    auto arb = detail::arbitrage_lp(ng.returns, tree.children(n).size());
    v.holds = false;
    v.node = n;
    v.theta = std::move(arb.theta);
    v.profit = std::move(arb.profit);
    return v;
  }
  // Every node's growth set is bounded, hence so is every wealth process.
  AdaptedProcess bound(tree.size(), 0.0);
  bound[tree.root()] = 1.0;
  for (NodeId n : tree.internal_nodes()) {
    const auto kids = tree.children(n);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      double best = 0.0;
      for (const auto& e : w.growth(n).extremes) best = std::max(best, e[c]);
      bound[kids[c]] = bound[n] * best;
    }
  }
  for (int t = 0; t <= tree.steps(); ++t) {
    double m = 0.0;
    for (NodeId n : tree.level_nodes(t)) m = std::max(m, bound[n]);
    v.level_bounds.push_back(m);
  }
  return v;
}

/// Recomputes the profit of a failure certificate from the raw returns.
inline bool recheck_na1_certificate(const WealthSet& w, const Na1Verdict& v, double tol = 1e-12) {
  if (v.holds || !v.node) return false;
  const auto& ng = w.growth(*v.node);
  if (v.theta.size() != ng.returns.size()) return false;
  const auto kids = w.tree().children(*v.node);
  double best = 0.0;
  for (std::size_t c = 0; c < kids.size(); ++c) {
    double p = 0.0;
    for (std::size_t j = 0; j < v.theta.size(); ++j) p += v.theta[j] * (ng.returns[j][c] - 1.0);
    if (p < -tol) return false;
    best = std::max(best, p);
  }
  return best > tol;
}

/// Wealth in X(capital) built from a failure certificate: hold the riskless
/// account, then at the certificate node take the dollar position theta.
/// Its terminal value dominates the certificate's profit on the node's subtree.
inline AdaptedProcess arbitrage_wealth(const WealthSet& w, const Na1Verdict& v, double capital) {
  require(!v.holds && v.node.has_value(), ErrorCode::InvalidArgument, "verdict carries no arbitrage certificate");
  require(capital > 0.0, ErrorCode::InvalidArgument, "initial capital must be positive");
  const auto& tree = w.tree();
  const NodeId node = *v.node;
  AdaptedProcess x = AdaptedProcess::constant(tree, capital);
  const auto kids = tree.children(node);
  for (std::size_t c = 0; c < kids.size(); ++c) {
    double p = 0.0;
    for (std::size_t j = 0; j < v.theta.size(); ++j) p += v.theta[j] * (w.growth(node).returns[j][c] - 1.0);
    for (NodeId leaf : tree.leaves()) {
      if (tree.ancestor_at(leaf, tree.level(kids[c])) != kids[c]) continue;
      for (int t = tree.level(kids[c]); t <= tree.steps(); ++t) x[tree.ancestor_at(leaf, t)] = capital + p;
    }
  }
  return x;
}

/// The claim an arbitrage certificate super-replicates from any capital:
/// the profit of its child, on the leaves below that child, zero elsewhere.
/// Round-off negatives in the profit are clipped to zero.
inline std::vector<double> arbitrage_claim(const WealthSet& w, const Na1Verdict& v) {
  require(!v.holds && v.node.has_value(), ErrorCode::InvalidArgument, "verdict carries no arbitrage certificate");
  const auto& tree = w.tree();
  const NodeId node = *v.node;
  std::vector<double> xi;
  const int below = tree.level(node) + 1;
  for (NodeId leaf : tree.leaves()) {
    if (tree.ancestor_at(leaf, tree.level(node)) != node) {
      xi.push_back(0.0);
      continue;
    }
    const NodeId child = tree.ancestor_at(leaf, below);
    const auto kids = tree.children(node);
    const auto c = static_cast<std::size_t>(std::find(kids.begin(), kids.end(), child) - kids.begin());
    xi.push_back(std::max(0.0, v.profit[c]));
  }
  return xi;
}

}  // namespace emerylab
