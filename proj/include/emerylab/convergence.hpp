#pragma once

// Numerical experiments around convergence in the semimartingale topology:
// the 1 + A - B + L decomposition of supermartingales started below 1, the
// P-limit criterion for integrals, the ucp upgrade for supermartingales, and
// the variation estimate for quadratic variation.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "emerylab/calculus.hpp"
#include "emerylab/metrics.hpp"
#include "emerylab/tree.hpp"

namespace emerylab {

inline constexpr int kNever = -1;

struct SupermartingaleDecomposition {
  AdaptedProcess z;
  /// jump + adjustment, so that Z = 1 + A - B + L.
  AdaptedProcess a;
  /// (Z_t - Z_{tau-}) 1{tau <= t}
  AdaptedProcess jump;
  /// Z_0 - 1, carried by A from time 0 on.
  double adjustment = 0.0;
  AdaptedProcess b;
  AdaptedProcess l;
  /// Z stopped just before tau.
  AdaptedProcess zeta;
  /// Martingale part of zeta.
  AdaptedProcess m;
  /// First level along the path to each node with Z > 2, or kNever.
  std::vector<int> tau;
};

/// Splits a nonnegative Q-supermartingale with Z_0 <= 1 at the first time it
/// exceeds 2. Before that time the process stays in [0, 2], so the martingale
/// part of the stopped process has jumps of size at most 4.
inline SupermartingaleDecomposition decompose(const ScenarioTree& tree, const AdaptedProcess& z, const Measure& q,
                                              double tol = kSupermartingaleTolerance) {
  require_on_tree(tree, z);
  require(z[tree.root()] <= 1.0 + kProbabilityTolerance, ErrorCode::InitialValueTooLarge,
          "Z_0 = " + std::to_string(z[tree.root()]) + " exceeds 1");
  for (NodeId n = 0; n < tree.size(); ++n) {
    require(z[n] >= 0.0, ErrorCode::InvalidArgument, "Z is negative at node '" + tree.label(n) + "'");
  }
  const auto verdict = is_supermartingale(tree, z, q, tol);
  require(verdict.holds, ErrorCode::NotSupermartingale,
          "violation " + std::to_string(verdict.max_violation) + " at node '" +
              tree.label(verdict.worst_node.value_or(0)) + "'");

  SupermartingaleDecomposition d;
  d.z = z;
  d.tau.assign(tree.size(), kNever);
  d.zeta = z;
  d.jump = AdaptedProcess(tree.size(), 0.0);
  // Z_0 <= 1 < 2, so tau >= 1 and the root is never stopped.
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.parent(n);
    if (d.tau[p] != kNever) {
      d.tau[n] = d.tau[p];
      d.zeta[n] = d.zeta[p];
    } else if (z[n] > 2.0) {
      d.tau[n] = tree.level(n);
      d.zeta[n] = z[p];
    }
    d.jump[n] = z[n] - d.zeta[n];
  }

  auto parts = doob_meyer(tree, d.zeta, q, tol);
  d.m = std::move(parts.martingale);
  d.b = std::move(parts.compensator);
  d.l = d.m - d.m[tree.root()];
  d.adjustment = z[tree.root()] - 1.0;
  d.a = d.jump + d.adjustment;
  return d;
}

struct MetricTrajectory {
  std::vector<std::size_t> n;
  std::vector<double> values;
  double threshold = 0.0;
  bool below_threshold = false;
};

/// P-functional of (eta^n . X^n)_T along a sequence; `below_threshold`
/// reports whether the last value is at most `threshold`.
inline MetricTrajectory sconv_criterion(const ScenarioTree& tree, std::span<const AdaptedProcess> xs,
                                        std::span<const PredictableProcess> etas, const Measure& q,
                                        double threshold) {
  require(xs.size() == etas.size(), ErrorCode::SizeMismatch, "one integrand per process expected");
  MetricTrajectory out;
  out.threshold = threshold;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(etas[i].max_abs() <= 1.0, ErrorCode::InvalidArgument, "integrands must be bounded by 1");
    out.n.push_back(i + 1);
    out.values.push_back(p_metric(tree, stochastic_integral(tree, etas[i], xs[i]).terminal(tree), q));
  }
  out.below_threshold = !out.values.empty() && out.values.back() <= threshold;
  return out;
}

/// Worst integrand with values in {-1, 1} for the Emery objective of X.
inline PredictableProcess bang_bang_adversary(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q,
                                              unsigned threads = 1) {
  EmeryOptions opts;
  opts.grid_step = 2.0;
  opts.threads = threads;
  opts.exhaustive_limit = 20;
  return emery_metric(tree, x, q, opts).witness;
}

struct UcpRow {
  std::size_t n = 0;
  double terminal_p = 0.0;  // P-functional of Z_T - 1
  double uniform = 0.0;     // uP-functional of Z - 1
};

struct UcpReport {
  std::vector<UcpRow> rows;
  double delta = 0.0;
  bool final_below_delta = false;
};

inline UcpReport ucp_experiment(const ScenarioTree& tree, std::span<const AdaptedProcess> zs, const Measure& q,
                                double delta, double tol = kSupermartingaleTolerance) {
  UcpReport out;
  out.delta = delta;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    const auto& z = zs[i];
    require_on_tree(tree, z);
    require(z[tree.root()] <= 1.0 + kProbabilityTolerance, ErrorCode::InitialValueTooLarge,
            "sequence element " + std::to_string(i + 1) + " starts above 1");
    for (NodeId n = 0; n < tree.size(); ++n) {
      require(z[n] >= 0.0, ErrorCode::InvalidArgument, "sequence element " + std::to_string(i + 1) + " is negative");
    }
    require(is_supermartingale(tree, z, q, tol).holds, ErrorCode::NotSupermartingale,
            "sequence element " + std::to_string(i + 1) + " is not a supermartingale");
    const auto centered = z - 1.0;
    out.rows.push_back({i + 1, p_metric(tree, centered.terminal(tree), q), up_metric(tree, centered, q)});
  }
  out.final_below_delta = !out.rows.empty() && out.rows.back().uniform <= delta;
  return out;
}

struct QvRow {
  std::size_t n = 0;
  /// P-functional of var([X^n, X^n] - [X, X])_T.
  double deviation_p = 0.0;
  /// Leafwise left- and right-hand sides of the variation estimate.
  std::vector<double> lhs;
  std::vector<double> rhs;
  bool bound_holds = true;
  /// max over leaves of lhs - rhs (negative when the bound is strict).
  double worst_margin = 0.0;
};

/// Relative slack allowed for round-off in the pathwise variation estimate.
inline constexpr double kQvRoundoff = 1e-12;

/// For X^n = X + E^n: var([X^n,X^n] - [X,X])_T against
/// [E,E]_T + 2 sqrt([X,X]_T) sqrt([E,E]_T), leaf by leaf.
inline std::vector<QvRow> qv_stability_experiment(const ScenarioTree& tree, const AdaptedProcess& x,
                                                  std::span<const AdaptedProcess> errors, const Measure& q) {
  const auto qx = quadratic_covariation(tree, x, x);
  std::vector<QvRow> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto& e = errors[i];
    const auto xn = x + e;
    const auto dev = total_variation(tree, quadratic_covariation(tree, xn, xn) - qx);
    const auto qe = quadratic_covariation(tree, e, e);
    QvRow row;
    row.n = i + 1;
    row.lhs = dev.terminal(tree);
    row.worst_margin = -std::numeric_limits<double>::infinity();
    for (NodeId leaf : tree.leaves()) {
      const double r = qe[leaf] + 2.0 * std::sqrt(qx[leaf]) * std::sqrt(qe[leaf]);
      row.rhs.push_back(r);
      const double margin = dev[leaf] - r;
      row.worst_margin = std::max(row.worst_margin, margin);
      if (margin > kQvRoundoff * (1.0 + r)) row.bound_holds = false;
    }
    row.deviation_p = p_metric(tree, row.lhs, q);
    out.push_back(std::move(row));
  }
  return out;
}

// Constructed families.

/// One-step tree with branch probabilities (1/2, 1/2).
inline ScenarioTree one_step_tree() { return make_uniform_tree(1, {0.5, 0.5}); }

/// Martingale on `one_step_tree()` with Z_0 = 1 and Z_1 in {1 + h, 1 - h},
/// where h is 1/n rounded down to the spacing of doubles near 1. Both
/// branches then sit exactly h away from 1.
inline AdaptedProcess ucp_one_step_martingale(const ScenarioTree& tree, std::size_t n) {
  require(tree.steps() == 1 && tree.children(tree.root()).size() == 2, ErrorCode::InvalidTree,
          "one-step binary tree expected");
  require(n >= 1, ErrorCode::InvalidArgument, "family index starts at 1");
  const double h = 1.0 / static_cast<double>(n);
  double up = 1.0 + h;
  if (up - 1.0 > h) up = std::nextafter(up, 1.0);
  AdaptedProcess z(tree.size(), 1.0);
  const auto kids = tree.children(tree.root());
  z[kids[0]] = up;
  z[kids[1]] = 2.0 - up;
  return z;
}

/// Random nonnegative supermartingale with Z_0 = 1 and |Z_T - 1| <= 1/n: a
/// martingale with terminal spread 1/(2n) minus a random predictable
/// nondecreasing drift bounded by 1/(2n).
template <class Rng>
AdaptedProcess ucp_random_supermartingale(const ScenarioTree& tree, const Measure& q, std::size_t n, Rng& rng) {
  const double half = 0.5 / static_cast<double>(n);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(0.0, 1.0);

  std::vector<double> u;
  for (std::size_t i = 0; i < tree.leaves().size(); ++i) u.push_back(unit(rng));
  const double mean = expectation(tree, q, u);
  double big = 0.0;
  for (double& v : u) big = std::max(big, std::abs(v -= mean));
  AdaptedProcess m(tree.size(), 0.0);
  const auto leaves = tree.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) m[leaves[i]] = 1.0 + (big > 0.0 ? half * u[i] / big : 0.0);
  for (int t = tree.steps() - 1; t >= 0; --t) {
    const auto ce = conditional_expectation(tree, q, m, t);
    const auto nodes = tree.level_nodes(t);
    for (std::size_t i = 0; i < nodes.size(); ++i) m[nodes[i]] = ce[i];
  }

  // Drift: each node draws a share of the remaining budget for its children.
  AdaptedProcess b(tree.size(), 0.0);
  for (NodeId node : tree.internal_nodes()) {
    const double step = (half - b[node]) * pos(rng);
    for (NodeId c : tree.children(node)) b[c] = b[node] + step;
  }
  return m - b;
}

/// Random nonnegative Q-supermartingale with Z_0 = z0 <= 1 whose paths
/// regularly climb above 2.
template <class Rng>
AdaptedProcess random_supermartingale(const ScenarioTree& tree, const Measure& q, double z0, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AdaptedProcess z(tree.size(), 0.0);
  z[tree.root()] = z0;
  for (NodeId node : tree.internal_nodes()) {
    const auto kids = tree.children(node);
    std::vector<double> raw;
    for (std::size_t c = 0; c < kids.size(); ++c) {
      // Heavy right tail so some children exceed 2; occasional zeros.
      const double r = unit(rng);
      raw.push_back(r < 0.1 ? 0.0 : std::pow(unit(rng), 3.0) * 6.0 + 0.05);
    }
    double mean = 0.0;
    for (std::size_t c = 0; c < kids.size(); ++c) mean += q.conditional(tree, kids[c]) * raw[c];
    const double drop = unit(rng) < 0.5 ? 0.0 : 0.3 * unit(rng);
    const double target = z[node] * (1.0 - drop);
    for (std::size_t c = 0; c < kids.size(); ++c) z[kids[c]] = mean > 0.0 ? raw[c] * target / mean : target;
  }
  return z;
}

}  // namespace emerylab
