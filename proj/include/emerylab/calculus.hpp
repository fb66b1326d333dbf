#pragma once

// Discrete stochastic calculus on a scenario tree. Left limits are parent
// values with X_{0-} = 0, so every increment at the root equals the root value.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "emerylab/tree.hpp"

namespace emerylab {

inline constexpr double kSupermartingaleTolerance = 1e-10;

/// X_- : parent value, 0 at the root.
inline AdaptedProcess left_limit(const ScenarioTree& tree, const AdaptedProcess& x) {
  require_on_tree(tree, x);
  AdaptedProcess out(tree.size());
  for (NodeId n = 1; n < tree.size(); ++n) out[n] = x[*tree.parent(n)];
  return out;
}

/// Delta X = X - X_-.
inline AdaptedProcess increments(const ScenarioTree& tree, const AdaptedProcess& x) {
  return x - left_limit(tree, x);
}

/// (eta . X)_0 = eta_0 X_0, then eta(n) (X(n) - X(parent)) added along each path.
inline AdaptedProcess stochastic_integral(const ScenarioTree& tree, const PredictableProcess& eta,
                                          const AdaptedProcess& x) {
  require_on_tree(tree, x);
  require(eta.size() == tree.size(), ErrorCode::SizeMismatch, "integrand size mismatch");
  AdaptedProcess out(tree.size());
  out[tree.root()] = eta[tree.root()] * x[tree.root()];
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.parent(n);
    out[n] = out[p] + eta[n] * (x[n] - x[p]);
  }
  return out;
}

/// Same recursion with an adapted (not necessarily predictable) left-limit
/// integrand, used for Y_- . X terms.
inline AdaptedProcess integrate_left_limit(const ScenarioTree& tree, const AdaptedProcess& y,
                                           const AdaptedProcess& x) {
  require_on_tree(tree, x);
  require_on_tree(tree, y);
  AdaptedProcess out(tree.size());
  // Y_{0-} = 0, so the time-0 term vanishes.
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.parent(n);
    out[n] = out[p] + y[p] * (x[n] - x[p]);
  }
  return out;
}

/// [X, Y]: X_0 Y_0 at the root, plus Delta X Delta Y along each path.
inline AdaptedProcess quadratic_covariation(const ScenarioTree& tree, const AdaptedProcess& x,
                                            const AdaptedProcess& y) {
  require_on_tree(tree, x);
  require_on_tree(tree, y);
  AdaptedProcess out(tree.size());
  out[tree.root()] = x[tree.root()] * y[tree.root()];
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.parent(n);
    out[n] = out[p] + (x[n] - x[p]) * (y[n] - y[p]);
  }
  return out;
}

/// First-variation process: |X_0| plus accumulated |Delta X|.
inline AdaptedProcess total_variation(const ScenarioTree& tree, const AdaptedProcess& x) {
  require_on_tree(tree, x);
  AdaptedProcess out(tree.size());
  out[tree.root()] = std::abs(x[tree.root()]);
  for (NodeId n = 1; n < tree.size(); ++n) {
    const NodeId p = *tree.parent(n);
    out[n] = out[p] + std::abs(x[n] - x[p]);
  }
  return out;
}

/// X* : pathwise running maximum of |X|.
inline AdaptedProcess running_sup(const ScenarioTree& tree, const AdaptedProcess& x) {
  require_on_tree(tree, x);
  AdaptedProcess out(tree.size());
  out[tree.root()] = std::abs(x[tree.root()]);
  for (NodeId n = 1; n < tree.size(); ++n) out[n] = std::max(out[*tree.parent(n)], std::abs(x[n]));
  return out;
}

struct SupermartingaleVerdict {
  bool holds = true;
  /// max over nodes of E_Q[Z_{t+1} | node] - Z(node); 0 when no node has children.
  double max_violation = 0.0;
  std::optional<NodeId> worst_node;
};

inline SupermartingaleVerdict is_supermartingale(const ScenarioTree& tree, const AdaptedProcess& z, const Measure& q,
                                                 double tol = kSupermartingaleTolerance) {
  require_on_tree(tree, z);
  SupermartingaleVerdict verdict;
  verdict.max_violation = -std::numeric_limits<double>::infinity();
  for (NodeId n : tree.internal_nodes()) {
    double next = 0.0;
    for (NodeId c : tree.children(n)) next += q.conditional(tree, c) * z[c];
    const double excess = next - z[n];
    if (excess > verdict.max_violation) {
      verdict.max_violation = excess;
      verdict.worst_node = n;
    }
  }
  verdict.max_violation = std::max(verdict.max_violation, 0.0);
  verdict.holds = verdict.max_violation <= tol;
  return verdict;
}

/// Z = Z_0 + (M - M_0) - B with B predictable, nondecreasing, B_0 = 0.
struct DoobMeyerParts {
  AdaptedProcess martingale;
  AdaptedProcess compensator;
};

/// Classical discrete compensator: the increment of B on the children of a
/// node is E_Q[-Delta Z | node]. Increments that are negative only by rounding
/// (within `tol`) are clipped to zero.
inline DoobMeyerParts doob_meyer(const ScenarioTree& tree, const AdaptedProcess& z, const Measure& q,
                                 double tol = kSupermartingaleTolerance) {
  require_on_tree(tree, z);
  DoobMeyerParts parts{AdaptedProcess(tree.size()), AdaptedProcess(tree.size())};
  auto& b = parts.compensator;
  for (NodeId n : tree.internal_nodes()) {
    double drop = 0.0;
    for (NodeId c : tree.children(n)) drop += q.conditional(tree, c) * (z[n] - z[c]);
    require(drop >= -tol, ErrorCode::NotSupermartingale,
            "conditional expectation at node '" + tree.label(n) + "' exceeds the current value by " +
                std::to_string(-drop));
    drop = std::max(drop, 0.0);
    for (NodeId c : tree.children(n)) b[c] = b[n] + drop;
  }
  parts.martingale = z + b;
  return parts;
}

}  // namespace emerylab
