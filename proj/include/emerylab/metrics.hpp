#pragma once

// Convergence functionals on a scenario tree:
//   p_metric      E[1 ^ |g|]                     (convergence in probability)
//   up_metric     E[1 ^ X*_N]                    (uniform convergence in probability)
//   emery_metric  sup_{|eta| <= 1} E[1 ^ (eta . X)*_N]   (semimartingale topology)
//
// The supremum in emery_metric is taken over predictable integrands whose
// free coordinates (one at the root, one per internal node) range over the
// grid {-1, -1 + delta, ..., 1}. Small problems are enumerated exactly by a
// recursion over subtrees; larger ones fall back to multi-start coordinate
// ascent and are reported as lower bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

#include "emerylab/calculus.hpp"
#include "emerylab/tree.hpp"

namespace emerylab {

/// E_Q[1 ^ |g|] for leaf values g.
inline double p_metric(const ScenarioTree& tree, std::span<const double> g, const Measure& q) {
  const auto leaves = tree.leaves();
  require(g.size() == leaves.size(), ErrorCode::SizeMismatch, "one value per leaf expected");
  double s = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) s += q.mass(leaves[i]) * std::min(1.0, std::abs(g[i]));
  // Leaf masses may sum to 1 plus a few ulps.
  return std::min(1.0, s);
}

/// p_metric of the pathwise running supremum of |X|.
inline double up_metric(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q) {
  return p_metric(tree, running_sup(tree, x).terminal(tree), q);
}

enum class Exactness { ExactByEnumeration, GridLowerBound };

constexpr std::string_view to_string(Exactness e) {
  return e == Exactness::ExactByEnumeration ? "exact-by-enumeration" : "grid-lower-bound";
}

struct EmeryOptions {
  double grid_step = 0.25;
  /// Largest number of free integrand coordinates searched exhaustively.
  std::size_t exhaustive_limit = 12;
  /// Number of starting points for coordinate ascent.
  std::size_t restarts = 16;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Cap on subtree evaluations in exhaustive mode; beyond it the search
  /// degrades to coordinate ascent even when d <= exhaustive_limit.
  double max_exhaustive_work = 2e8;
};

struct EmeryResult {
  double value = 0.0;
  PredictableProcess witness;
  Exactness exactness = Exactness::ExactByEnumeration;
  double grid_step = 0.25;
  std::size_t coordinates = 0;
};

/// E_Q[1 ^ (eta . X)*_N], the objective of the Emery supremum.
inline double emery_objective(const ScenarioTree& tree, const AdaptedProcess& x, const PredictableProcess& eta,
                              const Measure& q) {
  return up_metric(tree, stochastic_integral(tree, eta, x), q);
}

/// Grid {-1, -1 + step, ...} capped at 1, with 1 appended when the step does
/// not land on it. Returned in descending order, which is the tie-break order.
inline std::vector<double> integrand_grid(double step) {
  require(step > 0.0 && step <= 2.0 && std::isfinite(step), ErrorCode::GridStepInvalid,
          "grid step must lie in (0, 2]");
  std::vector<double> grid;
  for (std::size_t k = 0;; ++k) {
    const double v = -1.0 + static_cast<double>(k) * step;
    if (v > 1.0 + 1e-12) break;
    grid.push_back(std::min(v, 1.0));
  }
  if (std::abs(grid.back() - 1.0) > 1e-12) grid.push_back(1.0);
  grid.back() = 1.0;
  std::reverse(grid.begin(), grid.end());
  return grid;
}

namespace detail {

class EmerySearch {
 public:
  EmerySearch(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q, std::vector<double> grid)
      : tree_(tree), x_(x), grid_(std::move(grid)), cond_(tree.size()), dx_(tree.size()) {
    for (NodeId n = 1; n < tree.size(); ++n) {
      cond_[n] = q.conditional(tree, n);
      dx_[n] = x[n] - x[*tree.parent(n)];
    }
    // Expected increment per internal node, used to break ties.
    drift_.assign(tree.size(), 0.0);
    for (NodeId n : tree.internal_nodes()) {
      for (NodeId c : tree.children(n)) drift_[n] += cond_[c] * dx_[c];
    }
  }

  /// Sum over subtree evaluations an exhaustive search would perform.
  double work_estimate() const {
    double work = 0.0;
    const double g = static_cast<double>(grid_.size());
    for (NodeId n = 0; n < tree_.size(); ++n) work += std::pow(g, tree_.level(n) + 1);
    return work;
  }

  /// Best value of E[1 ^ running max | node] over integrands on the subtree,
  /// given integral value `integral` and running max `run_max` at `n`.
  double subtree(NodeId n, double integral, double run_max) const {
    if (run_max >= 1.0) return 1.0;
    if (tree_.is_leaf(n)) return run_max;
    double best = -1.0;
    for (double eta : grid_) {
      const double v = step_value(n, eta, integral, run_max);
      if (v > best) best = v;
      if (best >= 1.0) break;
    }
    return best;
  }

  double step_value(NodeId n, double eta, double integral, double run_max) const {
    double v = 0.0;
    for (NodeId c : tree_.children(n)) {
      const double next = integral + eta * dx_[c];
      v += cond_[c] * subtree(c, next, std::max(run_max, std::abs(next)));
    }
    return v;
  }

  /// Value of choosing `eta0` at the root.
  double root_value(double eta0) const {
    const double i0 = eta0 * x_[tree_.root()];
    return subtree(tree_.root(), i0, std::abs(i0));
  }

  /// Writes the argmax integrand on the subtree of `n` into `values`.
  void reconstruct(NodeId n, double integral, double run_max, std::vector<double>& values) const {
    if (tree_.is_leaf(n)) return;
    const double eta = choose(n, integral, run_max);
    for (NodeId c : tree_.children(n)) {
      values[c] = eta;
      const double next = integral + eta * dx_[c];
      reconstruct(c, next, std::max(run_max, std::abs(next)), values);
    }
  }

  /// Tie-break: strictly larger value wins; among equal values prefer the
  /// larger expected increment, then the larger integrand.
  static bool better(double v, double incr, double best_v, double best_incr) {
    const double slack = 1e-14;
    if (v > best_v + slack) return true;
    if (v < best_v - slack) return false;
    return incr > best_incr + 1e-15;
  }

  double choose(NodeId n, double integral, double run_max) const {
    double best_eta = grid_.front(), best_v = -1.0, best_incr = -std::numeric_limits<double>::infinity();
    for (double eta : grid_) {
      const double v = step_value(n, eta, integral, run_max);
      const double incr = eta * drift_[n];
      if (better(v, incr, best_v, best_incr)) {
        best_eta = eta;
        best_v = v;
        best_incr = incr;
      }
    }
    return best_eta;
  }

  const std::vector<double>& grid() const { return grid_; }

 private:
  const ScenarioTree& tree_;
  const AdaptedProcess& x_;
  std::vector<double> grid_;
  std::vector<double> cond_;
  std::vector<double> dx_;
  std::vector<double> drift_;
};

inline PredictableProcess exhaustive_emery(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q,
                                           const std::vector<double>& grid, unsigned threads) {
  EmerySearch search(tree, x, q, grid);
  std::vector<double> root_values(grid.size());
  if (threads > 1) {
    std::vector<std::future<double>> jobs;
    for (double eta0 : grid) jobs.push_back(std::async(std::launch::async, [&, eta0] { return search.root_value(eta0); }));
    for (std::size_t k = 0; k < grid.size(); ++k) root_values[k] = jobs[k].get();
  } else {
    for (std::size_t k = 0; k < grid.size(); ++k) root_values[k] = search.root_value(grid[k]);
  }

  const double x0 = x[tree.root()];
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (EmerySearch::better(root_values[k], grid[k] * x0, root_values[best], grid[best] * x0)) best = k;
  }
  std::vector<double> values(tree.size(), 0.0);
  values[tree.root()] = grid[best];
  const double i0 = grid[best] * x0;
  search.reconstruct(tree.root(), i0, std::abs(i0), values);
  return PredictableProcess(tree, std::move(values));
}

inline PredictableProcess ascent_emery(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q,
                                       const std::vector<double>& grid, const EmeryOptions& opts) {
  const std::size_t d = PredictableProcess::num_coordinates(tree);
  auto score = [&](const std::vector<double>& coords) {
    return emery_objective(tree, x, PredictableProcess::from_coordinates(tree, coords), q);
  };

  std::mt19937_64 rng(opts.seed);
  std::vector<std::vector<double>> starts{std::vector<double>(d, 1.0), std::vector<double>(d, -1.0)};
  std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t r = 2; r < std::max<std::size_t>(opts.restarts, 2); ++r) {
    std::vector<double> s(d);
    for (double& v : s) v = (r % 2 == 0) ? (coin(rng) ? 1.0 : -1.0) : grid[pick(rng)];
    starts.push_back(std::move(s));
  }

  auto climb = [&](std::vector<double> coords) {
    double value = score(coords);
    for (int sweep = 0; sweep < 200; ++sweep) {
      bool improved = false;
      for (std::size_t k = 0; k < d; ++k) {
        const double keep = coords[k];
        double best_v = value, best_eta = keep;
        for (double eta : grid) {
          if (eta == keep) continue;
          coords[k] = eta;
          const double v = score(coords);
          if (v > best_v + 1e-15) {
            best_v = v;
            best_eta = eta;
          }
        }
        coords[k] = best_eta;
        if (best_eta != keep) {
          value = best_v;
          improved = true;
        }
      }
      if (!improved) break;
    }
    return std::pair{value, coords};
  };

  std::vector<std::pair<double, std::vector<double>>> results(starts.size());
  if (opts.threads > 1) {
    std::vector<std::future<std::pair<double, std::vector<double>>>> jobs;
    for (const auto& s : starts) jobs.push_back(std::async(std::launch::async, climb, s));
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < starts.size(); ++i) results[i] = climb(starts[i]);
  }

  // Order-insensitive reduction: max value, then lexicographically largest coordinates.
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    const auto& [v, c] = results[i];
    const auto& [bv, bc] = results[best];
    if (v > bv + 1e-15 || (std::abs(v - bv) <= 1e-15 && c > bc)) best = i;
  }
  return PredictableProcess::from_coordinates(tree, results[best].second);
}

}  // namespace detail

/// Grid-resolution value of sup over |eta| <= 1 of E_Q[1 ^ (eta . X)*_N].
inline EmeryResult emery_metric(const ScenarioTree& tree, const AdaptedProcess& x, const Measure& q,
                                const EmeryOptions& opts = {}) {
  require_on_tree(tree, x);
  const auto grid = integrand_grid(opts.grid_step);
  EmeryResult result;
  result.grid_step = opts.grid_step;
  result.coordinates = PredictableProcess::num_coordinates(tree);

  const bool small = result.coordinates <= opts.exhaustive_limit &&
                     detail::EmerySearch(tree, x, q, grid).work_estimate() <= opts.max_exhaustive_work;
  if (small) {
    result.witness = detail::exhaustive_emery(tree, x, q, grid, opts.threads);
    result.exactness = Exactness::ExactByEnumeration;
  } else {
    result.witness = detail::ascent_emery(tree, x, q, grid, opts);
    result.exactness = Exactness::GridLowerBound;
  }
  result.value = emery_objective(tree, x, result.witness, q);

  // eta == 1 is always on the grid; make the reported value dominate it
  // bit-for-bit rather than up to summation order.
  const double unit = up_metric(tree, x, q);
  if (unit > result.value) {
    result.witness = PredictableProcess::constant(tree, 1.0);
    result.value = unit;
  }
  return result;
}

inline EmeryResult emery_distance(const ScenarioTree& tree, const AdaptedProcess& x, const AdaptedProcess& y,
                                  const Measure& q, const EmeryOptions& opts = {}) {
  return emery_metric(tree, x - y, q, opts);
}

struct FatouVerdict {
  bool holds = true;
  /// Largest |inf or sup over the tail window - X| over all nodes.
  double max_deviation = 0.0;
  NodeId worst_node = 0;
  std::size_t window_begin = 0;  // 1-based sequence index
  std::size_t window_end = 0;
};

/// Tail-window surrogate for Fatou convergence: with n_max = sequence length,
/// both the infimum and the supremum of X^n over n in [n_max/2, n_max] must be
/// within `tol` of X at every node.
inline FatouVerdict fatou_check(const ScenarioTree& tree, std::span<const AdaptedProcess> sequence,
                                const AdaptedProcess& x, double tol) {
  require_on_tree(tree, x);
  const std::size_t n_max = sequence.size();
  require(n_max >= 2, ErrorCode::WindowTooShort, "need at least two sequence elements");
  FatouVerdict verdict;
  verdict.window_begin = n_max / 2;
  verdict.window_end = n_max;
  for (NodeId n = 0; n < tree.size(); ++n) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = verdict.window_begin; k <= n_max; ++k) {
      require_on_tree(tree, sequence[k - 1], "sequence element");
      lo = std::min(lo, sequence[k - 1][n]);
      hi = std::max(hi, sequence[k - 1][n]);
    }
    const double dev = std::max(std::abs(lo - x[n]), std::abs(hi - x[n]));
    if (dev > verdict.max_deviation) {
      verdict.max_deviation = dev;
      verdict.worst_node = n;
    }
  }
  verdict.holds = verdict.max_deviation <= tol;
  return verdict;
}

}  // namespace emerylab
