#pragma once

// Numeraire portfolio, process-polar sets and expected-utility duality on a
// bounded wealth set.
//
// The numeraire under Q maximizes E_Q[log g] over each node's growth set; the
// product of the optimal growths is the wealth X^ for which X / X^ is a
// Q-supermartingale for every X in the set.
//
// The polar set consists of nonnegative Y with Y_0 <= 1 and E[Y_{t+1} g | n]
// <= Y_n for every extreme growth g at every node n. Utility maximization is
// solved on the dual side: minimize E[V(y Y_T)] over the polar set with a
// log-barrier Newton method, pick y by the first-order condition, and map back
// through X_T = I(y Y_T). The primal candidate is projected onto the wealth set
// so that the reported u(x) is attained by a certified member.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emerylab/lp.hpp"
#include "emerylab/metrics.hpp"
#include "emerylab/tree.hpp"
#include "emerylab/wealthset.hpp"

namespace emerylab {

inline constexpr double kUtilityFloor = 1e-300;

class UtilitySpec {
 public:
  enum class Kind { Log, Power };

  static UtilitySpec log() { return UtilitySpec(Kind::Log, 0.0); }
  static UtilitySpec power(double gamma) {
    require(gamma < 1.0 && gamma != 0.0 && std::isfinite(gamma), ErrorCode::InvalidArgument,
            "power utility needs gamma < 1, gamma != 0");
    return UtilitySpec(Kind::Power, gamma);
  }

  Kind kind() const noexcept { return kind_; }
  double gamma() const noexcept { return gamma_; }

  std::string describe() const {
    return kind_ == Kind::Log ? "log" : "power(gamma=" + std::to_string(gamma_) + ")";
  }

  /// U(x); wealth below kUtilityFloor is evaluated at the floor.
  double u(double x) const {
    x = std::max(x, kUtilityFloor);
    return kind_ == Kind::Log ? std::log(x) : std::pow(x, gamma_) / gamma_;
  }

  /// (U')^{-1}(y)
  double inverse_marginal(double y) const {
    return kind_ == Kind::Log ? 1.0 / y : std::pow(y, 1.0 / (gamma_ - 1.0));
  }

  /// V(y) = sup_x U(x) - xy
  double conjugate(double y) const {
    if (kind_ == Kind::Log) return -std::log(y) - 1.0;
    const double beta = gamma_ / (gamma_ - 1.0);
    return (1.0 - gamma_) / gamma_ * std::pow(y, beta);
  }

  double conjugate_d1(double y) const { return -inverse_marginal(y); }

  double conjugate_d2(double y) const {
    if (kind_ == Kind::Log) return 1.0 / (y * y);
    return std::pow(y, (2.0 - gamma_) / (gamma_ - 1.0)) / (1.0 - gamma_);
  }

 private:
  UtilitySpec(Kind k, double g) : kind_(k), gamma_(g) {}
  Kind kind_;
  double gamma_;
};

struct NumeraireResult {
  AdaptedProcess process;
  /// Per internal node: weights over `growth(n).extremes`.
  std::vector<std::vector<double>> weights;
  /// Per internal node: optimal growth vector, one entry per child.
  std::vector<GrowthVector> growth;
  /// Per internal node: E_Q[g / g^ | n] - 1 for each candidate growth g.
  std::vector<std::vector<double>> residuals;
  /// Same quantity for each extreme growth.
  std::vector<std::vector<double>> extreme_residuals;
  /// max over nodes and growths of E_Q[g / g^ | n] - 1 (clamped at 0).
  double max_violation = 0.0;
  /// max over nodes of |E_Q[g / g^ | n] - 1| for growths carrying weight.
  double max_support_residual = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

/// Euclidean projection onto the probability simplex.
inline std::vector<double> project_simplex(std::vector<double> v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (double& x : v) x = std::max(0.0, x - theta);
  return v;
}

/// maximize sum_c q_c log(sum_i w_i e_i(c)) over the simplex.
class LogOptimizer {
 public:
  LogOptimizer(const std::vector<GrowthVector>& ext, std::vector<double> q) : ext_(ext), q_(std::move(q)) {}

  GrowthVector growth(const std::vector<double>& w) const {
    GrowthVector g(q_.size(), 0.0);
    for (std::size_t i = 0; i < ext_.size(); ++i) {
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += w[i] * ext_[i][c];
    }
    return g;
  }

  double value(const std::vector<double>& w) const {
    const auto g = growth(w);
    double f = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!(g[c] > 0.0)) return -std::numeric_limits<double>::infinity();
      f += q_[c] * std::log(g[c]);
    }
    return f;
  }

  std::vector<double> gradient(const std::vector<double>& w) const {
    const auto g = growth(w);
    std::vector<double> d(ext_.size(), 0.0);
    for (std::size_t i = 0; i < ext_.size(); ++i) {
      for (std::size_t c = 0; c < g.size(); ++c) d[i] += q_[c] * ext_[i][c] / g[c];
    }
    return d;
  }

  /// Violation of the optimality conditions grad_i <= 1 with equality where w_i > 0.
  double residual(const std::vector<double>& w) const {
    const auto d = gradient(w);
    double r = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) r = std::max({r, d[i] - 1.0, w[i] * (1.0 - d[i])});
    return r;
  }

  std::pair<std::vector<double>, std::size_t> solve(double tol, std::size_t max_iter) const {
    const std::size_t k = ext_.size();
    std::vector<double> w(k, 1.0 / static_cast<double>(k));
    if (k == 1) return {w, 0};
    double f = value(w), step = 1.0;
    std::size_t it = 0;
    for (; it < max_iter && residual(w) > tol; ++it) {
      const auto d = gradient(w);
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> trial(k);
        for (std::size_t i = 0; i < k; ++i) trial[i] = w[i] + step * d[i];
        trial = project_simplex(std::move(trial));
        double dir = 0.0;
        for (std::size_t i = 0; i < k; ++i) dir += d[i] * (trial[i] - w[i]);
        const double ft = value(trial);
        if (std::isfinite(ft) && ft >= f + 1e-4 * dir) {
          moved = ft > f || dir > 0.0;
          w = std::move(trial);
          f = ft;
          step *= 2.0;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    polish(w);
    return {w, it};
  }

 private:
  // Active-set Newton steps on the simplex: the support grows by the most
  // violated growth and shrinks when a step drives a weight to zero.
  void polish(std::vector<double>& w) const {
    const std::size_t m = q_.size();
    for (int it = 0; it < 200; ++it) {
      const double r0 = residual(w);
      if (r0 <= 1e-15) return;
      const auto g = growth(w);
      const auto d = gradient(w);
      std::vector<std::size_t> s;
      std::size_t enter = w.size();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) s.push_back(i);
        else if (d[i] > 1.0 + 1e-15 && (enter == w.size() || d[i] > d[enter])) enter = i;
      }
      if (enter < w.size()) s.push_back(enter);
      const auto n = static_cast<Eigen::Index>(s.size());
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
          double h = 0.0;
          for (std::size_t c = 0; c < m; ++c) h -= q_[c] * ext_[s[a]][c] * ext_[s[b]][c] / (g[c] * g[c]);
          kkt(a, b) = h;
        }
        kkt(a, n) = kkt(n, a) = 1.0;
        rhs(a) = -d[s[a]];
      }
      const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
      double t = 1.0;
      std::size_t blocking = w.size();
      for (Eigen::Index a = 0; a < n; ++a) {
        if (sol(a) < 0.0 && -w[s[a]] / sol(a) < t) {
          t = -w[s[a]] / sol(a);
          blocking = s[a];
        }
      }
      const double f0 = value(w);
      bool accepted = false;
      for (int bt = 0; bt < 60 && !accepted; ++bt, t *= 0.5, blocking = w.size()) {
        auto trial = w;
        for (Eigen::Index a = 0; a < n; ++a) trial[s[a]] = std::max(0.0, w[s[a]] + t * sol(a));
        if (blocking < w.size()) trial[blocking] = 0.0;
        const double sum = std::accumulate(trial.begin(), trial.end(), 0.0);
        for (double& v : trial) v /= sum;
        const double ft = value(trial);
        // Near the optimum the value is flat to round-off; the residual decides.
        if (ft > f0 || (ft >= f0 - 1e-12 * (1.0 + std::abs(f0)) && residual(trial) < r0)) {
          w = std::move(trial);
          accepted = true;
        }
      }
      if (!accepted) return;
    }
  }

  const std::vector<GrowthVector>& ext_;
  std::vector<double> q_;
};

inline std::vector<double> conditionals(const ScenarioTree& tree, const Measure& q, NodeId n) {
  std::vector<double> out;
  for (NodeId c : tree.children(n)) out.push_back(q.conditional(tree, c));
  return out;
}

}  // namespace detail

struct NumeraireOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

/// Log-optimal (numeraire) wealth process under Q, normalized to X^_0 = 1.
inline NumeraireResult numeraire(const WealthSet& w, const Measure& q, const NumeraireOptions& opts = {}) {
  const auto& tree = w.tree();
  require(q.size() == tree.size(), ErrorCode::SizeMismatch, "measure lives on another tree");
  require(w.bounded(), ErrorCode::Na1Fails, "the wealth set admits arbitrage of the first kind; no numeraire exists");
  NumeraireResult res;
  res.process = AdaptedProcess(tree.size(), 0.0);
  res.process[tree.root()] = 1.0;
  res.weights.resize(tree.size());
  res.growth.resize(tree.size());
  res.residuals.resize(tree.size());
  res.extreme_residuals.resize(tree.size());

  for (NodeId n : tree.internal_nodes()) {
    const auto& ng = w.growth(n);
    const auto kids = tree.children(n);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      const bool any = std::any_of(ng.extremes.begin(), ng.extremes.end(), [&](const GrowthVector& e) { return e[c] > 0.0; });
      require(any, ErrorCode::DegenerateNode,
              "every growth vanishes on child '" + tree.label(kids[c]) + "' of node '" + tree.label(n) + "'");
    }
    const auto qc = detail::conditionals(tree, q, n);
    detail::LogOptimizer opt(ng.extremes, qc);
    auto [weights, iters] = opt.solve(opts.tolerance, opts.max_iterations);
    res.iterations += iters;
    const auto g = opt.growth(weights);
    for (std::size_t c = 0; c < kids.size(); ++c) res.process[kids[c]] = res.process[n] * g[c];

    auto excess = [&](const GrowthVector& e) {
      double s = 0.0;
      for (std::size_t c = 0; c < kids.size(); ++c) s += qc[c] * e[c] / g[c];
      return s - 1.0;
    };
    for (const auto& e : ng.candidates) {
      res.residuals[n].push_back(excess(e));
      res.max_violation = std::max(res.max_violation, res.residuals[n].back());
    }
    for (std::size_t i = 0; i < ng.extremes.size(); ++i) {
      const double r = excess(ng.extremes[i]);
      res.extreme_residuals[n].push_back(r);
      res.max_violation = std::max(res.max_violation, r);
      if (weights[i] > 1e-9) res.max_support_residual = std::max(res.max_support_residual, std::abs(r));
    }
    res.weights[n] = std::move(weights);
    res.growth[n] = g;
  }
  return res;
}

struct PolarVerdict {
  bool holds = true;
  /// max(Y_0 - 1, max over nodes and extremes of E[Y' g | n] - Y_n), clamped at 0.
  double max_violation = 0.0;
  std::optional<NodeId> worst_node;
};

/// Growth vectors whose supermartingale constraints define the polar set.
enum class DualBasis { Extremes, AllGenerators };

namespace detail {

inline std::vector<GrowthVector> constraint_growths(const NodeGrowth& ng, DualBasis basis) {
  if (basis == DualBasis::Extremes) return ng.extremes;
  std::vector<GrowthVector> out = ng.candidates;
  out.insert(out.end(), ng.extremes.begin(), ng.extremes.end());
  return out;
}

}  // namespace detail

/// Whether Y (nonnegative, physical measure) lies in the process-polar set.
inline PolarVerdict polar_check(const WealthSet& w, const AdaptedProcess& y, double tol = 1e-10) {
  const auto& tree = w.tree();
  require_on_tree(tree, y);
  require(w.bounded(), ErrorCode::Na1Fails, "polar constraints need bounded growth sets");
  PolarVerdict v;
  auto note = [&](NodeId n, double excess) {
    if (excess > v.max_violation) {
      v.max_violation = excess;
      v.worst_node = n;
    }
  };
  note(tree.root(), y[tree.root()] - 1.0);
  for (NodeId n = 0; n < tree.size(); ++n) note(n, -y[n]);
  for (NodeId n : tree.internal_nodes()) {
    const auto kids = tree.children(n);
    for (const auto& e : w.growth(n).extremes) {
      double s = 0.0;
      for (std::size_t c = 0; c < kids.size(); ++c) s += tree.branch_probability(kids[c]) * y[kids[c]] * e[c];
      note(n, s - y[n]);
    }
  }
  v.holds = v.max_violation <= tol;
  return v;
}

struct BipolarResult {
  bool member = true;
  /// max over the polar set of E[Y_T g].
  double value = 0.0;
  /// A maximizing polar element.
  AdaptedProcess deflator;
};

/// Membership of a nonnegative claim (leaf values) in the bipolar of the
/// terminal wealth set, by maximizing E[Y_T g] over polar Y.
inline BipolarResult bipolar_membership(const WealthSet& w, std::span<const double> g, double tol = 1e-8) {
  const auto& tree = w.tree();
  const auto leaves = tree.leaves();
  require(g.size() == leaves.size(), ErrorCode::SizeMismatch, "one claim value per leaf expected");
  for (double v : g) require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidArgument, "claims must be nonnegative");
  require(w.bounded(), ErrorCode::Na1Fails, "polar constraints need bounded growth sets");

  const std::size_t n = tree.size();
  lp::Problem prob(n);
  for (std::size_t i = 0; i < leaves.size(); ++i) prob.objective[leaves[i]] = node_probability(tree, leaves[i]) * g[i];
  std::vector<double> root(n, 0.0);
  root[tree.root()] = 1.0;
  prob.add(root, lp::Relation::LessEqual, 1.0);
  for (NodeId node : tree.internal_nodes()) {
    const auto kids = tree.children(node);
    for (const auto& e : w.growth(node).extremes) {
      std::vector<double> row(n, 0.0);
      row[node] = -1.0;
      for (std::size_t c = 0; c < kids.size(); ++c) row[kids[c]] = tree.branch_probability(kids[c]) * e[c];
      prob.add(std::move(row), lp::Relation::LessEqual, 0.0);
    }
  }
  const auto sol = lp::maximize(prob, 1e-13);
  require(sol.status == lp::Status::Optimal, ErrorCode::DualInfeasible, "polar program is unbounded");
  BipolarResult out;
  out.value = sol.objective;
  out.deflator = AdaptedProcess(sol.x);
  out.member = out.value <= 1.0 + tol;
  return out;
}

struct DualityResult {
  double x = 0.0;
  double u = 0.0;
  double y_hat = 0.0;
  double v = 0.0;
  double gap = 0.0;
  /// Optimal wealth in X(x) (certified member), and its leaf values.
  AdaptedProcess primal;
  std::vector<double> primal_terminal;
  /// I(y^ Y^_T) leafwise, before projection onto the wealth set.
  std::vector<double> marginal_terminal;
  /// Dual optimizer (polar element, Y_0 ~ 1) and its leaf values.
  AdaptedProcess dual;
  std::vector<double> dual_terminal;
  /// Growth-space distance between the unprojected candidate and the set.
  double projection_residual = 0.0;
  bool floor_active = false;
  std::size_t newton_steps = 0;
};

struct UtilityOptions {
  DualBasis basis = DualBasis::Extremes;
  double mu_start = 1.0;
  double mu_factor = 0.2;
  /// Barrier terms times mu below this value ends the path following.
  double barrier_gap = 1e-13;
  double gap_tolerance = 1e-6;
};

namespace detail {

struct BarrierRow {
  // c(Y) = offset + sum coef[k] * Y[index[k]] >= 0
  std::vector<std::size_t> index;
  std::vector<double> coef;
  double offset = 0.0;
};

/// minimize E[V(Y_T)] over the polar set via log-barrier Newton.
inline std::pair<AdaptedProcess, std::size_t> solve_dual_barrier(const WealthSet& w, const UtilitySpec& util,
                                                                 const UtilityOptions& opts) {
  const auto& tree = w.tree();
  const std::size_t n = tree.size();
  const auto leaves = tree.leaves();

  std::vector<BarrierRow> rows;
  rows.push_back({{tree.root()}, {-1.0}, 1.0});
  double max_mass = 0.0;
  for (NodeId node : tree.internal_nodes()) {
    const auto kids = tree.children(node);
    for (const auto& e : constraint_growths(w.growth(node), opts.basis)) {
      BarrierRow r{{node}, {1.0}, 0.0};
      double mass = 0.0;
      for (std::size_t c = 0; c < kids.size(); ++c) {
        const double a = tree.branch_probability(kids[c]) * e[c];
        mass += a;
        if (a == 0.0) continue;
        r.index.push_back(kids[c]);
        r.coef.push_back(-a);
      }
      max_mass = std::max(max_mass, mass);
      rows.push_back(std::move(r));
    }
  }
  for (NodeId leaf : leaves) rows.push_back({{leaf}, {1.0}, 0.0});

  std::vector<double> leaf_p;
  for (NodeId leaf : leaves) leaf_p.push_back(node_probability(tree, leaf));

  // Strictly feasible start: Y_n = 0.5 rho^t with rho * (largest constraint mass) = 0.5.
  const double rho = 0.5 / std::max(max_mass, 1e-300);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (NodeId node = 0; node < n; ++node) y(static_cast<Eigen::Index>(node)) = 0.5 * std::pow(rho, tree.level(node));

  auto slack = [&](const BarrierRow& r, const Eigen::VectorXd& v) {
    double s = r.offset;
    for (std::size_t k = 0; k < r.index.size(); ++k) s += r.coef[k] * v(static_cast<Eigen::Index>(r.index[k]));
    return s;
  };
  auto phi = [&](const Eigen::VectorXd& v, double mu) {
    double f = 0.0;
    for (std::size_t i = 0; i < leaves.size(); ++i) f += leaf_p[i] * util.conjugate(v(static_cast<Eigen::Index>(leaves[i])));
    for (const auto& r : rows) {
      const double s = slack(r, v);
      if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
      f -= mu * std::log(s);
    }
    return f;
  };

  std::size_t steps = 0;
  const double m = static_cast<double>(rows.size());
  for (double mu = opts.mu_start;; mu *= opts.mu_factor) {
    for (int it = 0; it < 200; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto l = static_cast<Eigen::Index>(leaves[i]);
        grad(l) += leaf_p[i] * util.conjugate_d1(y(l));
        hess(l, l) += leaf_p[i] * util.conjugate_d2(y(l));
      }
      for (const auto& r : rows) {
        const double s = slack(r, y);
        for (std::size_t a = 0; a < r.index.size(); ++a) {
          const auto ia = static_cast<Eigen::Index>(r.index[a]);
          grad(ia) -= mu * r.coef[a] / s;
          for (std::size_t b = 0; b < r.index.size(); ++b) {
            hess(ia, static_cast<Eigen::Index>(r.index[b])) += mu * r.coef[a] * r.coef[b] / (s * s);
          }
        }
      }
      const Eigen::VectorXd dir = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(dir);
      if (!(decrement > 1e-20)) break;
      ++steps;

      double t = 1.0;
      const double f0 = phi(y, mu);
      Eigen::VectorXd trial = y + t * dir;
      double ft = phi(trial, mu);
      for (int bt = 0; bt < 80 && !(ft <= f0 - 0.25 * t * decrement); ++bt) {
        t *= 0.5;
        trial = y + t * dir;
        ft = phi(trial, mu);
      }
      if (!(ft <= f0)) break;
      y = trial;
      if (decrement < 1e-18) break;
    }
    if (m * mu <= opts.barrier_gap) break;
  }
  return {AdaptedProcess(std::vector<double>(y.data(), y.data() + y.size())), steps};
}

/// X_n = E[Y_T X_T | n] / Y_n under the physical measure.
inline AdaptedProcess deflated_conditional(const ScenarioTree& tree, const AdaptedProcess& y,
                                           const std::vector<double>& terminal) {
  AdaptedProcess yx(tree.size(), 0.0);
  const auto leaves = tree.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) yx[leaves[i]] = y[leaves[i]] * terminal[i];
  for (int t = tree.steps() - 1; t >= 0; --t) {
    for (NodeId n : tree.level_nodes(t)) {
      double s = 0.0;
      for (NodeId c : tree.children(n)) s += tree.branch_probability(c) * yx[c];
      yx[n] = s;
    }
  }
  AdaptedProcess x(tree.size());
  for (NodeId n = 0; n < tree.size(); ++n) x[n] = yx[n] / y[n];
  return x;
}

/// Rebuilds a member of the set from per-node growth targets by taking the
/// closest point of each node's growth set.
inline AdaptedProcess project_onto(const WealthSet& w, const AdaptedProcess& x, double& residual) {
  const auto& tree = w.tree();
  AdaptedProcess out(tree.size(), 0.0);
  out[tree.root()] = 1.0;
  residual = 0.0;
  for (NodeId n : tree.internal_nodes()) {
    const auto kids = tree.children(n);
    GrowthVector g;
    for (NodeId c : kids) g.push_back(x[c] / x[n]);
    const auto& ext = w.growth(n).extremes;
    auto [r, weights] = hull_residual(ext, g);
    residual = std::max(residual, r);
    for (std::size_t c = 0; c < kids.size(); ++c) {
      double gc = 0.0;
      for (std::size_t i = 0; i < ext.size(); ++i) gc += weights[i] * ext[i][c];
      out[kids[c]] = out[n] * gc;
    }
  }
  return out;
}

}  // namespace detail

/// Dual optimizer at y = 1. For log and power utilities V(yY) is an affine
/// (log) or positively scaled (power) transform of V(Y), so the minimizer over
/// the polar set does not depend on y.
inline std::pair<AdaptedProcess, std::size_t> dual_optimizer(const WealthSet& w, const UtilitySpec& util,
                                                             const UtilityOptions& opts = {}) {
  require(w.bounded(), ErrorCode::DualInfeasible,
          "no strictly positive polar element: the set admits arbitrage of the first kind");
  return detail::solve_dual_barrier(w, util, opts);
}

/// v(y) = E[V(y Y^_T)] for a dual optimizer Y^.
inline double dual_value(const ScenarioTree& tree, const UtilitySpec& util, const AdaptedProcess& y_hat, double y) {
  double v = 0.0;
  for (NodeId leaf : tree.leaves()) v += node_probability(tree, leaf) * util.conjugate(y * y_hat[leaf]);
  return v;
}

/// maximize E[U(X_T)] over X in X(x), with duality certificate (physical measure).
inline DualityResult solve_utility(const WealthSet& w, const UtilitySpec& util, double x,
                                   const UtilityOptions& opts = {}) {
  require(x > 0.0 && std::isfinite(x), ErrorCode::InvalidArgument, "initial capital must be positive");
  const auto& tree = w.tree();
  const auto leaves = tree.leaves();
  auto [y_hat, steps] = dual_optimizer(w, util, opts);

  DualityResult res;
  res.x = x;
  res.newton_steps = steps;
  res.dual = y_hat;
  res.dual_terminal = y_hat.terminal(tree);

  // First-order condition in y: E[Y^ I(y Y^)] = x, decreasing in y.
  auto spend = [&](double y) {
    double s = 0.0;
    for (NodeId leaf : leaves) s += node_probability(tree, leaf) * y_hat[leaf] * util.inverse_marginal(y * y_hat[leaf]);
    return s;
  };
  double lo = std::log(1e-6), hi = std::log(1e6);
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (spend(std::exp(mid)) > x ? lo : hi) = mid;
  }
  res.y_hat = std::exp(0.5 * (lo + hi));
  res.v = dual_value(tree, util, y_hat, res.y_hat);

  for (NodeId leaf : leaves) {
    const double xt = util.inverse_marginal(res.y_hat * y_hat[leaf]);
    res.floor_active = res.floor_active || xt < kUtilityFloor;
    res.marginal_terminal.push_back(xt);
  }
  const auto candidate = detail::deflated_conditional(tree, y_hat, res.marginal_terminal);
  const auto member = detail::project_onto(w, candidate * (1.0 / candidate[tree.root()]), res.projection_residual);
  res.primal = member * x;
  res.primal_terminal = res.primal.terminal(tree);
  res.u = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) res.u += node_probability(tree, leaves[i]) * util.u(res.primal_terminal[i]);
  res.gap = std::abs(res.u - (res.v + x * res.y_hat));
  require(res.gap <= opts.gap_tolerance * (1.0 + std::abs(res.u)), ErrorCode::GapTooLarge,
          "duality gap " + std::to_string(res.gap) + " for " + util.describe() + " at x = " + std::to_string(x));
  return res;
}

struct FinDualEntry {
  double y = 0.0;
  double v = 0.0;
  bool finite = false;
};

/// Evaluates v(y) = sup_x (u(x) - xy) through the conjugate on each grid point.
inline std::vector<FinDualEntry> fin_dual_check(const WealthSet& w, const UtilitySpec& util,
                                                std::span<const double> y_grid, const UtilityOptions& opts = {}) {
  const auto y_hat = dual_optimizer(w, util, opts).first;
  std::vector<FinDualEntry> out;
  for (double y : y_grid) {
    require(y > 0.0, ErrorCode::InvalidArgument, "dual grid points must be positive");
    const double v = dual_value(w.tree(), util, y_hat, y);
    out.push_back({y, v, std::isfinite(v)});
  }
  return out;
}

struct ApproximationStep {
  std::size_t n = 0;
  AdaptedProcess process;
  bool member = false;
  double distance = 0.0;
  Exactness exactness = Exactness::ExactByEnumeration;
  double utility = 0.0;
};

/// X^n = (1/n) x chi + (1 - 1/n) X^(x) for n = 1..n_max, with chi the set's
/// strictly positive generator.
inline std::vector<ApproximationStep> approximating_sequence(const WealthSet& w, const UtilitySpec& util, double x,
                                                             std::size_t n_max, const EmeryOptions& emery = {},
                                                             const UtilityOptions& opts = {}) {
  const auto& tree = w.tree();
  const auto best = solve_utility(w, util, x, opts);
  const auto chi = w.positive_generator() * x;
  const auto q = Measure::physical(tree);
  std::vector<ApproximationStep> out;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double inv = 1.0 / static_cast<double>(n);
    ApproximationStep s;
    s.n = n;
    s.process = inv * chi + (1.0 - inv) * best.primal;
    s.member = contains(w, s.process * (1.0 / x), 1e-9).member;
    const auto d = emery_distance(tree, s.process, best.primal, q, emery);
    s.distance = d.value;
    s.exactness = d.exactness;
    for (NodeId leaf : tree.leaves()) s.utility += node_probability(tree, leaf) * util.u(s.process[leaf]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace emerylab
