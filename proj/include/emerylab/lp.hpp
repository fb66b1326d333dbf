#pragma once

// Small dense two-phase simplex. Problems here are tiny (a handful of
// children per node, at most a few hundred variables for the tree-wide
// programs), so a tableau with Bland's anti-cycling rule is adequate.

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "emerylab/error.hpp"

namespace emerylab::lp {

enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Status { Optimal, Infeasible, Unbounded };

struct Constraint {
  std::vector<double> coef;
  Relation rel = Relation::LessEqual;
  double rhs = 0.0;
};

/// maximize objective . x  subject to the constraints, x_j >= 0 unless free[j].
struct Problem {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<Constraint> constraints;
  std::vector<bool> free;

  explicit Problem(std::size_t n = 0) : num_vars(n), objective(n, 0.0), free(n, false) {}

  void add(std::vector<double> coef, Relation rel, double rhs) {
    require(coef.size() == num_vars, ErrorCode::SizeMismatch, "constraint width does not match problem");
    constraints.push_back({std::move(coef), rel, rhs});
  }
};

struct Solution {
  Status status = Status::Infeasible;
  std::vector<double> x;
  double objective = 0.0;
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  // Row `rows_` holds reduced costs of the current objective (to maximize).
  double& cost(std::size_t c) { return at(rows_, c); }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> a_;
};

// Runs simplex iterations on the tableau over columns [0, active_cols).
// Returns false when the objective is unbounded.
inline bool iterate(Tableau& t, std::vector<std::size_t>& basis, std::size_t active_cols, double eps) {
  constexpr double kPivotEps = 1e-9;
  constexpr double kFeasSlack = 1e-12;
  constexpr double kUnboundedCost = 1e-9;
  for (std::size_t guard = 0; guard < 100000; ++guard) {
    std::size_t enter = active_cols;
    for (std::size_t c = 0; c < active_cols; ++c) {
      if (t.cost(c) > eps) {
        enter = c;
        break;
      }
    }
    if (enter == active_cols) return true;
    // Two-pass ratio test: find the step length allowed with a small
    // feasibility slack, then take the largest pivot among rows within it.
    double limit = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      const bool artificial = basis[r] >= active_cols && std::abs(a) > kPivotEps;
      if (artificial) limit = 0.0;
      else if (a > kPivotEps) limit = std::min(limit, (std::max(t.rhs(r), 0.0) + kFeasSlack) / a);
    }
    std::size_t leave = t.rows();
    double best = 0.0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      // A leftover zero-valued artificial leaves on either sign, so it stays at zero.
      const bool artificial = basis[r] >= active_cols && std::abs(a) > kPivotEps;
      if (!artificial && (a <= kPivotEps || std::max(t.rhs(r), 0.0) / a > limit)) continue;
      const double size = std::abs(a) * (artificial ? 1e6 : 1.0);
      if (size > best) {
        best = size;
        leave = r;
      }
    }
    if (leave == t.rows()) {
      if (t.cost(enter) > kUnboundedCost) return false;
      // Reduced cost at round-off level with no pivot row: treat as zero.
      t.cost(enter) = 0.0;
      continue;
    }
    t.pivot(leave, enter);
    basis[leave] = enter;
  }
  throw Error(ErrorCode::InvalidArgument, "simplex iteration limit reached");
}

}  // namespace detail

/// Solves `problem`; `eps` is the optimality / feasibility tolerance.
inline Solution maximize(const Problem& problem, double eps = 1e-9) {
  const std::size_t n = problem.num_vars;
  require(problem.objective.size() == n && problem.free.size() == n, ErrorCode::SizeMismatch, "malformed LP");

  // Column layout: structural columns (free variables split into +/-), then
  // one slack/surplus per inequality, then artificials.
  std::vector<std::size_t> plus(n), minus(n, SIZE_MAX);
  std::size_t ncol = 0;
  for (std::size_t j = 0; j < n; ++j) {
    plus[j] = ncol++;
    if (problem.free[j]) minus[j] = ncol++;
  }
  const std::size_t structural = ncol;
  const std::size_t m = problem.constraints.size();

  struct Row {
    std::vector<double> coef;
    Relation rel;
    double rhs;
  };
  std::vector<Row> rows;
  rows.reserve(m);
  for (const auto& con : problem.constraints) {
    Row row{std::vector<double>(structural, 0.0), con.rel, con.rhs};
    for (std::size_t j = 0; j < n; ++j) {
      row.coef[plus[j]] = con.coef[j];
      if (minus[j] != SIZE_MAX) row.coef[minus[j]] = -con.coef[j];
    }
    if (row.rhs < 0.0) {
      for (double& v : row.coef) v = -v;
      row.rhs = -row.rhs;
      if (row.rel == Relation::LessEqual) row.rel = Relation::GreaterEqual;
      else if (row.rel == Relation::GreaterEqual) row.rel = Relation::LessEqual;
    }
    rows.push_back(std::move(row));
  }

  std::size_t num_slack = 0, num_art = 0;
  for (const auto& row : rows) {
    if (row.rel != Relation::Equal) ++num_slack;
    if (row.rel != Relation::LessEqual) ++num_art;
  }
  const std::size_t art_begin = structural + num_slack;
  const std::size_t total = art_begin + num_art;

  detail::Tableau t(m, total);
  std::vector<std::size_t> basis(m);
  std::size_t s = structural, a = art_begin;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < structural; ++c) t.at(r, c) = rows[r].coef[c];
    t.rhs(r) = rows[r].rhs;
    switch (rows[r].rel) {
      case Relation::LessEqual:
        t.at(r, s) = 1.0;
        basis[r] = s++;
        break;
      case Relation::GreaterEqual:
        t.at(r, s++) = -1.0;
        t.at(r, a) = 1.0;
        basis[r] = a++;
        break;
      case Relation::Equal:
        t.at(r, a) = 1.0;
        basis[r] = a++;
        break;
    }
  }

  Solution sol;
  if (num_art > 0) {
    // Phase one: maximize -sum(artificials).
    for (std::size_t c = 0; c <= total; ++c) t.cost(c) = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] >= art_begin) {
        for (std::size_t c = 0; c <= total; ++c) {
          if (c < art_begin || c == total) t.cost(c) += t.at(r, c);
        }
      }
    }
    detail::iterate(t, basis, total, eps);
    if (t.cost(total) > eps * (1.0 + static_cast<double>(m))) {
      sol.status = Status::Infeasible;
      return sol;
    }
    // Drive remaining (zero-valued) artificials out of the basis.
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] < art_begin) continue;
      for (std::size_t c = 0; c < art_begin; ++c) {
        if (std::abs(t.at(r, c)) > 1e-9) {
          t.pivot(r, c);
          basis[r] = c;
          break;
        }
      }
    }
  }

  // Phase two on the real objective, artificial columns frozen out.
  for (std::size_t c = 0; c <= total; ++c) t.cost(c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    t.cost(plus[j]) = problem.objective[j];
    if (minus[j] != SIZE_MAX) t.cost(minus[j]) = -problem.objective[j];
  }
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t b = basis[r];
    const double cb = t.cost(b);
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= total; ++c) t.cost(c) -= cb * t.at(r, c);
  }
  // Rows whose artificial could not be pivoted out are redundant; zero their
  // artificial cost so they never re-enter.
  for (std::size_t c = art_begin; c < total; ++c) t.cost(c) = 0.0;
  if (!detail::iterate(t, basis, art_begin, eps)) {
    sol.status = Status::Unbounded;
    return sol;
  }

  std::vector<double> col_value(total, 0.0);
  for (std::size_t r = 0; r < m; ++r) col_value[basis[r]] = t.rhs(r);
  sol.x.assign(n, 0.0);
  sol.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sol.x[j] = col_value[plus[j]] - (minus[j] != SIZE_MAX ? col_value[minus[j]] : 0.0);
    sol.objective += problem.objective[j] * sol.x[j];
  }
  sol.status = Status::Optimal;
  return sol;
}

inline Solution minimize(Problem problem, double eps = 1e-9) {
  for (double& c : problem.objective) c = -c;
  Solution sol = maximize(problem, eps);
  sol.objective = -sol.objective;
  return sol;
}

}  // namespace emerylab::lp
