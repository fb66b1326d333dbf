// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "emerylab/emerylab.hpp"
#include "support/oracles.hpp"
#include "support/random_markets.hpp"

using namespace emerylab;
namespace emt = emerylab::testing;
using emerylab::testing::Rng;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

ScenarioTree binomial() { return make_uniform_tree(1, {0.5, 0.5}); }

WealthSet kelly() {
  const auto t = binomial();
  return WealthSet::hull(t, {AdaptedProcess::constant(t, 1.0), AdaptedProcess({1.0, 2.0, 0.5})}, {"riskless", "stock"});
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Random hull market: depth <= 4, branching <= 3, at most 3 generators.
WealthSet sweep_market(Rng& rng, int trial) {
  const auto t = emt::random_tree(rng, 1 + trial % 4, 3);
  return emt::random_hull_market(rng, t, 1 + trial % 2);
}

Outcome kelly_numeraire() {
  const auto w = kelly();
  const auto& t = w.tree();
  const auto r = numeraire(w, Measure::physical(t));
  const NodeId root = t.root();
  const auto& ext = w.growth(root).extremes;
  double stock = -1.0;
  for (std::size_t i = 0; i < ext.size(); ++i)
    if (ext[i][0] == 2.0 && ext[i][1] == 0.5) stock = r.weights[root][i];
  double residual = 0.0;
  for (double v : r.residuals[root]) residual = std::max(residual, std::abs(v));
  const auto& g = r.growth[root];
  const bool ok = std::abs(stock - 0.5) <= 1e-8 && std::abs(g[0] - 1.5) <= 1e-8 && std::abs(g[1] - 0.75) <= 1e-8 &&
                  residual <= 1e-8;
  return {ok, "weight " + num(stock) + ", growth (" + num(g[0]) + ", " + num(g[1]) + "), max residual " + num(residual)};
}

Outcome numeraire_sweep() {
  Rng rng(1001);
  std::size_t checks = 0, failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto w = sweep_market(rng, trial);
    const auto& t = w.tree();
    const std::vector<Measure> measures{Measure::physical(t), emt::random_measure(rng, t)};
    for (const auto& q : measures) {
      const auto xhat = numeraire(w, q).process;
      for (int k = 0; k < 10; ++k) {
        const auto x = sample_process(w, rng);
        ++checks;
        failures += !is_supermartingale(t, x / xhat, q, 1e-7).holds;
      }
    }
  }
  return {failures == 0, std::to_string(failures) + " of " + std::to_string(checks) + " ratios fail"};
}

struct DualityOutcomes {
  Outcome gap;
  Outcome log_consistency;
};

DualityOutcomes duality_sweep() {
  Rng rng(1003);
  const std::vector<UtilitySpec> utils{UtilitySpec::log(), UtilitySpec::power(0.5), UtilitySpec::power(-1.0)};
  const std::vector<double> y_grid{0.1, 1.0, 10.0};
  UtilityOptions opts;
  opts.gap_tolerance = std::numeric_limits<double>::infinity();
  double worst_gap = 0.0, worst_log = 0.0;
  bool gap_ok = true, fin_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const auto w = sweep_market(rng, trial);
    const auto& t = w.tree();
    const auto xhat = numeraire(w, Measure::physical(t)).process;
    for (const auto& util : utils) {
      for (const auto& e : fin_dual_check(w, util, y_grid)) fin_ok = fin_ok && e.finite;
      for (double x : {0.5, 1.0, 2.0}) {
        const auto r = solve_utility(w, util, x, opts);
        const double gap = std::abs(r.u - (r.v + x * r.y_hat));
        const double rel = gap / (1.0 + std::abs(r.u));
        worst_gap = std::max(worst_gap, rel);
        gap_ok = gap_ok && gap <= 1e-6 * (1.0 + std::abs(r.u));
        if (util.kind() == UtilitySpec::Kind::Log) {
          const auto leaves = t.leaves();
          for (std::size_t i = 0; i < leaves.size(); ++i)
            worst_log = std::max(worst_log, std::abs(r.primal_terminal[i] - x * xhat[leaves[i]]));
        }
      }
    }
  }
  return {{gap_ok && fin_ok, "worst gap/(1+|u|) " + num(worst_gap) + (fin_ok ? ", dual finite on grid" : ", dual NOT finite")},
          {worst_log <= 1e-6, "worst leaf deviation " + num(worst_log)}};
}

Outcome power_oracle() {
  const auto w = kelly();
  const auto util = UtilitySpec::power(0.5);
  // Fraction a of wealth in the stock, a in [0, 1] on a 1e-4 grid.
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10000; ++i) {
    const double a = i * 1e-4;
    best = std::max(best, 0.5 * util.u(1.0 + a) + 0.5 * util.u(1.0 - 0.5 * a));
  }
  const double u = solve_utility(w, util, 1.0).u;
  return {std::abs(u - best) <= 1e-4, "solver " + num(u) + " vs grid " + num(best)};
}

Outcome emery_soundness() {
  Rng rng(1006);
  const double delta = 0.25;
  EmeryOptions opts;
  opts.grid_step = delta;
  auto small_tree = [&]() {
    for (;;) {
      auto t = emt::random_tree(rng, 1 + static_cast<int>(rng() % 3), 3);
      if (PredictableProcess::num_coordinates(t) <= 12) return t;
    }
  };
  std::size_t below_up = 0, witness_bad = 0, triangle_bad = 0;
  double worst_witness = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = small_tree();
    const auto q = emt::random_measure(rng, t);
    const auto x = emt::random_process(rng, t, -1.5, 1.5);
    const auto r = emery_metric(t, x, q, opts);
    below_up += !(r.value >= up_metric(t, x, q));
    const double err = std::abs(emery_objective(t, x, r.witness, q) - r.value);
    worst_witness = std::max(worst_witness, err);
    witness_bad += err > 1e-12;
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = small_tree();
    const auto q = emt::random_measure(rng, t);
    const auto x = emt::random_process(rng, t), y = emt::random_process(rng, t), z = emt::random_process(rng, t);
    const double xz = emery_distance(t, x, z, q, opts).value;
    const double xy = emery_distance(t, x, y, q, opts).value;
    const double yz = emery_distance(t, y, z, q, opts).value;
    triangle_bad += xz > xy + yz + 2.0 * delta;
  }
  return {below_up == 0 && witness_bad == 0 && triangle_bad == 0,
          std::to_string(below_up) + " below uniform, witness error " + num(worst_witness) + ", " +
              std::to_string(triangle_bad) + " triangle violations"};
}

Outcome decomposition() {
  Rng rng(1007);
  std::uniform_real_distribution<double> z0(0.0, 1.0);
  std::size_t recon_bad = 0, jump_bad = 0, b_bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 5, 3);
    const auto q = emt::random_measure(rng, t);
    const auto z = random_supermartingale(t, q, trial % 10 == 0 ? 1.0 : z0(rng), rng);
    const auto d = decompose(t, z, q);
    double err = 0.0;
    for (NodeId n = 0; n < t.size(); ++n) err = std::max(err, std::abs(z[n] - (1.0 + d.a[n] - d.b[n] + d.l[n])));
    worst = std::max(worst, err);
    recon_bad += err > 1e-12;
    for (NodeId n = 1; n < t.size(); ++n) {
      const NodeId p = *t.parent(n);
      jump_bad += std::abs(d.l[n] - d.l[p]) > 4.0;
      b_bad += d.b[n] < d.b[p] || d.b[n] != d.b[t.children(p).front()];
    }
  }
  return {recon_bad == 0 && jump_bad == 0 && b_bad == 0,
          "worst reconstruction " + num(worst) + ", " + std::to_string(jump_bad) + " jumps above 4, " +
              std::to_string(b_bad) + " compensator violations"};
}

Outcome ucp_family() {
  const auto t = one_step_tree();
  const auto p = Measure::physical(t);
  std::vector<AdaptedProcess> zs;
  for (std::size_t n = 1; n <= 10000; ++n) zs.push_back(ucp_one_step_martingale(t, n));
  const auto rep = ucp_experiment(t, zs, p, 1e-4);
  std::size_t bad = 0;
  for (const auto& row : rep.rows) bad += !(row.uniform <= 1.0 / static_cast<double>(row.n));

  Rng rng(1008);
  const std::size_t n = 1000;
  const double h = 1.0 / static_cast<double>(n);
  double worst = 0.0;
  std::size_t terminal_bad = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto tree = emt::random_tree(rng, 3, 3);
    const auto q = emt::random_measure(rng, tree);
    const std::vector<AdaptedProcess> one{ucp_random_supermartingale(tree, q, n, rng)};
    const auto row = ucp_experiment(tree, one, q, 0.05).rows.front();
    terminal_bad += !(row.terminal_p <= h);
    worst = std::max(worst, row.uniform);
  }
  return {bad == 0 && terminal_bad == 0 && worst <= 0.05,
          std::to_string(bad) + " one-step rows above 1/n, depth-3 worst " + num(worst) + " at n = 1000"};
}

Outcome qv_stability() {
  Rng rng(1009);
  std::size_t violations = 0, checks = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (int pair = 0; pair < 20; ++pair) {
    const auto t = emt::random_tree(rng, 1 + pair % 4, 3);
    const auto x = emt::random_process(rng, t, -2.0, 2.0);
    const auto w = emt::random_process(rng, t, -2.0, 2.0);
    std::vector<AdaptedProcess> errors;
    for (int n = 1; n <= 100; ++n) errors.push_back(w * (1.0 / n));
    for (const auto& row : qv_stability_experiment(t, x, errors, Measure::physical(t))) {
      for (std::size_t i = 0; i < row.lhs.size(); ++i) {
        ++checks;
        violations += !(row.lhs[i] <= row.rhs[i]);
        tightest = std::min(tightest, row.rhs[i] - row.lhs[i]);
      }
    }
  }
  return {violations == 0,
          std::to_string(violations) + " of " + std::to_string(checks) + " leaf checks fail, smallest margin " + num(tightest)};
}

Outcome bipolarity() {
  Rng rng(1010);
  std::size_t disagreements = 0, members = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = emt::random_small_tree(rng, 3, 3, 8);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 3);
    std::uniform_real_distribution<double> u(0.0, 1.6);
    for (int k = 0; k < 200; ++k) {
      std::vector<double> g(t.leaves().size());
      for (double& v : g) v = u(rng);
      const bool a = bipolar_membership(w, g, 1e-8).member;
      disagreements += a != emt::free_disposal_member(w, g, 1e-8);
      members += a;
      ++total;
    }
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements, " + std::to_string(members) + " of " +
                                  std::to_string(total) + " claims inside"};
}

Outcome na1_certificates() {
  Rng rng(1011);
  std::size_t missed = 0, bad_certificate = 0, false_alarm = 0, numeraire_failed = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 3, 3);
    const auto [w, node] = emt::random_planted_arbitrage(rng, t, 1 + trial % 2);
    const auto v = na1_check(w);
    missed += v.holds;
    if (!v.holds) bad_certificate += !recheck_na1_certificate(w, v);
  }
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 3, 3);
    const auto w = emt::random_arbitrage_free_conic(rng, t, 1 + trial % 2);
    false_alarm += !na1_check(w).holds;
    try {
      numeraire(w, Measure::physical(t));
    } catch (const Error&) {
      ++numeraire_failed;
    }
  }
  return {missed == 0 && bad_certificate == 0 && false_alarm == 0 && numeraire_failed == 0,
          std::to_string(missed) + " missed, " + std::to_string(bad_certificate) + " bad certificates, " +
              std::to_string(false_alarm) + " false alarms, " + std::to_string(numeraire_failed) +
              " numeraire failures"};
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  bool all = true;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%-4s %2d %-32s %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "kelly numeraire", kelly_numeraire);
  report(2, "numeraire supermartingale sweep", numeraire_sweep);
  DualityOutcomes duality;
  bool duality_threw = false;
  std::string duality_error;
  try {
    duality = duality_sweep();
  } catch (const std::exception& e) {
    duality_threw = true;
    duality_error = std::string("threw: ") + e.what();
  }
  report(3, "duality gap", [&] { return duality_threw ? Outcome{false, duality_error} : duality.gap; });
  report(4, "log consistency", [&] { return duality_threw ? Outcome{false, duality_error} : duality.log_consistency; });
  report(5, "power utility oracle", power_oracle);
  report(6, "emery functional soundness", emery_soundness);
  report(7, "supermartingale decomposition", decomposition);
  report(8, "ucp family", ucp_family);
  report(9, "quadratic variation stability", qv_stability);
  report(10, "bipolarity", bipolarity);
  report(11, "arbitrage certificates", na1_certificates);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s in %.1f s\n", all ? "all criteria pass" : "some criteria fail", secs);
  return all ? 0 : 1;
}
