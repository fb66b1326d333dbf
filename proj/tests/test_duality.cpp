#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "emerylab/duality.hpp"
#include "support/expect_error.hpp"
#include "support/oracles.hpp"
#include "support/random_markets.hpp"

using namespace emerylab;
namespace emt = emerylab::testing;
using emerylab::testing::Rng;

namespace {

ScenarioTree binomial() { return make_uniform_tree(1, {0.5, 0.5}); }

WealthSet kelly() {
  const auto t = binomial();
  return WealthSet::hull(t, {AdaptedProcess::constant(t, 1.0), AdaptedProcess({1.0, 2.0, 0.5})}, {"riskless", "stock"});
}

WealthSet arbitrage_market() {
  const auto t = binomial();
  std::vector<std::vector<std::vector<double>>> r(t.size());
  r[t.root()] = {{1.1, 1.2}};
  return WealthSet::conic(t, r);
}

double expected_log(const ScenarioTree& t, const AdaptedProcess& x) {
  double s = 0.0;
  for (NodeId leaf : t.leaves()) s += node_probability(t, leaf) * std::log(x[leaf]);
  return s;
}

std::vector<UtilitySpec> utilities() { return {UtilitySpec::log(), UtilitySpec::power(0.5), UtilitySpec::power(-1.0)}; }

}  // namespace

TEST(Utility, ClosedForms) {
  const auto log = UtilitySpec::log();
  const auto pw = UtilitySpec::power(0.5);
  for (double y : {0.1, 0.7, 1.0, 3.0}) {
    // V(y) = U(I(y)) - y I(y), and V' = -I.
    for (const auto& u : {log, pw}) {
      const double x = u.inverse_marginal(y);
      EXPECT_NEAR(u.conjugate(y), u.u(x) - x * y, 1e-12);
      const double h = 1e-6;
      EXPECT_NEAR((u.conjugate(y + h) - u.conjugate(y - h)) / (2 * h), u.conjugate_d1(y), 1e-6);
      EXPECT_NEAR((u.conjugate_d1(y + h) - u.conjugate_d1(y - h)) / (2 * h), u.conjugate_d2(y), 1e-5);
    }
  }
  EXPECT_ERROR_CODE(UtilitySpec::power(1.0), ErrorCode::InvalidArgument);
  EXPECT_ERROR_CODE(UtilitySpec::power(0.0), ErrorCode::InvalidArgument);
  EXPECT_EQ(UtilitySpec::power(-1.0).u(0.0), -1.0 / kUtilityFloor);
}

TEST(Numeraire, KellyBinomial) {
  const auto w = kelly();
  const auto& t = w.tree();
  const auto r = numeraire(w, Measure::physical(t));
  ASSERT_EQ(r.weights[t.root()].size(), 2u);
  EXPECT_NEAR(r.weights[t.root()][1], 0.5, 1e-8);
  EXPECT_NEAR(r.process[1], 1.5, 1e-8);
  EXPECT_NEAR(r.process[2], 0.75, 1e-8);
  for (double res : r.residuals[t.root()]) EXPECT_LE(std::abs(res), 1e-8);
  EXPECT_TRUE(contains(w, r.process).member);
}

TEST(Numeraire, ChangedMeasureMatchesLineSearch) {
  const auto w = kelly();
  const auto& t = w.tree();
  for (double qu : {0.8, 0.35, 0.6}) {
    const std::vector<double> wts{qu, 1.0 - qu};
    const Measure q(t, wts);
    const auto r = numeraire(w, q);
    const double oracle =
        emt::golden_max([&](double a) { return qu * std::log(1.0 + a) + (1.0 - qu) * std::log(1.0 - 0.5 * a); }, 0.0, 1.0);
    EXPECT_NEAR(r.weights[t.root()][1], oracle, 1e-6) << qu;
    EXPECT_LE(r.max_violation, 1e-8);
  }
}

TEST(Numeraire, SingleGeneratorAndFailures) {
  const auto t = make_uniform_tree(2, {0.4, 0.6});
  AdaptedProcess g(t.size(), 1.0);
  for (NodeId n = 1; n < t.size(); ++n) g[n] = g[*t.parent(n)] * (n % 2 ? 1.3 : 0.9);
  const auto r = numeraire(WealthSet::hull(t, {g}), Measure::physical(t));
  for (NodeId n = 0; n < t.size(); ++n) EXPECT_NEAR(r.process[n], g[n], 1e-14);

  const auto arb = arbitrage_market();
  EXPECT_ERROR_CODE(numeraire(arb, Measure::physical(arb.tree())), ErrorCode::Na1Fails);
  EXPECT_ERROR_CODE(numeraire(kelly(), Measure::physical(t)), ErrorCode::SizeMismatch);
}

TEST(Numeraire, SupermartingaleProperty) {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 4, 3);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 3);
    for (const auto& q : {Measure::physical(t), emt::random_measure(rng, t)}) {
      const auto r = numeraire(w, q);
      EXPECT_TRUE(contains(w, r.process).member);
      EXPECT_LE(r.max_violation, 1e-8);
      for (int k = 0; k < 50; ++k) {
        const auto x = sample_process(w, rng);
        const auto v = is_supermartingale(t, x / r.process, q, 1e-7);
        ASSERT_TRUE(v.holds) << v.max_violation;
      }
      for (const auto& g : w.generators()) EXPECT_TRUE(is_supermartingale(t, g / r.process, q, 1e-7).holds);
    }
  }
}

TEST(PolarCheck, Examples) {
  const auto w = kelly();
  const auto& t = w.tree();
  EXPECT_TRUE(polar_check(w, AdaptedProcess(t.size(), 0.0)).holds);
  const auto xhat = numeraire(w, Measure::physical(t)).process;
  const auto y = AdaptedProcess::constant(t, 1.0) / xhat;
  const auto v = polar_check(w, y, 1e-8);
  EXPECT_TRUE(v.holds);
  EXPECT_LE(v.max_violation, 1e-8);
  const auto over = polar_check(w, 1.1 * y);
  EXPECT_FALSE(over.holds);
  EXPECT_EQ(over.worst_node, t.root());
  EXPECT_ERROR_CODE(polar_check(arbitrage_market(), AdaptedProcess(3, 0.0)), ErrorCode::Na1Fails);
}

TEST(BipolarMembership, Examples) {
  const auto w = kelly();
  const auto& t = w.tree();
  for (const auto& g : w.generators()) EXPECT_TRUE(bipolar_membership(w, g.terminal(t)).member);
  const std::vector<double> zero(2, 0.0);
  EXPECT_TRUE(bipolar_membership(w, zero).member);
  const auto xhat = numeraire(w, Measure::physical(t)).process;
  auto lifted = xhat.terminal(t);
  for (double& v : lifted) v *= 1.01;
  const auto r = bipolar_membership(w, lifted);
  EXPECT_FALSE(r.member);
  EXPECT_GE(r.value, 1.01 - 1e-9);
  const std::vector<double> negative{1.0, -0.1};
  EXPECT_ERROR_CODE(bipolar_membership(w, negative), ErrorCode::InvalidArgument);
}

TEST(BipolarMembership, AgreesWithFreeDisposalLp) {
  Rng rng(62);
  std::size_t disagreements = 0, members = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const auto t = emt::random_small_tree(rng, 3, 3, 8);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 3);
    std::uniform_real_distribution<double> u(0.0, 1.6);
    for (int k = 0; k < 50; ++k) {
      std::vector<double> g(t.leaves().size());
      for (double& v : g) v = u(rng);
      const bool a = bipolar_membership(w, g).member;
      const bool b = emt::free_disposal_member(w, g, 1e-8);
      disagreements += a != b;
      members += a;
    }
  }
  EXPECT_EQ(disagreements, 0u);
  EXPECT_GT(members, 0u);
}

TEST(SolveUtility, LogMatchesNumeraire) {
  const auto w = kelly();
  const auto& t = w.tree();
  const auto xhat = numeraire(w, Measure::physical(t)).process;
  for (double x : {0.5, 1.0, 2.0}) {
    const auto r = solve_utility(w, UtilitySpec::log(), x);
    EXPECT_NEAR(r.u, std::log(x) + expected_log(t, xhat), 1e-8);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r.primal_terminal[i], x * xhat[t.leaves()[i]], 1e-6);
    EXPECT_LE(r.gap, 1e-6 * (1 + std::abs(r.u)));
  }
}

TEST(SolveUtility, SingleGenerator) {
  const auto t = make_uniform_tree(2, {0.3, 0.7});
  AdaptedProcess g(t.size(), 1.0);
  for (NodeId n = 1; n < t.size(); ++n) g[n] = g[*t.parent(n)] * (n % 2 ? 1.4 : 0.8);
  const auto w = WealthSet::hull(t, {g});
  for (const auto& util : utilities()) {
    const double x = 1.5;
    double expected = 0.0;
    for (NodeId leaf : t.leaves()) expected += node_probability(t, leaf) * util.u(x * g[leaf]);
    const auto r = solve_utility(w, util, x);
    EXPECT_NEAR(r.u, expected, 1e-8 * (1 + std::abs(expected))) << util.describe();
  }
}

TEST(SolveUtility, KellyPowerAgainstGridSearch) {
  const auto w = kelly();
  const auto util = UtilitySpec::power(0.5);
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 10000; ++i) {
    const double a = i * 1e-4;
    best = std::max(best, 0.5 * util.u(1.0 + a) + 0.5 * util.u(1.0 - 0.5 * a));
  }
  const auto r = solve_utility(w, util, 1.0);
  EXPECT_NEAR(r.u, best, 1e-4);
  EXPECT_NEAR(r.u, 0.5 * util.u(2.0) + 0.5 * util.u(0.5), 1e-8);  // optimum sits at the corner
}

TEST(SolveUtility, MatchesBackwardInduction) {
  Rng rng(63);
  for (int trial = 0; trial < 12; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 3, 3);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 2);
    for (const auto& util : utilities()) {
      const double x = 0.5 + trial % 3 * 0.75;
      const auto r = solve_utility(w, util, x);
      const double oracle = emt::utility_by_induction(w, util, x);
      EXPECT_NEAR(r.u, oracle, 1e-6 * (1 + std::abs(oracle))) << util.describe();
      EXPECT_TRUE(contains(w, r.primal * (1.0 / x), 1e-9).member);
      EXPECT_FALSE(r.floor_active);
    }
  }
}

TEST(SolveUtility, DualCertificates) {
  Rng rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 3, 3);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 3);
    for (const auto& util : utilities()) {
      const auto r = solve_utility(w, util, 1.0);
      EXPECT_TRUE(polar_check(w, r.dual, 1e-9).holds);
      // X^_T = I(y^ Y^_T) and E[Y^_T X^_T] = x, both up to the barrier accuracy.
      double budget = 0.0;
      for (std::size_t i = 0; i < t.leaves().size(); ++i) {
        const NodeId leaf = t.leaves()[i];
        EXPECT_NEAR(r.primal_terminal[i], util.inverse_marginal(r.y_hat * r.dual[leaf]), 1e-6);
        budget += node_probability(t, leaf) * r.dual[leaf] * r.primal_terminal[i];
      }
      EXPECT_NEAR(budget * r.y_hat, 1.0 * r.y_hat, 1e-6);
    }
  }
}

TEST(SolveUtility, MeasureChangeMakesWealthRatiosSupermartingales) {
  Rng rng(65);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 4, 3);
    const auto w = emt::random_hull_market(rng, t, 1 + trial % 3);
    for (const auto& util : utilities()) {
      const auto r = solve_utility(w, util, 1.0);
      std::vector<double> dens;
      for (std::size_t i = 0; i < t.leaves().size(); ++i) dens.push_back(r.dual_terminal[i] * r.primal_terminal[i] *
                                                                       node_probability(t, t.leaves()[i]));
      const auto q = Measure::normalized(t, dens);
      for (int k = 0; k < 20; ++k) {
        const auto x = sample_process(w, rng);
        const auto v = is_supermartingale(t, x / r.primal, q, 1e-7);
        ASSERT_TRUE(v.holds) << util.describe() << " violation " << v.max_violation;
      }
    }
  }
}

TEST(SolveUtility, GeneratorBasisEqualsExtremeBasis) {
  Rng rng(66);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = emt::random_tree(rng, 1 + trial % 3, 3);
    const auto base = emt::random_hull_market(rng, t, 2);
    // Add a redundant generator so the two parameterizations differ.
    auto gens = base.generators();
    gens.push_back(0.5 * gens[0] + 0.5 * gens[1]);
    const auto w = WealthSet::hull(t, gens);
    UtilityOptions all;
    all.basis = DualBasis::AllGenerators;
    for (const auto& util : utilities()) {
      const double a = solve_utility(w, util, 1.0).u;
      const double b = solve_utility(w, util, 1.0, all).u;
      EXPECT_NEAR(a, b, 1e-6) << util.describe();
    }
  }
}

TEST(SolveUtility, ConcaveNondecreasingInCapital) {
  Rng rng(67);
  const std::vector<double> xs{0.25, 0.5, 1.0, 2.0, 4.0};
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = emt::random_tree(rng, 2, 3);
    const auto w = emt::random_hull_market(rng, t, 2);
    for (const auto& util : utilities()) {
      std::vector<double> u;
      for (double x : xs) u.push_back(solve_utility(w, util, x).u);
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) EXPECT_LE(u[i], u[i + 1] + 1e-8);
      for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        const double left = (u[i] - u[i - 1]) / (xs[i] - xs[i - 1]);
        const double right = (u[i + 1] - u[i]) / (xs[i + 1] - xs[i]);
        EXPECT_LE(right, left + 1e-8) << util.describe();
      }
    }
  }
}

TEST(SolveUtility, Failures) {
  EXPECT_ERROR_CODE(solve_utility(arbitrage_market(), UtilitySpec::log(), 1.0), ErrorCode::DualInfeasible);
  EXPECT_ERROR_CODE(solve_utility(kelly(), UtilitySpec::log(), 0.0), ErrorCode::InvalidArgument);
  UtilityOptions strict;
  strict.gap_tolerance = -1.0;
  EXPECT_ERROR_CODE(solve_utility(kelly(), UtilitySpec::log(), 1.0, strict), ErrorCode::GapTooLarge);
}

TEST(FinDual, Examples) {
  const auto w = kelly();
  const auto& t = w.tree();
  const std::vector<double> grid{0.1, 1.0, 10.0};
  const double elog = expected_log(t, numeraire(w, Measure::physical(t)).process);
  for (const auto& e : fin_dual_check(w, UtilitySpec::log(), grid)) {
    EXPECT_TRUE(e.finite);
    EXPECT_NEAR(e.v, -std::log(e.y) - 1.0 + elog, 1e-8);
  }
  for (const auto& util : utilities()) {
    const auto report = fin_dual_check(w, util, grid);
    for (std::size_t i = 0; i < report.size(); ++i) {
      EXPECT_TRUE(report[i].finite);
      if (i > 0) {
        EXPECT_LE(report[i].v, report[i - 1].v);
      }
    }
  }
}

TEST(ApproximatingSequence, KellyBinomial) {
  const auto w = kelly();
  for (const auto& util : utilities()) {
    const double x = 1.0;
    const auto seq = approximating_sequence(w, util, x, 20);
    ASSERT_EQ(seq.size(), 20u);
    EXPECT_EQ(seq[0].process, w.positive_generator() * x);
    EXPECT_NEAR(seq[0].utility, util.u(x), 1e-15);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      EXPECT_TRUE(seq[i].member) << i;
      if (i >= 2) {
        EXPECT_LE(seq[i].distance, seq[i - 1].distance) << i;
      }
      if (i >= 1) {
        EXPECT_GE(seq[i].utility, seq[i - 1].utility - 1e-10) << i;
      }
    }
  }
}
