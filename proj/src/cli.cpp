#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "emerylab/cli.hpp"
#include "emerylab/calculus.hpp"
#include "emerylab/convergence.hpp"
#include "emerylab/duality.hpp"
#include "emerylab/market_io.hpp"
#include "emerylab/metrics.hpp"
#include "emerylab/wealthset.hpp"

namespace emerylab::cli {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return 3;
    case ErrorCode::GapTooLarge:
    case ErrorCode::Na1Fails:
    case ErrorCode::DualInfeasible:
    case ErrorCode::DegenerateNode: return 2;
    default: return 1;
  }
}

unsigned worker_count() {
  unsigned n = 0;
  if (const char* env = std::getenv("EMERYLAB_THREADS")) {
    try {
      n = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "EMERYLAB_THREADS must be a nonnegative integer");
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

namespace {

std::string fmt(double v, int precision = 12) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

/// Collects CSV rows (experiment, n, metric_name, value, exact_flag).
class CsvSink {
 public:
  void add(const std::string& experiment, std::size_t n, const std::string& metric, double value,
           const std::string& flag) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    rows_ << experiment << ',' << n << ',' << metric << ',' << buf << ',' << flag << '\n';
  }

  void write(const std::string& path) const {
    if (path.empty()) return;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorCode::Io, "cannot write '" + path + "'");
    f << "experiment,n,metric_name,value,exact_flag\n" << rows_.str();
    require(f.good(), ErrorCode::Io, "failed writing '" + path + "'");
  }

 private:
  std::ostringstream rows_;
};

/// One report line: "<computation>: <name> = <value> [<flag>]".
class Report {
 public:
  explicit Report(std::ostream& out) : out_(out) {}

  void line(const std::string& computation, const std::string& name, double value, const std::string& flag) {
    out_ << computation << ": " << name << " = " << fmt(value) << " [" << flag << "]\n";
  }
  void text(const std::string& computation, const std::string& message) { out_ << computation << ": " << message << "\n"; }

 private:
  std::ostream& out_;
};

struct RunConfig {
  std::string market;
  std::string measure;
  std::string claim;
  std::string csv;
  std::string process;
  std::string against;
  std::string kind = "log";
  std::string experiment;
  double gamma = 0.5;
  double x = 1.0;
  double delta = 0.25;
  double threshold = 1e-3;
  std::size_t exhaustive_limit = 12;
  std::size_t n_max = 100;
  std::uint64_t seed = 0;
};

std::string tol_flag(double tol) {
  std::ostringstream ss;
  ss << "tol=" << tol;
  return ss.str();
}

const WealthSet& wealth_of(const Market& m) {
  require(m.wealth.has_value(), ErrorCode::ParseError, "market file has no wealthset section");
  return *m.wealth;
}

const AdaptedProcess& pick_process(const Market& m, const std::string& name) {
  if (!name.empty()) return m.process(name);
  require(!m.processes.empty(), ErrorCode::ParseError, "market file defines no processes");
  return m.processes.begin()->second;
}

Measure measure_of(const Market& m, const RunConfig& cfg) {
  return cfg.measure.empty() ? Measure::physical(m.tree) : load_measure(m.tree, cfg.measure);
}

/// Name of the generator whose growth vector equals an extreme point, if any.
std::string extreme_name(const WealthSet& w, NodeId n, std::size_t i) {
  const auto& ng = w.growth(n);
  for (std::size_t k = 0; k < ng.candidates.size() && k < w.names().size(); ++k) {
    bool same = true;
    for (std::size_t c = 0; c < ng.candidates[k].size(); ++c) same = same && std::abs(ng.candidates[k][c] - ng.extremes[i][c]) <= 1e-12;
    if (same) return w.names()[k];
  }
  return "vertex" + std::to_string(i);
}

std::string vec(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

int cmd_validate(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  Report r(out);
  const auto& t = m.tree;
  r.line("tree", "steps", t.steps(), "exact");
  r.line("tree", "nodes", static_cast<double>(t.size()), "exact");
  r.line("tree", "leaves", static_cast<double>(t.leaves().size()), "exact");
  csv.add("validate", 0, "nodes", static_cast<double>(t.size()), "exact");
  for (int lv = 0; lv <= t.steps(); ++lv) {
    double s = 0.0;
    for (NodeId n : t.level_nodes(lv)) s += node_probability(t, n);
    r.line("tree", "probability_mass[level " + std::to_string(lv) + "]", s, tol_flag(kProbabilityTolerance));
  }
  for (const auto& [name, _] : m.processes) r.text("processes", name);
  if (m.wealth) {
    r.text("wealthset", std::string("kind ") + std::string(to_string(m.wealth->kind())));
    r.line("wealthset", "generators", static_cast<double>(m.wealth->generators().size()), "exact");
  }
  return 0;
}

int cmd_emery(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto q = measure_of(m, cfg);
  AdaptedProcess x = pick_process(m, cfg.process);
  if (!cfg.against.empty()) x = x - m.process(cfg.against);
  EmeryOptions opts;
  opts.grid_step = cfg.delta;
  opts.exhaustive_limit = cfg.exhaustive_limit;
  opts.seed = cfg.seed;
  opts.threads = worker_count();
  const auto res = emery_metric(m.tree, x, q, opts);
  const std::string flag{to_string(res.exactness)};
  Report r(out);
  const std::string what = cfg.against.empty() ? "emery functional" : "emery distance";
  r.line(what, "value", res.value, flag + ", grid step " + fmt(res.grid_step));
  r.line(what, "coordinates", static_cast<double>(res.coordinates), "exact");
  r.line("uniform functional", "value", up_metric(m.tree, x, q), "exact");
  const auto coords = res.witness.coordinates(m.tree);
  r.text(what, "witness " + vec(coords) + " [" + flag + "]");
  csv.add("emery", 0, "value", res.value, flag);
  for (std::size_t i = 0; i < coords.size(); ++i) csv.add("emery", i, "witness", coords[i], flag);
  return 0;
}

int cmd_na1(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto& w = wealth_of(m);
  const auto v = na1_check(w);
  Report r(out);
  r.text("first-kind arbitrage check", v.holds ? "verdict PASS" : "verdict FAIL");
  if (v.holds) {
    for (std::size_t t = 0; t < v.level_bounds.size(); ++t) {
      r.line("wealth bound", "sup X_t at level " + std::to_string(t), v.level_bounds[t], "exact");
      csv.add("na1", t, "level_bound", v.level_bounds[t], "exact");
    }
  } else {
    r.text("first-kind arbitrage check", "node '" + m.tree.label(*v.node) + "'");
    r.text("first-kind arbitrage check", "theta " + vec(v.theta) + " [tol=1e-09]");
    r.text("first-kind arbitrage check", "profit per child " + vec(v.profit) + " [tol=1e-09]");
    r.line("first-kind arbitrage check", "certificate rechecked", recheck_na1_certificate(w, v) ? 1.0 : 0.0, "tol=1e-12");
    for (std::size_t j = 0; j < v.theta.size(); ++j) csv.add("na1", j, "theta", v.theta[j], "tol=1e-09");
  }
  return 0;
}

int cmd_numeraire(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto& w = wealth_of(m);
  const auto q = measure_of(m, cfg);
  const auto res = numeraire(w, q);
  Report r(out);
  const std::string label = "log-optimal numeraire";
  for (NodeId n : m.tree.internal_nodes()) {
    const std::string at = "[" + m.tree.label(n) + "]";
    for (std::size_t i = 0; i < res.weights[n].size(); ++i) {
      const auto name = extreme_name(w, n, i);
      r.line(label, "weight" + at + "[" + name + "]", res.weights[n][i], "tol=1e-10");
      csv.add("numeraire", n, "weight:" + name, res.weights[n][i], "tol=1e-10");
    }
    r.text(label, "growth" + at + " " + vec(res.growth[n]) + " [tol=1e-10]");
    for (std::size_t k = 0; k < res.residuals[n].size(); ++k) {
      const std::string name = k < w.names().size() ? w.names()[k] : std::to_string(k);
      r.line(label, "residual" + at + "[" + name + "]", res.residuals[n][k], "E_Q[g/g^]-1, tol=1e-8");
    }
  }
  for (NodeId leaf : m.tree.leaves()) csv.add("numeraire", leaf, "terminal:" + m.tree.label(leaf), res.process[leaf], "tol=1e-10");
  r.line(label, "max_violation", res.max_violation, "tol=1e-8");
  return 0;
}

int cmd_utility(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto& w = wealth_of(m);
  require(cfg.kind == "log" || cfg.kind == "power", ErrorCode::InvalidArgument, "--kind must be log or power");
  const auto util = cfg.kind == "log" ? UtilitySpec::log() : UtilitySpec::power(cfg.gamma);
  const auto res = solve_utility(w, util, cfg.x);
  Report r(out);
  const std::string label = "utility duality " + util.describe();
  const std::string gap_flag = "gap tol=1e-6*(1+|u|)";
  r.line(label, "u(x)", res.u, gap_flag);
  r.line(label, "y_hat", res.y_hat, "tol=1e-15 (log y)");
  r.line(label, "v(y_hat)", res.v, gap_flag);
  r.line(label, "gap", res.gap, gap_flag);
  r.line(label, "projection_residual", res.projection_residual, "tol=1e-9");
  const auto leaves = m.tree.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& lab = m.tree.label(leaves[i]);
    r.line(label, "X_T[" + lab + "]", res.primal_terminal[i], "tol=1e-6");
    r.line(label, "Y_T[" + lab + "]", res.dual_terminal[i], "barrier gap 1e-13");
    csv.add("utility", i, "X_T:" + lab, res.primal_terminal[i], "tol=1e-6");
    csv.add("utility", i, "Y_T:" + lab, res.dual_terminal[i], "tol=1e-13");
  }
  csv.add("utility", 0, "u", res.u, "tol=1e-6");
  csv.add("utility", 0, "gap", res.gap, "tol=1e-6");
  return 0;
}

int cmd_bipolar(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto& w = wealth_of(m);
  require(!cfg.claim.empty(), ErrorCode::InvalidArgument, "--claim is required");
  const auto g = load_claim(m.tree, cfg.claim);
  const auto res = bipolar_membership(w, g);
  Report r(out);
  r.line("polar pairing", "max E[Y_T g]", res.value, "tol=1e-8");
  r.text("polar pairing", res.member ? "claim is in the bipolar set" : "claim is not in the bipolar set");
  csv.add("bipolar", 0, "max_pairing", res.value, "tol=1e-8");
  csv.add("bipolar", 0, "member", res.member ? 1.0 : 0.0, "tol=1e-8");
  return 0;
}

int cmd_convergence(const RunConfig& cfg, std::ostream& out, CsvSink& csv) {
  const auto m = load_market(cfg.market);
  const auto& t = m.tree;
  const auto q = measure_of(m, cfg);
  Report r(out);
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n_max = std::max<std::size_t>(cfg.n_max, 1);
  auto show = [&](std::size_t n) { return n <= 3 || n == n_max || (n & (n - 1)) == 0; };

  if (cfg.experiment == "ucp") {
    std::vector<AdaptedProcess> zs;
    for (std::size_t n = 1; n <= n_max; ++n) zs.push_back(ucp_random_supermartingale(t, q, n, rng));
    const auto rep = ucp_experiment(t, zs, q, cfg.threshold);
    for (const auto& row : rep.rows) {
      csv.add("ucp", row.n, "terminal_p", row.terminal_p, "exact");
      csv.add("ucp", row.n, "uniform", row.uniform, "exact");
      if (show(row.n)) {
        r.line("ucp upgrade", "P(Z_T-1) n=" + std::to_string(row.n), row.terminal_p, "exact");
        r.line("ucp upgrade", "uP(Z-1) n=" + std::to_string(row.n), row.uniform, "exact");
      }
    }
    r.text("ucp upgrade", std::string("final uniform value ") + (rep.final_below_delta ? "below" : "above") +
                              " threshold " + fmt(cfg.threshold) + " [exact]");
    return 0;
  }
  if (cfg.experiment == "qv") {
    const auto& x = pick_process(m, cfg.process);
    AdaptedProcess wdir(t.size());
    if (!cfg.against.empty()) {
      wdir = m.process(cfg.against);
    } else {
      std::normal_distribution<double> nd;
      for (NodeId n = 0; n < t.size(); ++n) wdir[n] = nd(rng);
    }
    std::vector<AdaptedProcess> es;
    for (std::size_t n = 1; n <= n_max; ++n) es.push_back(wdir * (1.0 / static_cast<double>(n)));
    const auto rows = qv_stability_experiment(t, x, es, q);
    bool all = true;
    for (const auto& row : rows) {
      all = all && row.bound_holds;
      csv.add("qv", row.n, "deviation_p", row.deviation_p, "exact");
      csv.add("qv", row.n, "worst_margin", row.worst_margin, "roundoff=1e-12");
      if (show(row.n)) r.line("quadratic variation stability", "P(var dev) n=" + std::to_string(row.n), row.deviation_p, "exact");
    }
    r.text("quadratic variation stability", std::string("pathwise variation bound ") + (all ? "holds" : "FAILS") +
                                                " for every n [roundoff=1e-12]");
    return 0;
  }
  if (cfg.experiment == "sconv") {
    const auto& x = pick_process(m, cfg.process);
    const auto eta = bang_bang_adversary(t, x, q, worker_count());
    std::vector<AdaptedProcess> xs;
    std::vector<PredictableProcess> etas;
    for (std::size_t n = 1; n <= n_max; ++n) {
      xs.push_back(x * (1.0 / static_cast<double>(n)));
      etas.push_back(eta);
    }
    const auto rep = sconv_criterion(t, xs, etas, q, cfg.threshold);
    for (std::size_t i = 0; i < rep.values.size(); ++i) {
      csv.add("sconv", rep.n[i], "p_integral", rep.values[i], "exact");
      if (show(rep.n[i])) r.line("integral criterion", "P((eta.X^n)_T) n=" + std::to_string(rep.n[i]), rep.values[i], "exact");
    }
    r.text("integral criterion", std::string("final value ") + (rep.below_threshold ? "below" : "above") +
                                     " threshold " + fmt(cfg.threshold) + " [exact]");
    return 0;
  }
  if (cfg.experiment == "decompose") {
    const auto& z = pick_process(m, cfg.process);
    const auto d = decompose(t, z, q);
    double recon = 0.0, jump = 0.0;
    for (NodeId n = 0; n < t.size(); ++n) {
      recon = std::max(recon, std::abs(z[n] - (1.0 + d.a[n] - d.b[n] + d.l[n])));
      if (n > 0) jump = std::max(jump, std::abs(d.l[n] - d.l[*t.parent(n)]));
      csv.add("decompose", n, "A:" + t.label(n), d.a[n], "exact");
      csv.add("decompose", n, "B:" + t.label(n), d.b[n], "exact");
      csv.add("decompose", n, "L:" + t.label(n), d.l[n], "exact");
      r.text("supermartingale decomposition",
             t.label(n) + " tau=" + (d.tau[n] == kNever ? std::string("never") : std::to_string(d.tau[n])) +
                 " A=" + fmt(d.a[n]) + " B=" + fmt(d.b[n]) + " L=" + fmt(d.l[n]) + " [exact]");
    }
    r.line("supermartingale decomposition", "max |Z - (1 + A - B + L)|", recon, "tol=1e-12");
    r.line("supermartingale decomposition", "max |dL|", jump, "bound 4, exact");
    r.line("supermartingale decomposition", "time-0 adjustment", d.adjustment, "exact");
    return 0;
  }
  throw Error(ErrorCode::InvalidArgument, "--experiment must be ucp, qv, sconv or decompose");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wealth-process toolkit on finite scenario trees"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--market", cfg.market, "market JSON file")->required();
    sub->add_option("--csv", cfg.csv, "write CSV rows to this path");
    sub->add_option("--seed", cfg.seed, "seed for randomized steps");
  };
  auto* validate = app.add_subcommand("validate", "parse and summarize a market file");
  common(validate);
  auto* emery = app.add_subcommand("emery", "Emery functional of a process or distance between two");
  common(emery);
  emery->add_option("--process", cfg.process, "process name")->required();
  emery->add_option("--against", cfg.against, "second process (distance mode)");
  emery->add_option("--delta", cfg.delta, "integrand grid step in (0, 2]");
  emery->add_option("--exhaustive-limit", cfg.exhaustive_limit, "max coordinates searched exhaustively");
  emery->add_option("--measure", cfg.measure, "measure JSON file");
  auto* na1 = app.add_subcommand("na1", "arbitrage of the first kind check");
  common(na1);
  auto* num = app.add_subcommand("numeraire", "log-optimal numeraire portfolio");
  common(num);
  num->add_option("--measure", cfg.measure, "measure JSON file");
  auto* util = app.add_subcommand("utility", "expected utility maximization with duality certificate");
  common(util);
  util->add_option("--kind", cfg.kind, "log or power")->check(CLI::IsMember({"log", "power"}));
  util->add_option("--gamma", cfg.gamma, "power utility exponent, gamma < 1, gamma != 0");
  util->add_option("--x", cfg.x, "initial capital");
  auto* bip = app.add_subcommand("bipolar", "bipolar membership of a claim");
  common(bip);
  bip->add_option("--claim", cfg.claim, "claim JSON file")->required();
  auto* conv = app.add_subcommand("convergence", "convergence experiments");
  common(conv);
  conv->add_option("--experiment", cfg.experiment, "ucp, qv, sconv or decompose")
      ->required()
      ->check(CLI::IsMember({"ucp", "qv", "sconv", "decompose"}));
  conv->add_option("--n-max", cfg.n_max, "sequence length");
  conv->add_option("--process", cfg.process, "process name");
  conv->add_option("--against", cfg.against, "perturbation direction (qv)");
  conv->add_option("--threshold", cfg.threshold, "threshold for the final value");
  conv->add_option("--measure", cfg.measure, "measure JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CsvSink csv;
  try {
    int code = 0;
    if (*validate) code = cmd_validate(cfg, out, csv);
    else if (*emery) code = cmd_emery(cfg, out, csv);
    else if (*na1) code = cmd_na1(cfg, out, csv);
    else if (*num) code = cmd_numeraire(cfg, out, csv);
    else if (*util) code = cmd_utility(cfg, out, csv);
    else if (*bip) code = cmd_bipolar(cfg, out, csv);
    else if (*conv) code = cmd_convergence(cfg, out, csv);
    csv.write(cfg.csv);
    return code;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace emerylab::cli
