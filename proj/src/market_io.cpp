#include "emerylab/market_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emerylab {

namespace {

using nlohmann::json;

void only_fields(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), ErrorCode::ParseError, where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    require(ok.count(key) > 0, ErrorCode::ParseError, "unknown field '" + key + "' in " + where);
  }
}

double number(const json& j, const std::string& where) {
  require(j.is_number(), ErrorCode::ParseError, where + " must be a number");
  return j.get<double>();
}

std::string text(const json& j, const std::string& where) {
  require(j.is_string(), ErrorCode::ParseError, where + " must be a string");
  return j.get<std::string>();
}

json parse_json(const std::string& content, const std::string& source) {
  try {
    return json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, source + ": " + e.what());
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AdaptedProcess node_values(const ScenarioTree& tree, const json& j, const std::string& where) {
  require(j.is_object(), ErrorCode::ParseError, where + " must map node ids to values");
  AdaptedProcess x(tree.size(), 0.0);
  std::vector<bool> seen(tree.size(), false);
  for (const auto& [key, value] : j.items()) {
    auto n = tree.find(key);
    require(n.has_value(), ErrorCode::ParseError, where + " refers to unknown node '" + key + "'");
    x[*n] = number(value, where + "." + key);
    seen[*n] = true;
  }
  for (NodeId n = 0; n < tree.size(); ++n) {
    require(seen[n], ErrorCode::ParseError, where + " has no value for node '" + tree.label(n) + "'");
  }
  return x;
}

std::vector<double> leaf_values(const ScenarioTree& tree, const json& j, const std::string& where) {
  require(j.is_object(), ErrorCode::ParseError, where + " must map leaf ids to values");
  const auto leaves = tree.leaves();
  std::vector<double> out(leaves.size(), 0.0);
  std::vector<bool> seen(leaves.size(), false);
  for (const auto& [key, value] : j.items()) {
    auto n = tree.find(key);
    require(n.has_value() && tree.is_leaf(*n), ErrorCode::ParseError, where + ": '" + key + "' is not a leaf");
    out[tree.leaf_index(*n)] = number(value, where + "." + key);
    seen[tree.leaf_index(*n)] = true;
  }
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    require(seen[i], ErrorCode::ParseError, where + " has no value for leaf '" + tree.label(leaves[i]) + "'");
  }
  return out;
}

std::vector<std::vector<double>> return_matrix(const json& j, const std::string& where) {
  require(j.is_array(), ErrorCode::ParseError, where + " must be a list of return rows");
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) {
    require(row.is_array(), ErrorCode::ParseError, where + " rows must be lists");
    std::vector<double> r;
    for (const auto& v : row) r.push_back(number(v, where));
    rows.push_back(std::move(r));
  }
  return rows;
}

WealthSet parse_wealthset(const Market& m, const json& j) {
  only_fields(j, {"kind", "generators", "risky_returns"}, "wealthset");
  require(j.contains("kind"), ErrorCode::ParseError, "wealthset.kind is required");
  const auto kind = text(j["kind"], "wealthset.kind");
  std::vector<std::string> names;
  std::vector<AdaptedProcess> procs;
  if (j.contains("generators")) {
    require(j["generators"].is_array(), ErrorCode::ParseError, "wealthset.generators must be a list");
    for (const auto& g : j["generators"]) {
      names.push_back(text(g, "wealthset.generators[]"));
      auto it = m.processes.find(names.back());
      require(it != m.processes.end(), ErrorCode::ParseError, "generator '" + names.back() + "' is not a process");
      procs.push_back(it->second);
    }
  }
  if (kind == "hull") {
    require(!j.contains("risky_returns"), ErrorCode::ParseError, "risky_returns only apply to conic sets");
    return WealthSet::hull(m.tree, std::move(procs), std::move(names));
  }
  require(kind == "conic", ErrorCode::ParseError, "wealthset.kind must be 'hull' or 'conic'");
  if (!j.contains("risky_returns")) return WealthSet::conic_from_prices(m.tree, procs, std::move(names));
  require(procs.empty(), ErrorCode::ParseError, "give either generators or risky_returns for a conic set");

  const auto& rr = j["risky_returns"];
  std::vector<std::vector<std::vector<double>>> returns(m.tree.size());
  if (rr.is_array()) {
    const auto rows = return_matrix(rr, "wealthset.risky_returns");
    for (NodeId n : m.tree.internal_nodes()) returns[n] = rows;
  } else {
    require(rr.is_object(), ErrorCode::ParseError, "wealthset.risky_returns must be a list or a node map");
    for (const auto& [key, value] : rr.items()) {
      auto n = m.tree.find(key);
      require(n.has_value() && !m.tree.is_leaf(*n), ErrorCode::ParseError,
              "risky_returns: '" + key + "' is not an internal node");
      returns[*n] = return_matrix(value, "wealthset.risky_returns." + key);
    }
  }
  return WealthSet::conic(m.tree, std::move(returns));
}

}  // namespace

Market parse_market(const std::string& content, const std::string& source) {
  const json j = parse_json(content, source);
  only_fields(j, {"steps", "description", "nodes", "processes", "wealthset"}, "market");
  require(j.contains("nodes") && j["nodes"].is_array(), ErrorCode::ParseError, "market.nodes must be a list");

  std::vector<NodeSpec> spec;
  for (const auto& node : j["nodes"]) {
    only_fields(node, {"id", "parent", "prob"}, "node");
    require(node.contains("id"), ErrorCode::ParseError, "node without id");
    NodeSpec s;
    s.id = text(node["id"], "node.id");
    if (node.contains("parent") && !node["parent"].is_null()) s.parent = text(node["parent"], "node.parent");
    if (node.contains("prob")) s.prob = number(node["prob"], "node.prob");
    spec.push_back(std::move(s));
  }
  std::optional<int> steps;
  if (j.contains("steps")) {
    require(j["steps"].is_number_integer(), ErrorCode::ParseError, "market.steps must be an integer");
    steps = j["steps"].get<int>();
  }

  Market m{build_tree(spec, steps), {}, {}, std::nullopt};
  if (j.contains("description")) m.description = text(j["description"], "market.description");
  if (j.contains("processes")) {
    require(j["processes"].is_object(), ErrorCode::ParseError, "market.processes must be an object");
    for (const auto& [name, values] : j["processes"].items()) {
      m.processes.emplace(name, node_values(m.tree, values, "processes." + name));
    }
  }
  if (j.contains("wealthset")) m.wealth = parse_wealthset(m, j["wealthset"]);
  return m;
}

Market load_market(const std::string& path) { return parse_market(slurp(path), path); }

Measure parse_measure(const ScenarioTree& tree, const std::string& content, const std::string& source) {
  const auto j = parse_json(content, source);
  only_fields(j, {"weights"}, "measure");
  require(j.contains("weights"), ErrorCode::ParseError, "measure.weights is required");
  const auto w = leaf_values(tree, j["weights"], "measure.weights");
  return Measure(tree, w);
}

Measure load_measure(const ScenarioTree& tree, const std::string& path) {
  return parse_measure(tree, slurp(path), path);
}

std::vector<double> parse_claim(const ScenarioTree& tree, const std::string& content, const std::string& source) {
  const auto j = parse_json(content, source);
  only_fields(j, {"claim"}, "claim file");
  require(j.contains("claim"), ErrorCode::ParseError, "claim file needs a 'claim' object");
  return leaf_values(tree, j["claim"], "claim");
}

std::vector<double> load_claim(const ScenarioTree& tree, const std::string& path) {
  return parse_claim(tree, slurp(path), path);
}

}  // namespace emerylab
