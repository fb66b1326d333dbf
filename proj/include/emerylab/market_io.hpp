#pragma once

// JSON market files.
//
//   {
//     "steps": 1,                                   optional; defaults to tree depth
//     "description": "...",                         optional
//     "nodes": [ {"id": "r"},
//                {"id": "u", "parent": "r", "prob": 0.5},
//                {"id": "d", "parent": "r", "prob": 0.5} ],
//     "processes": { "riskless": {"r": 1, "u": 1, "d": 1},
//                    "stock":    {"r": 1, "u": 2, "d": 0.5} },
//     "wealthset": { "kind": "hull", "generators": ["riskless", "stock"] }
//   }
//
// A conic wealth set lists price processes as "generators", or gives gross
// returns directly: "risky_returns": [[1.1, 1.2]] applies one row per asset
// (one entry per child) at every internal node, and
// "risky_returns": {"r": [[1.1, 1.2]]} sets them node by node.
//
// Measure files: {"weights": {"u": 0.8, "d": 0.2}} over leaves.
// Claim files:   {"claim": {"u": 1.0, "d": 0.0}} over leaves.
//
// Unknown fields anywhere are rejected.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emerylab/tree.hpp"
#include "emerylab/wealthset.hpp"

namespace emerylab {

struct Market {
  ScenarioTree tree;
  std::string description;
  std::map<std::string, AdaptedProcess> processes;
  std::optional<WealthSet> wealth;

  const AdaptedProcess& process(const std::string& name) const {
    auto it = processes.find(name);
    require(it != processes.end(), ErrorCode::UnknownNode, "no process named '" + name + "'");
    return it->second;
  }
};

Market parse_market(const std::string& content, const std::string& source = "market");
Market load_market(const std::string& path);

Measure parse_measure(const ScenarioTree& tree, const std::string& content, const std::string& source = "measure");
Measure load_measure(const ScenarioTree& tree, const std::string& path);

/// Leaf values of a claim, in `tree.leaves()` order.
std::vector<double> parse_claim(const ScenarioTree& tree, const std::string& content, const std::string& source = "claim");
std::vector<double> load_claim(const ScenarioTree& tree, const std::string& path);

}  // namespace emerylab
