#pragma once

#include <set>
#include <string>
#include <vector>

#include "causalkit/dag.hpp"

namespace causalkit {

// Role a non-endpoint node plays on a particular undirected path.
enum class NodeRole { Chain, Fork, Collider };

struct PathInfo {
  std::vector<std::string> nodes;   // source ... target
  std::vector<NodeRole> roles;      // one per interior node
  bool open = false;                // transmits dependence given `observed`
  bool causal = false;              // every edge points source -> target
};

struct PathReport {
  std::vector<PathInfo> paths;
  bool d_separated = false;  // all paths blocked
};

// Enumerates every simple path between source and target in the skeleton and
// classifies it against the observed set. A chain or fork node blocks its
// path when observed; a collider blocks unless it or one of its descendants
// is observed. Requires source != target and neither endpoint observed.
// Refuses graphs with more than `max_nodes` nodes (path count is worst-case
// exponential) with a clear error.
PathReport classify_paths(const Dag& dag, const std::string& source,
                          const std::string& target,
                          const std::set<std::string>& observed,
                          std::size_t max_nodes = 16);

}  // namespace causalkit
