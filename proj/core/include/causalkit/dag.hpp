#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace causalkit {

// Node list keeps declaration order (it decides dataset column order and the
// tie-break in topological sorts); the edge set is order-free.
struct Dag {
  std::vector<std::string> nodes;
  std::set<std::pair<std::string, std::string>> edges;  // (source, target)

  bool has_node(const std::string& name) const;
  void add_node(const std::string& name);         // throws on duplicate
  void add_edge(const std::string& from, const std::string& to);

  std::vector<std::string> parents(const std::string& node) const;
  std::vector<std::string> children(const std::string& node) const;
};

struct StructureReport {
  std::vector<std::string> order;  // a topological order
  std::map<std::string, std::vector<std::string>> parents;
  std::map<std::string, std::vector<std::string>> children;
};

// Kahn's algorithm; ties broken by node declaration order. Empty optional
// when the graph has a cycle.
std::optional<std::vector<std::string>> topo_order(const Dag& dag);

// Same order but with lexicographic tie-break, so two structurally equal
// graphs built in different insertion orders agree. Used by the serializer.
std::optional<std::vector<std::string>> topo_order_lexicographic(const Dag& dag);

// Throws std::invalid_argument on a cyclic graph, naming the nodes involved.
StructureReport structure_query(const Dag& dag);

std::set<std::string> descendants(const Dag& dag, const std::string& node);
std::set<std::string> ancestors(const Dag& dag, const std::string& node);

}  // namespace causalkit
