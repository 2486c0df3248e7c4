#include "causalkit/dag.hpp"

#include <algorithm>
#include <stdexcept>

namespace causalkit {

bool Dag::has_node(const std::string& name) const {
  return std::find(nodes.begin(), nodes.end(), name) != nodes.end();
}

void Dag::add_node(const std::string& name) {
  if (has_node(name)) {
    throw std::invalid_argument("duplicate node '" + name + "'");
  }
  nodes.push_back(name);
}

void Dag::add_edge(const std::string& from, const std::string& to) {
  edges.emplace(from, to);
}

std::vector<std::string> Dag::parents(const std::string& node) const {
  // Declaration order of the sources, so downstream consumers are stable.
  std::vector<std::string> out;
  for (const auto& candidate : nodes) {
    if (edges.count({candidate, node})) out.push_back(candidate);
  }
  return out;
}

std::vector<std::string> Dag::children(const std::string& node) const {
  std::vector<std::string> out;
  for (const auto& candidate : nodes) {
    if (edges.count({node, candidate})) out.push_back(candidate);
  }
  return out;
}

namespace {

std::optional<std::vector<std::string>> topo_impl(const Dag& dag,
                                                  bool lexicographic) {
  std::map<std::string, int> indegree;
  for (const auto& n : dag.nodes) indegree[n] = 0;
  for (const auto& [from, to] : dag.edges) {
    if (indegree.count(to)) indegree[to]++;
  }
  std::vector<std::string> ready;  // kept sorted by the tie-break rule
  auto rank = [&](const std::string& name) -> std::size_t {
    if (lexicographic) return 0;  // unused
    return static_cast<std::size_t>(
        std::find(dag.nodes.begin(), dag.nodes.end(), name) -
        dag.nodes.begin());
  };
  auto insert_ready = [&](const std::string& name) {
    auto less = [&](const std::string& a, const std::string& b) {
      return lexicographic ? a < b : rank(a) < rank(b);
    };
    ready.insert(std::lower_bound(ready.begin(), ready.end(), name, less),
                 name);
  };
  for (const auto& n : dag.nodes) {
    if (indegree[n] == 0) insert_ready(n);
  }
  std::vector<std::string> order;
  order.reserve(dag.nodes.size());
  while (!ready.empty()) {
    std::string n = ready.front();
    ready.erase(ready.begin());
    order.push_back(n);
    for (const auto& c : dag.children(n)) {
      if (--indegree[c] == 0) insert_ready(c);
    }
  }
  if (order.size() != dag.nodes.size()) return std::nullopt;
  return order;
}

}  // namespace

std::optional<std::vector<std::string>> topo_order(const Dag& dag) {
  return topo_impl(dag, false);
}

std::optional<std::vector<std::string>> topo_order_lexicographic(
    const Dag& dag) {
  return topo_impl(dag, true);
}

StructureReport structure_query(const Dag& dag) {
  auto order = topo_order(dag);
  if (!order) {
    // Name the nodes still carrying incoming edges after peeling; they form
    // (or feed) the cycle.
    std::map<std::string, int> indegree;
    for (const auto& n : dag.nodes) indegree[n] = 0;
    for (const auto& [from, to] : dag.edges) {
      if (indegree.count(to)) indegree[to]++;
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& n : dag.nodes) {
        if (indegree[n] == 0) {
          indegree[n] = -1;
          for (const auto& c : dag.children(n)) {
            if (indegree[c] > 0) indegree[c]--;
            changed = true;
          }
        }
      }
    }
    std::string members;
    for (const auto& [n, d] : indegree) {
      if (d > 0) members += (members.empty() ? "" : ", ") + n;
    }
    throw std::invalid_argument("graph has a cycle involving: " + members);
  }
  StructureReport report;
  report.order = *order;
  for (const auto& n : dag.nodes) {
    report.parents[n] = dag.parents(n);
    report.children[n] = dag.children(n);
  }
  return report;
}

namespace {

void reach(const Dag& dag, const std::string& node, bool forward,
           std::set<std::string>& seen) {
  for (const auto& [from, to] : dag.edges) {
    const std::string& src = forward ? from : to;
    const std::string& dst = forward ? to : from;
    if (src == node && !seen.count(dst)) {
      seen.insert(dst);
      reach(dag, dst, forward, seen);
    }
  }
}

}  // namespace

std::set<std::string> descendants(const Dag& dag, const std::string& node) {
  std::set<std::string> seen;
  reach(dag, node, true, seen);
  return seen;
}

std::set<std::string> ancestors(const Dag& dag, const std::string& node) {
  std::set<std::string> seen;
  reach(dag, node, false, seen);
  return seen;
}

}  // namespace causalkit
