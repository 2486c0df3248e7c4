#include "causalkit/paths.hpp"

#include <stdexcept>

namespace causalkit {

namespace {

struct Walker {
  const Dag& dag;
  const std::set<std::string>& observed;
  std::string target;
  std::vector<std::string> trail;
  std::set<std::string> on_trail;
  PathReport* report;

  bool edge(const std::string& a, const std::string& b) const {
    return dag.edges.count({a, b}) > 0;
  }

  void classify(const std::vector<std::string>& path) {
    PathInfo info;
    info.nodes = path;
    info.causal = true;
    bool blocked = false;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      if (!edge(path[i], path[i + 1])) info.causal = false;
    }
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
      bool in_fwd = edge(path[i - 1], path[i]);   // previous -> here
      bool out_fwd = edge(path[i], path[i + 1]);  // here -> next
      NodeRole role;
      if (in_fwd && !out_fwd) {
        role = NodeRole::Collider;
      } else if (!in_fwd && out_fwd) {
        role = NodeRole::Fork;
      } else {
        role = NodeRole::Chain;
      }
      info.roles.push_back(role);
      bool here_observed = observed.count(path[i]) > 0;
      if (role == NodeRole::Collider) {
        // Open only if the collider itself, or something downstream of it,
        // is observed.
        bool downstream_observed = here_observed;
        if (!downstream_observed) {
          for (const auto& d : descendants(dag, path[i])) {
            if (observed.count(d)) {
              downstream_observed = true;
              break;
            }
          }
        }
        if (!downstream_observed) blocked = true;
      } else if (here_observed) {
        blocked = true;
      }
    }
    info.open = !blocked;
    report->paths.push_back(std::move(info));
  }

  void walk(const std::string& at) {
    if (at == target) {
      classify(trail);
      return;
    }
    for (const auto& next : dag.nodes) {
      if (on_trail.count(next)) continue;
      if (!edge(at, next) && !edge(next, at)) continue;
      trail.push_back(next);
      on_trail.insert(next);
      walk(next);
      on_trail.erase(next);
      trail.pop_back();
    }
  }
};

}  // namespace

PathReport classify_paths(const Dag& dag, const std::string& source,
                          const std::string& target,
                          const std::set<std::string>& observed,
                          std::size_t max_nodes) {
  if (dag.nodes.size() > max_nodes) {
    throw std::invalid_argument(
        "path enumeration supports at most " + std::to_string(max_nodes) +
        " nodes (got " + std::to_string(dag.nodes.size()) +
        "); simple paths grow exponentially with graph size");
  }
  if (source == target) {
    throw std::invalid_argument("source and target must differ");
  }
  if (!dag.has_node(source) || !dag.has_node(target)) {
    throw std::invalid_argument("source or target is not a node");
  }
  if (observed.count(source) || observed.count(target)) {
    throw std::invalid_argument(
        "the queried pair must not be in the observed set");
  }
  for (const auto& o : observed) {
    if (!dag.has_node(o)) {
      throw std::invalid_argument("observed set names unknown node '" + o +
                                  "'");
    }
  }

  PathReport report;
  Walker walker{dag, observed, target, {source}, {source}, &report};
  walker.walk(source);
  report.d_separated = true;
  for (const auto& p : report.paths) {
    if (p.open) report.d_separated = false;
  }
  return report;
}

}  // namespace causalkit
