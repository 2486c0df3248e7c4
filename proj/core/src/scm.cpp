#include "causalkit/scm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double

namespace causalkit {

bool Domain::contains(double v) const {
  return continuous || index_of(v) >= 0;
}

int Domain::index_of(double v) const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == v) return static_cast<int>(i);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i] - v) <= 1e-9) return static_cast<int>(i);
  }
  return -1;
}

bool scm_equal(const Scm& a, const Scm& b) {
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  return sorted(a.dag.nodes) == sorted(b.dag.nodes) &&
         a.dag.edges == b.dag.edges && a.domains == b.domains &&
         a.mechanisms == b.mechanisms;
}

namespace {

// Parent names a mechanism actually references.
std::set<std::string> mechanism_refs(const Mechanism& mech) {
  std::set<std::string> refs;
  if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
    refs.insert(cpt->parents.begin(), cpt->parents.end());
  } else if (const auto* lg = std::get_if<LinearGaussian>(&mech)) {
    for (const auto& [name, w] : lg->weights) refs.insert(name);
  } else if (const auto* det = std::get_if<Deterministic>(&mech)) {
    if (det->expr) collect_vars(*det->expr, refs);
  }
  return refs;
}

void check_noise(const std::string& node, const NoiseSpec& noise,
                 std::vector<ValidationIssue>& issues) {
  switch (noise.kind) {
    case NoiseSpec::Kind::Normal:
      if (noise.b < 0) {
        issues.push_back({node, "normal noise std must be >= 0"});
      }
      break;
    case NoiseSpec::Kind::Bernoulli:
      if (noise.a < 0 || noise.a > 1) {
        issues.push_back({node, "bernoulli parameter must lie in [0,1]"});
      }
      break;
    case NoiseSpec::Kind::Choice:
      if (noise.values.empty()) {
        issues.push_back({node, "uniform noise needs at least one value"});
      }
      break;
    case NoiseSpec::Kind::Point:
      break;
  }
}

}  // namespace

std::vector<ValidationIssue> validate(const Scm& scm) {
  std::vector<ValidationIssue> issues;
  const Dag& dag = scm.dag;

  std::set<std::string> name_set(dag.nodes.begin(), dag.nodes.end());
  if (name_set.size() != dag.nodes.size()) {
    for (auto it = dag.nodes.begin(); it != dag.nodes.end(); ++it) {
      if (std::count(dag.nodes.begin(), it, *it) == 1) {
        issues.push_back({*it, "node declared more than once"});
      }
    }
  }

  for (const auto& [from, to] : dag.edges) {
    if (!name_set.count(from) || !name_set.count(to)) {
      issues.push_back({from + "->" + to, "edge endpoint is not a node"});
    } else if (from == to) {
      issues.push_back({from + "->" + to, "self loop"});
    }
  }

  if (!topo_order(dag)) {
    try {
      structure_query(dag);
    } catch (const std::invalid_argument& e) {
      issues.push_back({"(graph)", e.what()});
    }
    return issues;  // everything below assumes an acyclic graph
  }

  for (const auto& node : dag.nodes) {
    auto dom_it = scm.domains.find(node);
    if (dom_it == scm.domains.end()) {
      issues.push_back({node, "missing domain"});
      continue;
    }
    const Domain& dom = dom_it->second;
    if (!dom.continuous) {
      if (dom.values.empty()) {
        issues.push_back({node, "discrete domain is empty"});
      }
      std::set<double> uniq(dom.values.begin(), dom.values.end());
      if (uniq.size() != dom.values.size()) {
        issues.push_back({node, "discrete domain repeats a value"});
      }
    }

    auto mech_it = scm.mechanisms.find(node);
    if (mech_it == scm.mechanisms.end()) {
      issues.push_back({node, "missing mechanism"});
      continue;
    }
    const Mechanism& mech = mech_it->second;

    auto parent_list = dag.parents(node);
    std::set<std::string> parent_set(parent_list.begin(), parent_list.end());
    std::set<std::string> refs = mechanism_refs(mech);
    for (const auto& r : refs) {
      if (!parent_set.count(r)) {
        issues.push_back(
            {node, "mechanism references '" + r + "' which is not a parent"});
      }
    }
    for (const auto& p : parent_set) {
      if (!refs.count(p)) {
        issues.push_back(
            {node, "edge " + p + "->" + node + " has no mechanism reference"});
      }
    }

    if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
      if (dom.continuous) {
        issues.push_back({node, "cpt mechanism needs a discrete domain"});
        continue;
      }
      if (!std::is_sorted(cpt->parents.begin(), cpt->parents.end())) {
        issues.push_back({node, "cpt parent list must be sorted by name"});
      }
      // Row keys must cover the parent domain cross product exactly.
      std::size_t expected_rows = 1;
      bool parents_ok = true;
      for (const auto& p : cpt->parents) {
        auto pd = scm.domains.find(p);
        if (pd == scm.domains.end() || pd->second.continuous) {
          issues.push_back(
              {node, "cpt parent '" + p + "' must have a discrete domain"});
          parents_ok = false;
          break;
        }
        expected_rows *= pd->second.values.size();
      }
      for (const auto& [key, pmf] : cpt->rows) {
        if (key.size() != cpt->parents.size()) {
          issues.push_back({node, "cpt row key arity mismatch"});
          parents_ok = false;
          continue;
        }
        if (pmf.size() != dom.values.size()) {
          issues.push_back({node, "cpt row length does not match the domain"});
          continue;
        }
        double total = 0.0;
        bool negative = false;
        for (double p : pmf) {
          total += p;
          negative = negative || p < 0;
        }
        if (negative) issues.push_back({node, "cpt row has a negative entry"});
        if (std::abs(total - 1.0) > 1e-9) {
          issues.push_back({node, "cpt row sums to " + format_double(total) +
                                      ", expected 1"});
        }
        if (parents_ok) {
          for (std::size_t i = 0; i < key.size(); ++i) {
            if (!scm.domains.at(cpt->parents[i]).contains(key[i])) {
              issues.push_back({node, "cpt row key value " +
                                          format_double(key[i]) +
                                          " outside domain of '" +
                                          cpt->parents[i] + "'"});
            }
          }
        }
      }
      if (parents_ok && cpt->rows.size() != expected_rows) {
        issues.push_back(
            {node, "cpt has " + std::to_string(cpt->rows.size()) +
                       " rows, expected " + std::to_string(expected_rows) +
                       " (one per parent assignment)"});
      }
    } else if (const auto* lg = std::get_if<LinearGaussian>(&mech)) {
      if (lg->noise_std < 0) {
        issues.push_back({node, "noise std must be >= 0"});
      }
      if (!dom.continuous) {
        issues.push_back(
            {node, "linear-gaussian mechanism needs a continuous domain"});
      }
    } else if (const auto* det = std::get_if<Deterministic>(&mech)) {
      if (!det->expr) {
        issues.push_back({node, "deterministic mechanism has no expression"});
        continue;
      }
      std::size_t noises = count_noise(*det->expr);
      if (noises > 1) {
        issues.push_back(
            {node, "expression contains " + std::to_string(noises) +
                       " noise terms; at most one is allowed"});
      } else {
        check_noise(node, noise_of(*det->expr), issues);
      }
    } else if (const auto* c = std::get_if<Constant>(&mech)) {
      if (!dom.contains(c->value)) {
        issues.push_back({node, "constant value " + format_double(c->value) +
                                    " lies outside the domain"});
      }
    }
  }

  // Domains/mechanisms for names that are not nodes at all.
  for (const auto& [name, d] : scm.domains) {
    if (!name_set.count(name)) {
      issues.push_back({name, "domain declared for unknown node"});
    }
  }
  for (const auto& [name, m] : scm.mechanisms) {
    if (!name_set.count(name)) {
      issues.push_back({name, "mechanism declared for unknown node"});
    }
  }
  return issues;
}

std::string format_issues(const std::vector<ValidationIssue>& issues) {
  std::ostringstream out;
  for (const auto& issue : issues) {
    out << issue.where << ": " << issue.message << "\n";
  }
  return out.str();
}

Scm do_surgery(const Scm& scm,
               const std::map<std::string, double>& assignments) {
  Scm out = scm;
  for (const auto& [node, value] : assignments) {
    if (!out.dag.has_node(node)) {
      throw std::invalid_argument("do() targets unknown node '" + node + "'");
    }
    const Domain& dom = out.domains.at(node);
    if (!dom.contains(value)) {
      throw std::invalid_argument("do(" + node + " = " + format_double(value) +
                                  ") is outside the node's domain");
    }
    for (auto it = out.dag.edges.begin(); it != out.dag.edges.end();) {
      it = (it->second == node) ? out.dag.edges.erase(it) : std::next(it);
    }
    out.mechanisms[node] = Constant{value};
  }
  return out;
}

}  // namespace causalkit
