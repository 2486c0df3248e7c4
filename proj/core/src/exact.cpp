#include "causalkit/exact.hpp"

#include <cmath>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"

namespace causalkit {

namespace {

constexpr std::size_t kMaxStates = std::size_t{1} << 24;

// p(node = value | parent values) for one node; `env` holds the values of
// everything earlier in topological order.
double node_prob(const Scm& scm, const std::string& node, double value,
                 const std::vector<std::pair<std::string, double>>& env) {
  const Mechanism& mech = scm.mechanisms.at(node);
  if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
    std::vector<double> key;
    key.reserve(cpt->parents.size());
    for (const auto& p : cpt->parents) {
      for (const auto& [name, v] : env) {
        if (name == p) {
          key.push_back(v);
          break;
        }
      }
    }
    const Domain& dom = scm.domains.at(node);
    int vi = dom.index_of(value);
    if (vi < 0) return 0.0;
    auto row = cpt->rows.find(key);
    if (row == cpt->rows.end()) {
      throw DomainError("cpt for '" + node + "' has no row for a reachable "
                        "parent assignment");
    }
    return row->second[static_cast<std::size_t>(vi)];
  }
  if (const auto* det = std::get_if<Deterministic>(&mech)) {
    // Deterministic given noise: accumulate the mass of noise values that
    // land on `value`. Matching uses the domain's 1e-9 snap.
    double mass = 0.0;
    for (const auto& [nv, np] : noise_of(*det->expr).support()) {
      double out = eval_expr(*det->expr, env, nv);
      if (out == value || std::abs(out - value) <= 1e-9) mass += np;
    }
    return mass;
  }
  if (const auto* c = std::get_if<Constant>(&mech)) {
    return (value == c->value || std::abs(value - c->value) <= 1e-9) ? 1.0
                                                                     : 0.0;
  }
  throw DomainError("'" + node + "' has a continuous mechanism; exact "
                    "enumeration handles discrete models only");
}

}  // namespace

DistTable joint_table(const Scm& scm) {
  auto order = topo_order(scm.dag);
  if (!order) throw std::invalid_argument("model graph has a cycle");

  DistTable table;
  table.variables = scm.dag.nodes;  // declaration order, like datasets
  std::size_t states = 1;
  for (const auto& node : table.variables) {
    const Domain& dom = scm.domains.at(node);
    if (dom.continuous) {
      throw DomainError("'" + node + "' has a continuous domain; exact "
                        "enumeration handles discrete models only");
    }
    if (dom.values.empty() || states > kMaxStates / dom.values.size()) {
      throw StateSpaceTooLarge(
          "joint state space exceeds the 2^24 assignment cap");
    }
    states *= dom.values.size();
    table.domains.push_back(dom);
  }

  // Walk the full cross product in flat order, keeping per-depth partial
  // products down the topological order.
  std::vector<std::size_t> topo_pos;  // topo index -> variable index
  for (const auto& node : *order) {
    for (std::size_t i = 0; i < table.variables.size(); ++i) {
      if (table.variables[i] == node) topo_pos.push_back(i);
    }
  }
  table.probs.assign(states, 0.0);
  std::vector<std::size_t> digits(table.variables.size(), 0);
  std::vector<double> assignment(table.variables.size());
  std::vector<std::pair<std::string, double>> env(table.variables.size());
  for (std::size_t flat = 0; flat < states; ++flat) {
    std::size_t rem = flat;
    for (std::size_t i = table.variables.size(); i-- > 0;) {
      std::size_t k = table.domains[i].values.size();
      digits[i] = rem % k;
      rem /= k;
      assignment[i] = table.domains[i].values[digits[i]];
    }
    env.clear();
    double p = 1.0;
    for (std::size_t t = 0; t < topo_pos.size() && p != 0.0; ++t) {
      std::size_t i = topo_pos[t];
      p *= node_prob(scm, table.variables[i], assignment[i], env);
      env.emplace_back(table.variables[i], assignment[i]);
    }
    table.probs[flat] = p;
  }
  return table;
}

DistTable conditional_query(const DistTable& joint,
                            const std::vector<std::string>& target,
                            const std::map<std::string, double>& evidence) {
  for (const auto& t : target) {
    if (evidence.count(t)) {
      throw std::invalid_argument("'" + t +
                                  "' appears as both target and evidence");
    }
  }
  // Zero out everything outside the evidence slice, then sum out all
  // non-target variables one at a time.
  DistTable table = joint;
  for (const auto& [node, value] : evidence) {
    std::size_t idx = table.variables.size();
    for (std::size_t i = 0; i < table.variables.size(); ++i) {
      if (table.variables[i] == node) idx = i;
    }
    if (idx == table.variables.size()) {
      throw std::invalid_argument("evidence names unknown variable '" + node +
                                  "'");
    }
    int vi = table.domains[idx].index_of(value);
    if (vi < 0) {
      throw std::invalid_argument("evidence value " + format_double(value) +
                                  " is outside the domain of '" + node + "'");
    }
    std::size_t stride = 1;
    for (std::size_t i = idx + 1; i < table.domains.size(); ++i) {
      stride *= table.domains[i].values.size();
    }
    std::size_t k = table.domains[idx].values.size();
    for (std::size_t flat = 0; flat < table.probs.size(); ++flat) {
      std::size_t digit = (flat / stride) % k;
      if (digit != static_cast<std::size_t>(vi)) table.probs[flat] = 0.0;
    }
  }
  std::vector<std::string> to_remove;
  for (const auto& v : table.variables) {
    bool keep = false;
    for (const auto& t : target) keep = keep || t == v;
    if (!keep) to_remove.push_back(v);
  }
  for (const auto& v : to_remove) table = marginalize(table, v);

  // Reorder axes to the requested target order.
  if (table.variables != target) {
    for (const auto& t : target) {
      bool present = false;
      for (const auto& v : table.variables) present = present || v == t;
      if (!present) {
        throw std::invalid_argument("target names unknown variable '" + t +
                                    "'");
      }
    }
    DistTable ordered;
    ordered.variables = target;
    std::vector<std::size_t> src_axis;
    for (const auto& t : target) {
      for (std::size_t i = 0; i < table.variables.size(); ++i) {
        if (table.variables[i] == t) src_axis.push_back(i);
      }
      ordered.domains.push_back(table.domains[src_axis.back()]);
    }
    ordered.probs.resize(table.probs.size());
    for (std::size_t flat = 0; flat < table.probs.size(); ++flat) {
      auto a = table.assignment_at(flat);
      std::vector<double> b(a.size());
      for (std::size_t i = 0; i < src_axis.size(); ++i) b[i] = a[src_axis[i]];
      ordered.probs[ordered.index_of(b)] = table.probs[flat];
    }
    table = std::move(ordered);
  }

  double z = table.total();
  if (z <= 0.0) {
    throw ZeroProbabilityEvidence(
        "the evidence has probability zero under this model");
  }
  for (double& p : table.probs) p /= z;
  return table;
}

DistTable interventional_query(const Scm& scm, const Query& q) {
  return conditional_query(joint_table(do_surgery(scm, q.interventions)),
                           q.target, q.evidence);
}

double ate_exact(const Scm& scm, const std::string& action,
                 const std::string& outcome, double treated, double control,
                 const std::map<std::string, double>& condition) {
  if (condition.count(action) || condition.count(outcome)) {
    throw std::invalid_argument(
        "condition must not mention the action or the outcome");
  }
  auto arm = [&](double value) {
    Query q;
    q.target = {outcome};
    q.evidence = condition;
    q.interventions = {{action, value}};
    return interventional_query(scm, q).expectation();
  };
  return arm(treated) - arm(control);
}

}  // namespace causalkit
