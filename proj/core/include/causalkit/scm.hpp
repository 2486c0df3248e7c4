#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "causalkit/dag.hpp"
#include "causalkit/expr.hpp"

namespace causalkit {

struct Domain {
  bool continuous = true;
  std::vector<double> values;  // discrete case; nonempty, unique

  static Domain real() { return {true, {}}; }
  static Domain discrete(std::vector<double> vals) {
    return {false, std::move(vals)};
  }
  bool contains(double v) const;
  // Index of v in values (exact match, then 1e-9 tolerance); -1 if absent.
  int index_of(double v) const;
  bool operator==(const Domain&) const = default;
};

// Conditional pmf over the node's domain, one row per assignment of the
// parents. `parents` is kept sorted by name so the row keys do not depend on
// declaration order; rows map a parent-value tuple (in that order) to a
// probability vector aligned with the node's domain values.
struct DiscreteCpt {
  std::vector<std::string> parents;
  std::map<std::vector<double>, std::vector<double>> rows;
  bool operator==(const DiscreteCpt&) const = default;
};

struct LinearGaussian {
  std::map<std::string, double> weights;  // parent name -> coefficient
  double intercept = 0.0;
  double noise_std = 0.0;
  bool operator==(const LinearGaussian&) const = default;
};

// value := expr(parents, noise); the single noise term (if any) sits inside
// the expression, so shapes like 1(x>0) * max(0, x + normal(0,1)) keep the
// noise where it acts.
struct Deterministic {
  ExprPtr expr;
  bool operator==(const Deterministic& o) const {
    return expr_equal(*expr, *o.expr);
  }
};

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};

using Mechanism = std::variant<DiscreteCpt, LinearGaussian, Deterministic, Constant>;

struct Scm {
  Dag dag;
  std::map<std::string, Domain> domains;
  std::map<std::string, Mechanism> mechanisms;
};

// Structural equality: node/edge sets, domains and mechanisms must match;
// node declaration order is irrelevant.
bool scm_equal(const Scm& a, const Scm& b);

struct ValidationIssue {
  std::string where;  // node name, or "from->to" for an edge
  std::string message;
};

// Collects every violation rather than stopping at the first: unknown edge
// endpoints, cycles, missing/mismatched mechanisms, CPT shape and
// normalization problems, bad noise parameters, domain problems.
std::vector<ValidationIssue> validate(const Scm& scm);

// Human-readable one-per-line rendering of validation output.
std::string format_issues(const std::vector<ValidationIssue>& issues);

// Replaces each targeted node's mechanism with Constant(value) and severs its
// incoming edges. The input is not mutated. Unknown nodes and (for discrete
// nodes) out-of-domain values throw std::invalid_argument. Surgery on
// disjoint sets commutes and repeating a surgery is a no-op.
Scm do_surgery(const Scm& scm,
               const std::map<std::string, double>& assignments);

}  // namespace causalkit
