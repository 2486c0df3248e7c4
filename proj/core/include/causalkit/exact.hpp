#pragma once

#include <map>
#include <string>
#include <vector>

#include "causalkit/dist_table.hpp"
#include "causalkit/scm.hpp"

namespace causalkit {

// Full joint by enumeration: product of per-node conditionals down the
// topological order. Every node must be discrete-valued (CPTs, constants,
// and deterministic mechanisms whose noise is discrete); the state space is
// capped at 2^24 assignments. This is the reference backend the sampling
// estimators are tested against.
DistTable joint_table(const Scm& scm);

struct Query {
  std::vector<std::string> target;
  std::map<std::string, double> evidence;       // observed values
  std::map<std::string, double> interventions;  // forced by surgery
};

// p(target | evidence): restrict to the evidence slice, sum out the rest,
// normalize. Zero-probability evidence raises ZeroProbabilityEvidence.
DistTable conditional_query(const DistTable& joint,
                            const std::vector<std::string>& target,
                            const std::map<std::string, double>& evidence);

// p(target | evidence, do(interventions)) == conditional_query on the
// surgically modified model. No estimation, no sampling.
DistTable interventional_query(const Scm& scm, const Query& q);

// E[outcome | do(action=treated), condition] - E[... = control, ...].
// With condition, covariates follow their conditional law given it.
// treated == control gives exactly 0.
double ate_exact(const Scm& scm, const std::string& action,
                 const std::string& outcome, double treated, double control,
                 const std::map<std::string, double>& condition = {});

}  // namespace causalkit
