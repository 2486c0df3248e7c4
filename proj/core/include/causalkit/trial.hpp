#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalkit/dataset.hpp"
#include "causalkit/estimators.hpp"
#include "causalkit/rng.hpp"
#include "causalkit/scm.hpp"

namespace causalkit {

// Exploration/temperature schedules. CLI spellings: "step:1000",
// "const:0.1" (also "const:inf"), "geom:1.0,0.999,0.05".
struct Schedule {
  enum class Kind { Step, Constant, Geometric };
  Kind kind = Kind::Constant;
  double horizon = 0;                       // Step: 1 before, 0 after
  double value = 1.0;                       // Constant
  double start = 1.0, decay = 1.0, floor = 0.0;  // Geometric

  double at(std::uint64_t t) const;  // t is 1-based
  static Schedule step(std::uint64_t horizon);
  static Schedule constant(double v);
  static Schedule geometric(double start, double decay, double floor);
  static Schedule parse(const std::string& text);  // throws on bad spelling
  std::string str() const;
};

// A live model the trial pulls rows from: designated action and outcome
// nodes, optionally observed covariate nodes, and optional mechanism drift
// (phases[i] takes over from its start step onward).
struct TrialEnvironment {
  Scm scm;
  std::string action;
  std::string outcome;
  std::vector<std::string> covariates;
  std::vector<std::pair<std::uint64_t, Scm>> phases;

  const Scm& model_at(std::uint64_t t) const;
  std::vector<double> action_values() const;  // domain of the action node
};

struct ArmStats {
  std::uint64_t pulls = 0;
  double estimate = 0.0;        // running value estimate (mean or EMA)
  bool estimated = false;       // false until the arm is pulled once
  std::uint64_t explore_pulls = 0;
  double explore_estimate = 0.0;  // mean over exploration pulls only
  bool explore_estimated = false;
};

struct TrialLogEntry {
  std::uint64_t t = 0;
  bool explored = false;
  double action = 0.0;
  double outcome = 0.0;
  std::vector<double> covariates;
};

// RecursiveMean keeps the exact running mean of an arm's outcomes. Ema keeps
// estimate <- eta * estimate + (1 - eta) * outcome, unrolled from a zero
// prior, which tracks drifting environments. The exploration-only estimate is
// always a recursive mean; its whole point is staying unbiased.
enum class UpdateMode { RecursiveMean, Ema };

struct TrialState {
  std::vector<double> actions;  // fixed order; policy vectors align with it
  std::map<double, ArmStats> arms;
  UpdateMode mode = UpdateMode::RecursiveMean;
  double ema_eta = 0.9;
  std::uint64_t t = 0;
  double cumulative_outcome = 0.0;
  std::uint64_t explore_steps = 0;
  double effective_explore = 0.0;  // sum of epsilon_t so far
  std::vector<TrialLogEntry> log;
  // Covariate-conditional running estimates, keyed by exact covariate tuple.
  std::map<std::vector<double>, std::map<double, ArmStats>> conditional;
};

// Mixture policy: epsilon * uniform + (1-epsilon) * softmax(estimate/beta).
// beta = +infinity degrades to a uniform softmax; beta = 0 puts the whole
// exploit mass on the argmax (ties broken by smallest formatted action
// value). Arms never pulled are treated optimistically, as if they held the
// current best estimate. The result sums to 1 within 1e-12.
std::vector<double> policy_probs(const TrialState& state, double eps,
                                 double beta);

// One round: draw the explore bit, pick an action (uniform when exploring,
// Boltzmann otherwise), pull the environment, update running estimates and
// the log. Streams derive from (rng, t), so a trial is replayable.
void trial_step(TrialState& state, const TrialEnvironment& env,
                const Schedule& eps_schedule, const Schedule& beta_schedule,
                const RngSpec& rng);

struct TrialReport {
  std::uint64_t steps = 0;
  double cumulative_outcome = 0.0;
  double explore_fraction = 0.0;
  double effective_explore = 0.0;  // sum of scheduled epsilons
  // Per arm, aligned with TrialState::actions:
  std::vector<double> actions;
  std::vector<std::uint64_t> pulls;
  std::vector<double> estimates;          // NaN when never pulled
  std::vector<std::uint64_t> explore_pulls;
  std::vector<double> explore_estimates;  // NaN when never explored
  std::vector<double> bias;               // (estimate - explore)^2, NaN if undefined
  std::string to_json() const;
};

std::pair<TrialState, TrialReport> run_trial(const TrialEnvironment& env,
                                             std::uint64_t steps,
                                             const Schedule& eps_schedule,
                                             const Schedule& beta_schedule,
                                             UpdateMode mode, double ema_eta,
                                             const RngSpec& rng);

TrialReport summarize_trial(const TrialState& state);

// Squared gap between the full running estimate and the exploration-only
// estimate, per arm; empty optional when the arm has no exploration pulls.
struct BiasReport {
  std::vector<double> actions;
  std::vector<std::optional<double>> per_arm;
  double effective_explore = 0.0;
  double explore_fraction = 0.0;
};
BiasReport bias_check(const TrialState& state);

// Arm estimates restricted to steps whose covariates equal `key`, recomputed
// by replaying the log (the incremental table in TrialState must agree).
// Empty optional for arms with no matching rows; all-empty for unseen keys.
std::map<double, std::optional<double>> conditional_estimates(
    const TrialState& state, const std::vector<double>& key);

// Trial log as a dataset: columns t, explore, action, outcome, then one
// column per covariate node.
Dataset trial_log_dataset(const TrialState& state,
                          const std::vector<std::string>& covariate_names);

// Linear read-outs of a trial log (or any dataset shaped like one).
struct ContextualModel {
  bool shared = false;
  std::map<double, LinearModel> per_arm;          // covariate mode
  LinearModel joint;                              // action-context mode
  std::map<double, std::vector<double>> contexts; // action -> feature vector

  double predict(double action, const std::vector<double>& covariates) const;
};

// Per-arm linear model of outcome on covariates. Zero covariates reduces to
// per-arm means.
ContextualModel fit_contextual(const Dataset& log, const std::string& action,
                               const std::vector<std::string>& covariates,
                               const std::string& outcome, double ridge = 0.0);

// One shared linear model on per-action feature vectors; predictions for
// feature combinations never acted on come from the fitted coefficients.
ContextualModel fit_contextual_shared(
    const Dataset& log, const std::string& action, const std::string& outcome,
    const std::map<double, std::vector<double>>& contexts, double ridge = 0.0);

}  // namespace causalkit
