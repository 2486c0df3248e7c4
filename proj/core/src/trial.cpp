#include "causalkit/trial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"
#include "causalkit/sampling.hpp"

namespace causalkit {

double Schedule::at(std::uint64_t t) const {
  if (t == 0) throw std::invalid_argument("schedule steps are 1-based");
  switch (kind) {
    case Kind::Step:
      return static_cast<double>(t) < horizon ? 1.0 : 0.0;
    case Kind::Constant:
      return value;
    case Kind::Geometric:
      return std::max(floor, start * std::pow(decay, static_cast<double>(t - 1)));
  }
  return 0.0;
}

Schedule Schedule::step(std::uint64_t horizon) {
  Schedule s;
  s.kind = Kind::Step;
  s.horizon = static_cast<double>(horizon);
  return s;
}

Schedule Schedule::constant(double v) {
  if (std::isnan(v) || v < 0.0) {
    throw std::invalid_argument("constant schedule value must be >= 0");
  }
  Schedule s;
  s.kind = Kind::Constant;
  s.value = v;
  return s;
}

Schedule Schedule::geometric(double start, double decay, double floor) {
  if (!(start >= 0.0) || !std::isfinite(start)) {
    throw std::invalid_argument("geometric schedule start must be finite and >= 0");
  }
  if (!(decay > 0.0) || decay > 1.0) {
    throw std::invalid_argument("geometric schedule decay must lie in (0, 1]");
  }
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw std::invalid_argument("geometric schedule floor must be finite and >= 0");
  }
  Schedule s;
  s.kind = Kind::Geometric;
  s.start = start;
  s.decay = decay;
  s.floor = floor;
  return s;
}

namespace {

double parse_schedule_number(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("schedule: cannot read number '" + text + "'");
  }
}

}  // namespace

Schedule Schedule::parse(const std::string& text) {
  auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument(
        "schedule must look like step:N, const:V, or geom:START,DECAY,FLOOR; "
        "got '" + text + "'");
  }
  std::string kind = text.substr(0, colon);
  std::string rest = text.substr(colon + 1);
  if (kind == "step") {
    double h = parse_schedule_number(rest);
    if (h < 0.0 || h != std::floor(h) || !std::isfinite(h)) {
      throw std::invalid_argument("step schedule horizon must be a "
                                  "nonnegative integer; got '" + rest + "'");
    }
    return step(static_cast<std::uint64_t>(h));
  }
  if (kind == "const") return constant(parse_schedule_number(rest));
  if (kind == "geom") {
    auto c1 = rest.find(',');
    auto c2 = c1 == std::string::npos ? std::string::npos
                                      : rest.find(',', c1 + 1);
    if (c2 == std::string::npos) {
      throw std::invalid_argument(
          "geom schedule needs three comma-separated numbers; got '" + rest +
          "'");
    }
    return geometric(parse_schedule_number(rest.substr(0, c1)),
                     parse_schedule_number(rest.substr(c1 + 1, c2 - c1 - 1)),
                     parse_schedule_number(rest.substr(c2 + 1)));
  }
  throw std::invalid_argument("unknown schedule kind '" + kind +
                              "'; expected step, const, or geom");
}

std::string Schedule::str() const {
  switch (kind) {
    case Kind::Step:
      return "step:" + format_double(horizon);
    case Kind::Constant:
      return "const:" + format_double(value);
    case Kind::Geometric:
      return "geom:" + format_double(start) + "," + format_double(decay) +
             "," + format_double(floor);
  }
  return "";
}

const Scm& TrialEnvironment::model_at(std::uint64_t t) const {
  const Scm* current = &scm;
  std::uint64_t best = 0;
  for (const auto& [start, model] : phases) {
    if (start <= t && start >= best) {
      best = start;
      current = &model;
    }
  }
  return *current;
}

std::vector<double> TrialEnvironment::action_values() const {
  auto it = scm.domains.find(action);
  if (it == scm.domains.end()) {
    throw std::invalid_argument("environment action node '" + action +
                                "' is not in the model");
  }
  if (it->second.continuous) {
    throw DomainError("action node '" + action +
                      "' needs a discrete domain to enumerate arms");
  }
  return it->second.values;
}

std::vector<double> policy_probs(const TrialState& state, double eps,
                                 double beta) {
  const std::size_t k = state.actions.size();
  if (k == 0) throw std::invalid_argument("policy needs at least one action");
  if (std::isnan(eps) || eps < 0.0 || eps > 1.0) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (std::isnan(beta) || beta < 0.0) {
    throw std::invalid_argument("beta must be >= 0 (infinity allowed)");
  }

  // Unestimated arms borrow the best current estimate, so exploitation can
  // still reach them.
  double best = 0.0;
  bool any = false;
  for (const auto& a : state.actions) {
    auto it = state.arms.find(a);
    if (it != state.arms.end() && it->second.estimated) {
      best = any ? std::max(best, it->second.estimate) : it->second.estimate;
      any = true;
    }
  }
  std::vector<double> values(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    auto it = state.arms.find(state.actions[i]);
    values[i] = (it != state.arms.end() && it->second.estimated)
                    ? it->second.estimate
                    : best;
  }

  std::vector<double> exploit(k, 0.0);
  if (std::isinf(beta)) {
    // softmax of an all-equal vector
    for (auto& p : exploit) p = 1.0 / static_cast<double>(k);
  } else if (beta == 0.0) {
    double top = *std::max_element(values.begin(), values.end());
    std::size_t pick = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (values[i] != top) continue;
      if (pick == k ||
          format_double(state.actions[i]) < format_double(state.actions[pick])) {
        pick = i;
      }
    }
    exploit[pick] = 1.0;
  } else {
    double top = *std::max_element(values.begin(), values.end());
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      exploit[i] = std::exp((values[i] - top) / beta);
      z += exploit[i];
    }
    for (auto& p : exploit) p /= z;
  }

  std::vector<double> probs(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    probs[i] = eps / static_cast<double>(k) + (1.0 - eps) * exploit[i];
  }
  return probs;
}

namespace {

void update_arm(ArmStats& arm, double y, bool explored, UpdateMode mode,
                double eta) {
  arm.pulls += 1;
  if (mode == UpdateMode::RecursiveMean) {
    if (!arm.estimated) {
      arm.estimate = y;
    } else {
      arm.estimate += (y - arm.estimate) / static_cast<double>(arm.pulls);
    }
  } else {
    // EMA unrolls from a zero prior; `estimated` only flags the first pull.
    arm.estimate = eta * arm.estimate + (1.0 - eta) * y;
  }
  arm.estimated = true;
  if (explored) {
    arm.explore_pulls += 1;
    if (!arm.explore_estimated) {
      arm.explore_estimate = y;
    } else {
      arm.explore_estimate +=
          (y - arm.explore_estimate) / static_cast<double>(arm.explore_pulls);
    }
    arm.explore_estimated = true;
  }
}

void ensure_arms(TrialState& state, const TrialEnvironment& env) {
  if (state.actions.empty()) {
    state.actions = env.action_values();
    for (double a : state.actions) state.arms[a];
  }
}

}  // namespace

void trial_step(TrialState& state, const TrialEnvironment& env,
                const Schedule& eps_schedule, const Schedule& beta_schedule,
                const RngSpec& rng) {
  ensure_arms(state, env);
  const std::uint64_t t = state.t + 1;
  const double eps = eps_schedule.at(t);
  const double beta = beta_schedule.at(t);
  if (std::isnan(eps) || eps < 0.0 || eps > 1.0) {
    throw std::invalid_argument("epsilon schedule left [0, 1] at step " +
                                std::to_string(t));
  }

  // Stream names carry a '/' so they can never collide with model node
  // names, which share this rng spec for the environment pull.
  bool explored =
      derive_stream(rng, t, "trial/explore").bernoulli(eps);
  std::size_t pick;
  if (explored) {
    pick = derive_stream(rng, t, "trial/explore-arm")
               .choice(state.actions.size());
  } else {
    auto exploit = policy_probs(state, 0.0, beta);
    double u = derive_stream(rng, t, "trial/exploit-arm").u01();
    double cum = 0.0;
    pick = exploit.size() - 1;
    for (std::size_t i = 0; i < exploit.size(); ++i) {
      cum += exploit[i];
      if (u < cum) {
        pick = i;
        break;
      }
    }
  }
  const double action = state.actions[pick];

  const Scm& model = env.model_at(t);
  auto row = sample_row(do_surgery(model, {{env.action, action}}), rng, t);
  const double y = row.at(env.outcome);
  std::vector<double> covariates;
  covariates.reserve(env.covariates.size());
  for (const auto& name : env.covariates) covariates.push_back(row.at(name));

  update_arm(state.arms[action], y, explored, state.mode, state.ema_eta);
  if (!env.covariates.empty()) {
    update_arm(state.conditional[covariates][action], y, explored, state.mode,
               state.ema_eta);
  }
  state.t = t;
  state.cumulative_outcome += y;
  state.explore_steps += explored ? 1 : 0;
  state.effective_explore += eps;
  TrialLogEntry entry;
  entry.t = t;
  entry.explored = explored;
  entry.action = action;
  entry.outcome = y;
  entry.covariates = std::move(covariates);
  state.log.push_back(std::move(entry));
}

std::pair<TrialState, TrialReport> run_trial(const TrialEnvironment& env,
                                             std::uint64_t steps,
                                             const Schedule& eps_schedule,
                                             const Schedule& beta_schedule,
                                             UpdateMode mode, double ema_eta,
                                             const RngSpec& rng) {
  if (steps == 0) throw std::invalid_argument("trial needs at least one step");
  if (mode == UpdateMode::Ema && (ema_eta < 0.0 || ema_eta >= 1.0)) {
    throw std::invalid_argument("ema eta must lie in [0, 1)");
  }
  TrialState state;
  state.mode = mode;
  state.ema_eta = ema_eta;
  ensure_arms(state, env);
  for (std::uint64_t t = 0; t < steps; ++t) {
    trial_step(state, env, eps_schedule, beta_schedule, rng);
  }
  return {state, summarize_trial(state)};
}

TrialReport summarize_trial(const TrialState& state) {
  TrialReport report;
  report.steps = state.t;
  report.cumulative_outcome = state.cumulative_outcome;
  report.effective_explore = state.effective_explore;
  report.explore_fraction =
      state.t == 0 ? 0.0
                   : static_cast<double>(state.explore_steps) /
                         static_cast<double>(state.t);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& a : state.actions) {
    auto it = state.arms.find(a);
    const ArmStats stats = it == state.arms.end() ? ArmStats{} : it->second;
    report.actions.push_back(a);
    report.pulls.push_back(stats.pulls);
    report.estimates.push_back(stats.estimated ? stats.estimate : nan);
    report.explore_pulls.push_back(stats.explore_pulls);
    report.explore_estimates.push_back(
        stats.explore_estimated ? stats.explore_estimate : nan);
    bool defined = stats.estimated && stats.explore_estimated;
    double gap = stats.estimate - stats.explore_estimate;
    report.bias.push_back(defined ? gap * gap : nan);
  }
  return report;
}

std::string TrialReport::to_json() const {
  nlohmann::json j;
  j["steps"] = steps;
  j["cumulative_outcome"] = cumulative_outcome;
  j["explore_fraction"] = explore_fraction;
  j["effective_explore"] = effective_explore;
  auto number_or_null = [](double v) {
    return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
  };
  nlohmann::json arms = nlohmann::json::array();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    nlohmann::json arm;
    arm["action"] = actions[i];
    arm["pulls"] = pulls[i];
    arm["estimate"] = number_or_null(estimates[i]);
    arm["explore_pulls"] = explore_pulls[i];
    arm["explore_estimate"] = number_or_null(explore_estimates[i]);
    arm["bias"] = number_or_null(bias[i]);
    arms.push_back(arm);
  }
  j["arms"] = arms;
  return j.dump(2);
}

BiasReport bias_check(const TrialState& state) {
  BiasReport report;
  report.actions = state.actions;
  report.effective_explore = state.effective_explore;
  report.explore_fraction =
      state.t == 0 ? 0.0
                   : static_cast<double>(state.explore_steps) /
                         static_cast<double>(state.t);
  for (const auto& a : state.actions) {
    auto it = state.arms.find(a);
    if (it == state.arms.end() || !it->second.estimated ||
        !it->second.explore_estimated) {
      report.per_arm.emplace_back();
      continue;
    }
    double gap = it->second.estimate - it->second.explore_estimate;
    report.per_arm.emplace_back(gap * gap);
  }
  return report;
}

std::map<double, std::optional<double>> conditional_estimates(
    const TrialState& state, const std::vector<double>& key) {
  std::map<double, std::optional<double>> out;
  std::map<double, ArmStats> replay;
  for (const auto& entry : state.log) {
    if (entry.covariates != key) continue;
    update_arm(replay[entry.action], entry.outcome, entry.explored, state.mode,
               state.ema_eta);
  }
  auto table = state.conditional.find(key);
  for (const auto& a : state.actions) {
    auto it = replay.find(a);
    if (it == replay.end()) {
      out[a] = std::nullopt;
      continue;
    }
    out[a] = it->second.estimate;
    if (table != state.conditional.end()) {
      auto inc = table->second.find(a);
      if (inc == table->second.end() ||
          std::abs(inc->second.estimate - it->second.estimate) > 1e-12) {
        throw std::logic_error(
            "incremental conditional estimate disagrees with the log replay");
      }
    }
  }
  return out;
}

Dataset trial_log_dataset(const TrialState& state,
                          const std::vector<std::string>& covariate_names) {
  Dataset data;
  data.columns = {"t", "explore", "action", "outcome"};
  for (const auto& name : covariate_names) data.columns.push_back(name);
  for (const auto& entry : state.log) {
    if (entry.covariates.size() != covariate_names.size()) {
      throw std::invalid_argument(
          "log entries carry " + std::to_string(entry.covariates.size()) +
          " covariates but " + std::to_string(covariate_names.size()) +
          " names were given");
    }
    std::vector<double> row = {static_cast<double>(entry.t),
                               entry.explored ? 1.0 : 0.0, entry.action,
                               entry.outcome};
    row.insert(row.end(), entry.covariates.begin(), entry.covariates.end());
    data.append_row(row);
  }
  data.provenance.push_back("trial log, " + std::to_string(state.t) +
                            " steps");
  return data;
}

double ContextualModel::predict(double action,
                                const std::vector<double>& covariates) const {
  if (shared) {
    auto it = contexts.find(action);
    if (it == contexts.end()) {
      throw std::invalid_argument("no context vector for action " +
                                  format_double(action));
    }
    return joint.predict(it->second);
  }
  auto it = per_arm.find(action);
  if (it == per_arm.end()) {
    throw std::invalid_argument("no fitted model for action " +
                                format_double(action));
  }
  return it->second.predict(covariates);
}

ContextualModel fit_contextual(const Dataset& log, const std::string& action,
                               const std::vector<std::string>& covariates,
                               const std::string& outcome, double ridge) {
  ContextualModel model;
  model.shared = false;
  std::size_t ac = log.col(action);
  std::set<double> arms;
  for (std::size_t r = 0; r < log.rows(); ++r) arms.insert(log.at(r, ac));
  for (double a : arms) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < log.rows(); ++r) {
      if (log.at(r, ac) == a) rows.push_back(r);
    }
    if (rows.size() < covariates.size() + 1) {
      throw DegenerateData("action " + format_double(a) + " has " +
                           std::to_string(rows.size()) +
                           " rows; need at least " +
                           std::to_string(covariates.size() + 1));
    }
    model.per_arm[a] =
        fit_least_squares(log.select_rows(rows), covariates, outcome, ridge);
  }
  return model;
}

ContextualModel fit_contextual_shared(
    const Dataset& log, const std::string& action, const std::string& outcome,
    const std::map<double, std::vector<double>>& contexts, double ridge) {
  if (contexts.empty()) {
    throw std::invalid_argument("shared fit needs at least one context vector");
  }
  std::size_t dim = contexts.begin()->second.size();
  for (const auto& [a, c] : contexts) {
    if (c.size() != dim) {
      throw std::invalid_argument("context vectors must share one dimension");
    }
  }
  std::size_t ac = log.col(action);

  // Expand each row's action into its context features, then run one fit.
  Dataset design;
  for (std::size_t i = 0; i < dim; ++i) {
    design.columns.push_back("c" + std::to_string(i));
  }
  design.columns.push_back(outcome);
  std::size_t yc = log.col(outcome);
  for (std::size_t r = 0; r < log.rows(); ++r) {
    auto it = contexts.find(log.at(r, ac));
    if (it == contexts.end()) {
      throw std::invalid_argument("log row " + std::to_string(r) +
                                  " has action " +
                                  format_double(log.at(r, ac)) +
                                  " with no context vector");
    }
    std::vector<double> row = it->second;
    row.push_back(log.at(r, yc));
    design.append_row(row);
  }
  if (design.rows() < dim + 1) {
    throw DegenerateData("shared fit needs at least " +
                         std::to_string(dim + 1) + " rows");
  }
  ContextualModel model;
  model.shared = true;
  model.contexts = contexts;
  std::vector<std::string> features(design.columns.begin(),
                                    design.columns.end() - 1);
  model.joint = fit_least_squares(design, features, outcome, ridge);
  return model;
}

}  // namespace causalkit
