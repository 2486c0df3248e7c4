// Command-line front end for the causalkit library: validate and sample
// models, answer exact queries, run estimators on CSV data, simulate
// adaptive trials, and reproduce the built-in experiments.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "causalkit/dsl.hpp"
#include "causalkit/errors.hpp"
#include "causalkit/estimators.hpp"
#include "causalkit/exact.hpp"
#include "causalkit/experiments.hpp"
#include "causalkit/sampling.hpp"
#include "causalkit/trial.hpp"

namespace {

using namespace causalkit;

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

// Usage problems the library reports as invalid_argument (bad schedule
// spellings, unknown ids) should exit 2, not 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Scm load_model(const std::string& path) {
  ParseResult result = parse_scm(read_file(path));
  if (!result.ok()) {
    throw DomainError("model file " + path + " has errors:\n" +
                      format_parse_errors(result.errors));
  }
  return *result.scm;
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(output, std::ios::binary);
  if (!out) throw DomainError("cannot write file: " + output);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// --seed flag wins, then CAUSAL_KIT_SEED, then the library default.
RngSpec seed_spec(const std::optional<std::uint64_t>& flag) {
  if (flag) return RngSpec{*flag};
  if (const char* env = std::getenv("CAUSAL_KIT_SEED")) {
    try {
      return RngSpec{std::stoull(env)};
    } catch (const std::exception&) {
      throw UsageError("CAUSAL_KIT_SEED is not a number: " +
                       std::string(env));
    }
  }
  return RngSpec{};
}

std::map<std::string, double> parse_bindings(
    const std::vector<std::string>& pairs, const char* flag) {
  std::map<std::string, double> out;
  for (const auto& p : pairs) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError(std::string(flag) + " expects name=value, got '" + p +
                       "'");
    }
    try {
      std::size_t used = 0;
      double v = std::stod(p.substr(eq + 1), &used);
      if (used != p.size() - eq - 1) throw std::invalid_argument(p);
      out[p.substr(0, eq)] = v;
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + " expects name=value, got '" + p +
                       "'");
    }
  }
  return out;
}

std::string dataset_json(const Dataset& d) {
  nlohmann::json j;
  j["columns"] = d.columns;
  j["provenance"] = d.provenance;
  auto rows = nlohmann::json::array();
  for (std::size_t r = 0; r < d.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (std::size_t c = 0; c < d.cols(); ++c) row.push_back(d.at(r, c));
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j.dump(2);
}

int run(int argc, char** argv) {
  CLI::App app{"causal-model toolkit: parse, sample, query, estimate"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string model_path, data_path, output;
  std::optional<std::uint64_t> seed_flag;
  std::string format = "csv";

  // validate ----------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "Parse a model file and "
                                      "report problems");
  validate->add_option("model", model_path, "model file")->required();
  validate->callback([&] {
    ParseResult result = parse_scm(read_file(model_path));
    if (!result.ok()) {
      throw DomainError("model file " + model_path + " has errors:\n" +
                        format_parse_errors(result.errors));
    }
    std::cout << "OK\n";
  });

  // sample ------------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "Draw rows by ancestral "
                                    "sampling");
  std::uint64_t n_rows = 0;
  sample->add_option("model", model_path, "model file")->required();
  sample->add_option("-n,--rows", n_rows, "number of rows")->required();
  sample->add_option("--seed", seed_flag, "rng seed");
  sample->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  sample->add_option("-o,--output", output, "output path (default stdout)");
  sample->callback([&] {
    Dataset d = ancestral_sample(load_model(model_path), n_rows,
                                 seed_spec(seed_flag));
    emit(format == "json" ? dataset_json(d) : to_csv(d), output);
  });

  // exact -------------------------------------------------------------------
  auto* exact = app.add_subcommand("exact", "Enumerate p(target | given, "
                                   "do(...)) on a discrete model");
  std::vector<std::string> target_names, given_pairs, do_pairs;
  exact->add_option("model", model_path, "model file")->required();
  exact->add_option("--target", target_names, "target variable(s)")
      ->required()
      ->delimiter(',');
  exact->add_option("--given", given_pairs, "observed name=value (repeat)");
  exact->add_option("--do", do_pairs, "intervened name=value (repeat)");
  exact->add_option("--format", format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  exact->add_option("-o,--output", output, "output path (default stdout)");
  exact->callback([&] {
    Query q;
    q.target = target_names;
    q.evidence = parse_bindings(given_pairs, "--given");
    q.interventions = parse_bindings(do_pairs, "--do");
    DistTable t = interventional_query(load_model(model_path), q);
    emit(format == "json" ? dist_table_json(t) : dist_table_csv(t), output);
  });

  // ate ---------------------------------------------------------------------
  auto* ate = app.add_subcommand("ate", "Exact average treatment effect on a "
                                 "discrete model");
  std::string action, outcome;
  double treated = 1.0, control = 0.0;
  std::vector<std::string> ate_given;
  ate->add_option("model", model_path, "model file")->required();
  ate->add_option("--action", action, "action variable")->required();
  ate->add_option("--outcome", outcome, "outcome variable")->required();
  ate->add_option("--treated", treated, "treated action value (default 1)");
  ate->add_option("--control", control, "control action value (default 0)");
  ate->add_option("--given", ate_given, "condition name=value (repeat)");
  ate->add_option("-o,--output", output, "output path (default stdout)");
  ate->callback([&] {
    double estimate =
        ate_exact(load_model(model_path), action, outcome, treated, control,
                  parse_bindings(ate_given, "--given"));
    nlohmann::json j;
    j["action"] = action;
    j["outcome"] = outcome;
    j["treated"] = treated;
    j["control"] = control;
    j["estimate"] = estimate;
    emit(j.dump(2), output);
  });

  // estimate ------------------------------------------------------------
  auto* estimate = app.add_subcommand("estimate", "Run an estimator on CSV "
                                      "data");
  std::string method;
  std::vector<std::string> covariates;
  std::string outcome_model = "table", propensity_kind = "table";
  std::string propensity_column, instrument, running, pre_column;
  double alpha = 1.0, clip = 0.01, epsilon = -1.0;
  double threshold = 0.0, bandwidth = 0.0, weak_floor = 0.01;
  int degree = 1, folds = 5, per_row_treated = 1, per_row_control = 1;
  std::size_t bootstrap_reps = 0;
  bool impute_instrument = false;
  estimate->add_option("method", method,
                       "naive | regression | ipw | dr | matching | iv | did "
                       "| rdd | dml")
      ->required();
  estimate->add_option("data", data_path, "CSV file")->required();
  estimate->add_option("--action", action, "action column");
  estimate->add_option("--outcome", outcome, "outcome column");
  estimate->add_option("--covariates", covariates, "covariate columns")
      ->delimiter(',');
  estimate->add_option("--outcome-model", outcome_model, "table or linear")
      ->check(CLI::IsMember({"table", "linear"}));
  estimate->add_option("--propensity", propensity_kind,
                       "table, logistic, or column")
      ->check(CLI::IsMember({"table", "logistic", "column"}));
  estimate->add_option("--propensity-column", propensity_column,
                       "column holding known propensities");
  estimate->add_option("--alpha", alpha, "table smoothing (default 1)");
  estimate->add_option("--clip", clip, "propensity clip (default 0.01)");
  estimate->add_option("--epsilon", epsilon,
                       "matching radius; omit for exact cells");
  estimate->add_option("--per-row-treated", per_row_treated,
                       "matching draws per row, treated arm");
  estimate->add_option("--per-row-control", per_row_control,
                       "matching draws per row, control arm");
  estimate->add_option("--instrument", instrument, "instrument column (iv)");
  estimate->add_flag("--impute-instrument", impute_instrument,
                     "fill missing instrument values from the action fit");
  estimate->add_option("--weak-floor", weak_floor,
                       "first-stage R^2 floor (default 0.01)");
  estimate->add_option("--pre", pre_column, "pre-period outcome column (did)");
  estimate->add_option("--running", running, "running variable (rdd)");
  estimate->add_option("--threshold", threshold, "rdd threshold");
  estimate->add_option("--bandwidth", bandwidth, "rdd bandwidth");
  estimate->add_option("--degree", degree, "rdd polynomial degree (1 or 2)");
  estimate->add_option("--folds", folds, "dml fold count (default 5)");
  estimate->add_option("--bootstrap", bootstrap_reps,
                       "bootstrap replicates for the standard error");
  estimate->add_option("--seed", seed_flag, "rng seed");
  estimate->add_option("-o,--output", output, "output path (default stdout)");
  estimate->callback([&] {
    Dataset d = read_csv_file(data_path);
    BootstrapSpec boot;
    boot.reps = bootstrap_reps;
    boot.rng = seed_spec(seed_flag);
    auto need = [&](const std::string& value, const char* flag) {
      if (value.empty()) {
        throw UsageError(std::string("method '") + method + "' requires " +
                         flag);
      }
    };
    OutcomeModelKind om = outcome_model == "linear" ? OutcomeModelKind::Linear
                                                    : OutcomeModelKind::Table;
    PropensityOptions prop;
    prop.kind = propensity_kind == "logistic" ? PropensityModel::Kind::Logistic
                : propensity_kind == "column" ? PropensityModel::Kind::Column
                                              : PropensityModel::Kind::Table;
    prop.alpha = alpha;
    prop.clip = clip;
    prop.column = propensity_column;

    EstimateReport report;
    if (method == "naive") {
      need(action, "--action");
      need(outcome, "--outcome");
      report = estimate_naive(d, action, outcome, boot);
    } else if (method == "regression") {
      need(action, "--action");
      need(outcome, "--outcome");
      report = estimate_regression_adjustment(d, action, outcome, covariates,
                                              om, boot);
    } else if (method == "ipw") {
      need(action, "--action");
      need(outcome, "--outcome");
      report = estimate_ipw(d, action, outcome, covariates, prop, boot);
    } else if (method == "dr") {
      need(action, "--action");
      need(outcome, "--outcome");
      report = estimate_doubly_robust(d, action, outcome, covariates, om,
                                      prop, boot);
    } else if (method == "matching") {
      need(action, "--action");
      need(outcome, "--outcome");
      MatchSpec spec;
      spec.exact = epsilon < 0.0;
      spec.epsilon = epsilon < 0.0 ? 0.0 : epsilon;
      spec.per_row_treated = per_row_treated;
      spec.per_row_control = per_row_control;
      spec.rng = seed_spec(seed_flag);
      report = estimate_matching(d, action, outcome, covariates, spec, boot)
                   .second;
    } else if (method == "iv") {
      need(action, "--action");
      need(outcome, "--outcome");
      need(instrument, "--instrument");
      report = estimate_iv_2sls(d, action, outcome, instrument,
                                impute_instrument, weak_floor, boot);
    } else if (method == "did") {
      need(action, "--action");
      need(outcome, "--outcome");
      need(pre_column, "--pre");
      report = estimate_did(d, action, pre_column, outcome, boot);
    } else if (method == "rdd") {
      need(outcome, "--outcome");
      need(running, "--running");
      if (bandwidth <= 0.0) throw UsageError("rdd requires --bandwidth > 0");
      report = estimate_rdd(d, running, outcome, threshold, bandwidth, degree,
                            boot);
    } else if (method == "dml") {
      need(action, "--action");
      need(outcome, "--outcome");
      report = estimate_dml(d, action, outcome, covariates, folds,
                            seed_spec(seed_flag), boot);
    } else {
      throw UsageError(
          "unknown method '" + method +
          "'; expected one of naive, regression, ipw, dr, matching, iv, did, "
          "rdd, dml");
    }
    emit(report.to_json(), output);
  });

  // trial ---------------------------------------------------------------
  auto* trial = app.add_subcommand("trial", "Simulate an adaptive trial "
                                   "against a model");
  std::uint64_t steps = 0;
  std::string eps_text = "const:0.1", beta_text = "const:1";
  std::string mode_text = "mean";
  double ema_eta = 0.9;
  trial->add_option("model", model_path, "model file")->required();
  trial->add_option("--steps", steps, "trial length")->required();
  trial->add_option("--action", action, "action variable")->required();
  trial->add_option("--outcome", outcome, "outcome variable")->required();
  trial->add_option("--schedule-eps", eps_text,
                    "exploration schedule (step:N, const:V, or "
                    "geom:START,DECAY,FLOOR)");
  trial->add_option("--schedule-beta", beta_text, "temperature schedule");
  trial->add_option("--mode", mode_text, "estimate update: mean or ema")
      ->check(CLI::IsMember({"mean", "ema"}));
  trial->add_option("--ema", ema_eta, "ema retention in [0,1) (default 0.9)");
  trial->add_option("--seed", seed_flag, "rng seed");
  trial->add_option("-o,--output", output, "output path (default stdout)");
  trial->callback([&] {
    TrialEnvironment env;
    env.scm = load_model(model_path);
    env.action = action;
    env.outcome = outcome;
    auto [state, report] = run_trial(
        env, steps, Schedule::parse(eps_text), Schedule::parse(beta_text),
        mode_text == "ema" ? UpdateMode::Ema : UpdateMode::RecursiveMean,
        ema_eta, seed_spec(seed_flag));
    emit(report.to_json(), output);
  });

  // repro ---------------------------------------------------------------
  auto* repro = app.add_subcommand("repro", "Re-run a named built-in "
                                   "experiment");
  std::string experiment_id;
  bool list_ids = false;
  repro->add_option("id", experiment_id, "experiment id");
  repro->add_flag("--list", list_ids, "print the experiment registry");
  repro->callback([&] {
    if (list_ids) {
      for (const auto& id : experiment_ids()) std::cout << id << "\n";
      return;
    }
    if (experiment_id.empty()) {
      throw UsageError("repro needs an experiment id or --list");
    }
    ExperimentResult result = run_experiment(experiment_id);
    std::cout << format_experiment_line(result) << "\n";
    if (!result.pass) throw DomainError("experiment failed");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDomainError;
  }
}
