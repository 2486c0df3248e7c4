#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "causalkit/dataset.hpp"
#include "causalkit/rng.hpp"

namespace causalkit {

// Common result shape for every effect estimator. std_error is present
// exactly when the caller asked for bootstrap replicates.
struct EstimateReport {
  std::string method;
  double estimate = 0.0;
  std::optional<double> std_error;
  std::size_t n_used = 0;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
  std::string to_json() const;
};

// Nonparametric bootstrap: `reps` row-resamples, each with a seed derived
// from (rng, replicate index), so replicates could run in any order or in
// parallel and still reproduce the sequential result bit for bit.
struct BootstrapSpec {
  int reps = 0;
  RngSpec rng;
};

struct LinearModel {
  std::vector<std::string> features;
  std::vector<double> weights;
  double intercept = 0.0;
  double predict(const std::vector<double>& x) const;
};

// Ordinary least squares with an intercept, optional ridge penalty on the
// non-intercept coordinates. With ridge == 0 a rank-deficient design raises
// RankDeficient naming the collinear columns.
LinearModel fit_least_squares(const Dataset& data,
                              const std::vector<std::string>& features,
                              const std::string& target, double ridge = 0.0);

// p(action=1 | covariates) for binary actions.
struct PropensityModel {
  enum class Kind { Table, Logistic, Column };
  Kind kind = Kind::Table;
  double clip = 0.01;  // outputs live in [clip, 1-clip]
  // Table: smoothed per-cell frequencies.
  std::map<std::vector<double>, double> cells;
  double fallback = 0.5;  // unseen cell
  // Logistic: sigmoid(w.x + b).
  std::vector<double> weights;
  double intercept = 0.0;
  std::vector<std::string> covariates;
  std::vector<std::string> warnings;  // e.g. separation diagnostics

  double predict(const std::vector<double>& x) const;
};

struct PropensityOptions {
  PropensityModel::Kind kind = PropensityModel::Kind::Table;
  double alpha = 1.0;   // table smoothing
  double clip = 0.01;
  std::string column;   // Kind::Column: read p(1|x) straight from this column
};

// Fits on `data`; covariate cells for the table kind are exact value tuples.
// Logistic fitting is damped IRLS, at most 100 iterations, gradient tolerance
// 1e-8; separated data still returns finite coefficients plus a warning.
PropensityModel fit_propensity(const Dataset& data, const std::string& action,
                               const std::vector<std::string>& covariates,
                               const PropensityOptions& opts);

enum class OutcomeModelKind { Table, Linear };

// Difference of arm means, no adjustment.
EstimateReport estimate_naive(const Dataset& data, const std::string& action,
                              const std::string& outcome,
                              const BootstrapSpec& bootstrap = {});

// Per-arm outcome model averaged over the empirical covariate distribution.
EstimateReport estimate_regression_adjustment(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, OutcomeModelKind model,
    const BootstrapSpec& bootstrap = {});

// Self-normalized inverse-propensity weighting:
//   yhat(a) = sum_{n: a_n=a} y_n / p(a|x_n)  /  sum_{n: a_n=a} 1 / p(a|x_n).
// Binary actions. Warns when more than 5% of weights sit at the clip floor.
EstimateReport estimate_ipw(const Dataset& data, const std::string& action,
                            const std::string& outcome,
                            const std::vector<std::string>& covariates,
                            const PropensityOptions& propensity,
                            const BootstrapSpec& bootstrap = {});

// Outcome model plus inverse-propensity correction, averaged over all rows:
//   yhat(a) = (1/N) sum_n [ ytilde(a,x_n) + 1{a_n=a}(y_n - ytilde)/p(a|x_n) ].
// Consistent when either component model is right.
EstimateReport estimate_doubly_robust(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, OutcomeModelKind model,
    const PropensityOptions& propensity, const BootstrapSpec& bootstrap = {});

struct MatchSpec {
  bool exact = true;     // false: neighbors within `epsilon` (euclidean)
  double epsilon = 0.0;
  int per_row_treated = 1;  // rows drawn per original row, per arm
  int per_row_control = 1;
  RngSpec rng;           // drives the with-replacement draws
};

// Rebalances so every covariate cell holds the target arm ratio, then takes
// the difference of simple arm means. Returns the rebalanced data alongside
// the report. A cell with no candidate rows for some arm raises
// UnmatchedCell listing the cells; drawing the same row twice emits a
// with-replacement warning.
std::pair<Dataset, EstimateReport> estimate_matching(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, const MatchSpec& spec,
    const BootstrapSpec& bootstrap = {});

// Two-stage least squares. Stage one regresses action on instrument, stage
// two the outcome on the fitted action; both stages carry intercepts.
// Reports first-stage R^2 and slope; R^2 below `weak_r2_floor` raises
// DegenerateData (weak instrument). With `impute_missing`, rows whose
// instrument is NaN get it filled by a regression of instrument on action
// fitted to the complete rows.
EstimateReport estimate_iv_2sls(const Dataset& data, const std::string& action,
                                const std::string& outcome,
                                const std::string& instrument,
                                bool impute_missing = false,
                                double weak_r2_floor = 0.01,
                                const BootstrapSpec& bootstrap = {});

// mean(post - pre | a=1) - mean(post - pre | a=0).
EstimateReport estimate_did(const Dataset& data, const std::string& action,
                            const std::string& pre_outcome,
                            const std::string& post_outcome,
                            const BootstrapSpec& bootstrap = {});

// Local polynomial (degree 1 or 2) fit per side within `bandwidth` of the
// threshold; estimate is the jump between the two boundary values. A side
// with fewer than degree+2 points raises DegenerateData.
EstimateReport estimate_rdd(const Dataset& data, const std::string& running,
                            const std::string& outcome, double threshold,
                            double bandwidth, int degree,
                            const BootstrapSpec& bootstrap = {});

// Double/debiased ML with K-fold cross-fitting: out-of-fold residuals of
// action and outcome on covariates (linear nuisance fits), then the
// residual-on-residual slope. K must not exceed n/10. A residualized action
// with (numerically) zero variance raises DegenerateData.
EstimateReport estimate_dml(const Dataset& data, const std::string& action,
                            const std::string& outcome,
                            const std::vector<std::string>& covariates, int k,
                            const RngSpec& fold_rng,
                            const BootstrapSpec& bootstrap = {});

}  // namespace causalkit
