#include "causalkit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"

namespace causalkit {

namespace {

std::vector<double> column_values(const Dataset& data,
                                  const std::string& name) {
  std::size_t c = data.col(name);
  std::vector<double> out(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) out[r] = data.at(r, c);
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

void require_rows(const Dataset& data) {
  if (data.rows() == 0) throw DegenerateData("dataset has no rows");
}

// The two arm labels, smaller value = control. Throws unless the action
// column takes exactly two distinct values.
std::pair<double, double> two_arms(const std::vector<double>& action) {
  std::set<double> values(action.begin(), action.end());
  if (values.size() != 2) {
    throw DegenerateData("action column must take exactly two values, found " +
                         std::to_string(values.size()));
  }
  return {*values.begin(), *values.rbegin()};
}

void require_binary01(const std::vector<double>& action) {
  auto [lo, hi] = two_arms(action);
  if (lo != 0.0 || hi != 1.0) {
    throw DegenerateData("action column must be binary 0/1 for this method");
  }
}

std::string cell_label(const std::vector<std::string>& names,
                       const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += ", ";
    out += names[i] + "=" + format_double(values[i]);
  }
  return out.empty() ? "(no covariates)" : out;
}

std::vector<double> row_tuple(const Dataset& data,
                              const std::vector<std::size_t>& cols,
                              std::size_t row) {
  std::vector<double> out(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) out[i] = data.at(row, cols[i]);
  return out;
}

// Per-arm outcome predictions ytilde(arm, x_row) for every row.
struct OutcomeModel {
  // predictions[arm index 0=control,1=treated][row]
  std::vector<std::vector<double>> predictions;
};

OutcomeModel fit_outcome_model(const Dataset& data, const std::string& action,
                               const std::string& outcome,
                               const std::vector<std::string>& covariates,
                               OutcomeModelKind kind, double treated,
                               double control) {
  std::size_t ac = data.col(action);
  std::size_t yc = data.col(outcome);
  std::vector<std::size_t> xc;
  for (const auto& name : covariates) xc.push_back(data.col(name));
  OutcomeModel model;
  model.predictions.assign(2, std::vector<double>(data.rows(), 0.0));
  const double arms[2] = {control, treated};

  if (kind == OutcomeModelKind::Table) {
    std::map<std::pair<double, std::vector<double>>, std::pair<double, double>>
        cells;  // (arm, x) -> (sum, count)
    for (std::size_t r = 0; r < data.rows(); ++r) {
      auto key = std::make_pair(data.at(r, ac), row_tuple(data, xc, r));
      auto& cell = cells[key];
      cell.first += data.at(r, yc);
      cell.second += 1.0;
    }
    for (int a = 0; a < 2; ++a) {
      for (std::size_t r = 0; r < data.rows(); ++r) {
        auto it = cells.find(std::make_pair(arms[a], row_tuple(data, xc, r)));
        if (it == cells.end()) {
          throw PositivityError(
              "no rows with " + action + "=" + format_double(arms[a]) +
              " in covariate cell " +
              cell_label(covariates, row_tuple(data, xc, r)));
        }
        model.predictions[a][r] = it->second.first / it->second.second;
      }
    }
    return model;
  }

  for (int a = 0; a < 2; ++a) {
    std::vector<std::size_t> arm_rows;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      if (data.at(r, ac) == arms[a]) arm_rows.push_back(r);
    }
    if (arm_rows.empty()) {
      throw PositivityError("no rows with " + action + "=" +
                            format_double(arms[a]));
    }
    LinearModel fit = fit_least_squares(data.select_rows(arm_rows), covariates,
                                        outcome);
    for (std::size_t r = 0; r < data.rows(); ++r) {
      model.predictions[a][r] = fit.predict(row_tuple(data, xc, r));
    }
  }
  return model;
}

// Row propensities p(action=1 | x_row), already clipped.
std::vector<double> row_propensities(const Dataset& data,
                                     const PropensityModel& model) {
  std::vector<std::size_t> cols;
  for (const auto& name : model.covariates) cols.push_back(data.col(name));
  std::vector<double> out(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    out[r] = model.predict(row_tuple(data, cols, r));
  }
  return out;
}

// Resample `data` rows with replacement, one independent stream per
// replicate so replicate order is immaterial.
Dataset bootstrap_resample(const Dataset& data, const BootstrapSpec& spec,
                           int replicate) {
  StreamRng rng = derive_stream(
      derive_spec(spec.rng, static_cast<std::uint64_t>(replicate), "bootstrap"),
      0, "rows");
  std::vector<std::size_t> indices(data.rows());
  for (auto& i : indices) i = rng.choice(data.rows());
  return data.select_rows(indices);
}

// Runs `point` on `reps` resamples and attaches the spread of the replicate
// estimates as the standard error. Replicates that raise DomainError (a
// resample can lose a covariate cell or an arm) are dropped and counted.
void attach_bootstrap(EstimateReport& report, const Dataset& data,
                      const BootstrapSpec& spec,
                      const std::function<double(const Dataset&)>& point) {
  if (spec.reps <= 0) return;
  std::vector<double> estimates;
  int failures = 0;
  for (int r = 0; r < spec.reps; ++r) {
    Dataset resampled = bootstrap_resample(data, spec, r);
    try {
      estimates.push_back(point(resampled));
    } catch (const DomainError&) {
      ++failures;
    }
  }
  report.diagnostics["bootstrap_reps"] = static_cast<double>(spec.reps);
  if (failures > 0) {
    report.diagnostics["bootstrap_failures"] = static_cast<double>(failures);
    report.warnings.push_back(std::to_string(failures) + " of " +
                              std::to_string(spec.reps) +
                              " bootstrap replicates failed and were dropped");
  }
  if (estimates.size() < 2) {
    report.warnings.push_back(
        "too few successful bootstrap replicates for a standard error");
    report.std_error = 0.0;
    return;
  }
  double m = mean_of(estimates);
  double ss = 0.0;
  for (double e : estimates) ss += (e - m) * (e - m);
  report.std_error =
      std::sqrt(ss / static_cast<double>(estimates.size() - 1));
}

double arm_mean(const std::vector<double>& action,
                const std::vector<double>& outcome, double arm) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t r = 0; r < action.size(); ++r) {
    if (action[r] == arm) {
      sum += outcome[r];
      count += 1.0;
    }
  }
  if (count == 0.0) {
    throw DegenerateData("no rows with action=" + format_double(arm));
  }
  return sum / count;
}

}  // namespace

std::string EstimateReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["estimate"] = estimate;
  if (std_error) {
    j["std_error"] = *std_error;
  } else {
    j["std_error"] = nullptr;
  }
  j["n_used"] = n_used;
  j["diagnostics"] = diagnostics;
  j["warnings"] = warnings;
  return j.dump(2);
}

double LinearModel::predict(const std::vector<double>& x) const {
  if (x.size() != weights.size()) {
    throw std::invalid_argument("predict expects " +
                                std::to_string(weights.size()) +
                                " features, got " + std::to_string(x.size()));
  }
  double out = intercept;
  for (std::size_t i = 0; i < x.size(); ++i) out += weights[i] * x[i];
  return out;
}

LinearModel fit_least_squares(const Dataset& data,
                              const std::vector<std::string>& features,
                              const std::string& target, double ridge) {
  require_rows(data);
  const std::size_t n = data.rows();
  const std::size_t k = features.size();
  Eigen::MatrixXd X(n, k + 1);
  Eigen::VectorXd y(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t c = data.col(features[j]);
    for (std::size_t r = 0; r < n; ++r) X(r, j) = data.at(r, c);
  }
  X.col(k).setOnes();
  std::size_t yc = data.col(target);
  for (std::size_t r = 0; r < n; ++r) y(r) = data.at(r, yc);

  Eigen::VectorXd beta;
  if (ridge > 0.0) {
    Eigen::MatrixXd gram = X.transpose() * X;
    for (std::size_t j = 0; j < k; ++j) gram(j, j) += ridge;
    beta = gram.ldlt().solve(X.transpose() * y);
  } else {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    auto rank = static_cast<std::size_t>(qr.rank());
    if (rank < k + 1) {
      // The permutation lists independent columns first; everything from
      // `rank` on is expressible in terms of them.
      auto perm = qr.colsPermutation().indices();
      std::vector<std::string> bad;
      for (std::size_t i = rank; i < k + 1; ++i) {
        auto col = static_cast<std::size_t>(perm(static_cast<Eigen::Index>(i)));
        bad.push_back(col == k ? "(intercept)" : features[col]);
      }
      std::sort(bad.begin(), bad.end());
      std::string msg = "design matrix is rank deficient; collinear columns:";
      for (const auto& b : bad) msg += " " + b;
      throw RankDeficient(msg);
    }
    beta = qr.solve(y);
  }

  LinearModel model;
  model.features = features;
  model.weights.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) model.weights[j] = beta(j);
  model.intercept = beta(k);
  return model;
}

double PropensityModel::predict(const std::vector<double>& x) const {
  double p = fallback;
  switch (kind) {
    case Kind::Table: {
      auto it = cells.find(x);
      if (it != cells.end()) p = it->second;
      break;
    }
    case Kind::Logistic: {
      if (x.size() != weights.size()) {
        throw std::invalid_argument("propensity expects " +
                                    std::to_string(weights.size()) +
                                    " covariates, got " +
                                    std::to_string(x.size()));
      }
      double z = intercept;
      for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
      p = 1.0 / (1.0 + std::exp(-z));
      break;
    }
    case Kind::Column: {
      if (x.size() != 1) {
        throw std::invalid_argument(
            "column propensity reads exactly one value per row");
      }
      p = x[0];
      break;
    }
  }
  return std::min(std::max(p, clip), 1.0 - clip);
}

PropensityModel fit_propensity(const Dataset& data, const std::string& action,
                               const std::vector<std::string>& covariates,
                               const PropensityOptions& opts) {
  require_rows(data);
  if (opts.clip <= 0.0 || opts.clip >= 0.5) {
    throw std::invalid_argument("propensity clip must lie in (0, 0.5)");
  }
  PropensityModel model;
  model.kind = opts.kind;
  model.clip = opts.clip;

  if (opts.kind == PropensityModel::Kind::Column) {
    if (opts.column.empty()) {
      throw std::invalid_argument("column propensity needs a column name");
    }
    data.col(opts.column);  // fail fast if absent
    model.covariates = {opts.column};
    return model;
  }

  auto a = column_values(data, action);
  require_binary01(a);
  model.covariates = covariates;
  std::vector<std::size_t> xc;
  for (const auto& name : covariates) xc.push_back(data.col(name));

  if (opts.kind == PropensityModel::Kind::Table) {
    if (opts.alpha < 0.0) {
      throw std::invalid_argument("table smoothing alpha must be >= 0");
    }
    std::map<std::vector<double>, std::pair<double, double>> counts;
    double treated_total = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
      auto& cell = counts[row_tuple(data, xc, r)];
      cell.first += a[r];
      cell.second += 1.0;
      treated_total += a[r];
    }
    for (const auto& [key, cell] : counts) {
      model.cells[key] =
          (cell.first + opts.alpha) / (cell.second + 2.0 * opts.alpha);
    }
    model.fallback = (treated_total + opts.alpha) /
                     (static_cast<double>(data.rows()) + 2.0 * opts.alpha);
    return model;
  }

  // Logistic regression by damped iteratively reweighted least squares.
  const std::size_t n = data.rows();
  const std::size_t k = covariates.size();
  Eigen::MatrixXd X(n, k + 1);
  Eigen::VectorXd y(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t r = 0; r < n; ++r) X(r, j) = data.at(r, xc[j]);
  }
  X.col(k).setOnes();
  for (std::size_t r = 0; r < n; ++r) y(r) = a[r];

  auto loglik = [&](const Eigen::VectorXd& w) {
    double ll = 0.0;
    Eigen::VectorXd z = X * w;
    for (std::size_t r = 0; r < n; ++r) {
      // log sigma(z) = -log(1+e^-z), stable on both tails
      double zi = z(r);
      double log1pe = zi > 0 ? zi + std::log1p(std::exp(-zi))
                             : std::log1p(std::exp(zi));
      ll += y(r) * zi - log1pe;
    }
    return ll;
  };

  Eigen::VectorXd w = Eigen::VectorXd::Zero(k + 1);
  double current = loglik(w);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::VectorXd z = X * w;
    Eigen::VectorXd p(n), wt(n);
    for (std::size_t r = 0; r < n; ++r) {
      p(r) = 1.0 / (1.0 + std::exp(-z(r)));
      wt(r) = std::max(p(r) * (1.0 - p(r)), 1e-10);
    }
    Eigen::VectorXd grad = X.transpose() * (y - p);
    if (grad.cwiseAbs().maxCoeff() < 1e-8) {
      converged = true;
      break;
    }
    Eigen::MatrixXd H = X.transpose() * wt.asDiagonal() * X;
    for (std::size_t j = 0; j <= k; ++j) H(j, j) += 1e-10;
    Eigen::VectorXd step = H.ldlt().solve(grad);
    double scale = 1.0;
    for (int halving = 0; halving < 30; ++halving) {
      double candidate = loglik(w + scale * step);
      if (candidate >= current) {
        w += scale * step;
        current = candidate;
        break;
      }
      scale *= 0.5;
    }
  }
  if (!converged) {
    model.warnings.push_back(
        "logistic fit stopped before the gradient tolerance; data may be "
        "separated");
  }
  if (w.cwiseAbs().maxCoeff() > 20.0) {
    model.warnings.push_back(
        "logistic coefficients are very large; propensities will sit at the "
        "clip boundary");
  }
  model.weights.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) model.weights[j] = w(j);
  model.intercept = w(k);
  return model;
}

EstimateReport estimate_naive(const Dataset& data, const std::string& action,
                              const std::string& outcome,
                              const BootstrapSpec& bootstrap) {
  auto point = [&](const Dataset& d) {
    require_rows(d);
    auto a = column_values(d, action);
    auto y = column_values(d, outcome);
    auto [control, treated] = two_arms(a);
    return arm_mean(a, y, treated) - arm_mean(a, y, control);
  };
  EstimateReport report;
  report.method = "naive";
  report.estimate = point(data);
  report.n_used = data.rows();
  auto a = column_values(data, action);
  auto [control, treated] = two_arms(a);
  double nt = static_cast<double>(std::count(a.begin(), a.end(), treated));
  report.diagnostics["n_treated"] = nt;
  report.diagnostics["n_control"] = static_cast<double>(a.size()) - nt;
  attach_bootstrap(report, data, bootstrap, point);
  return report;
}

EstimateReport estimate_regression_adjustment(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, OutcomeModelKind model,
    const BootstrapSpec& bootstrap) {
  auto point = [&](const Dataset& d) {
    require_rows(d);
    auto a = column_values(d, action);
    auto [control, treated] = two_arms(a);
    OutcomeModel fit =
        fit_outcome_model(d, action, outcome, covariates, model, treated,
                          control);
    return mean_of(fit.predictions[1]) - mean_of(fit.predictions[0]);
  };
  EstimateReport report;
  report.method = "regression_adjustment";
  report.estimate = point(data);
  report.n_used = data.rows();
  auto a = column_values(data, action);
  auto [control, treated] = two_arms(a);
  double nt = static_cast<double>(std::count(a.begin(), a.end(), treated));
  report.diagnostics["n_treated"] = nt;
  report.diagnostics["n_control"] = static_cast<double>(a.size()) - nt;
  attach_bootstrap(report, data, bootstrap, point);
  return report;
}

EstimateReport estimate_ipw(const Dataset& data, const std::string& action,
                            const std::string& outcome,
                            const std::vector<std::string>& covariates,
                            const PropensityOptions& propensity,
                            const BootstrapSpec& bootstrap) {
  EstimateReport report;
  report.method = "ipw";
  auto point = [&](const Dataset& d, EstimateReport* rep) {
    require_rows(d);
    auto a = column_values(d, action);
    auto y = column_values(d, outcome);
    require_binary01(a);
    PropensityModel model = fit_propensity(d, action, covariates, propensity);
    auto p1 = row_propensities(d, model);
    double num[2] = {0.0, 0.0};
    double den[2] = {0.0, 0.0};
    std::size_t clipped = 0;
    double min_p = 1.0;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      int arm = a[r] == 1.0 ? 1 : 0;
      double pa = arm == 1 ? p1[r] : 1.0 - p1[r];
      min_p = std::min(min_p, pa);
      if (pa <= model.clip + 1e-12) ++clipped;
      num[arm] += y[r] / pa;
      den[arm] += 1.0 / pa;
    }
    if (den[0] == 0.0 || den[1] == 0.0) {
      throw DegenerateData("one action arm is empty");
    }
    if (rep) {
      rep->diagnostics["min_propensity"] = min_p;
      rep->diagnostics["max_weight"] = 1.0 / min_p;
      double frac = static_cast<double>(clipped) /
                    static_cast<double>(d.rows());
      rep->diagnostics["clipped_fraction"] = frac;
      for (const auto& w : model.warnings) rep->warnings.push_back(w);
      if (frac > 0.05) {
        rep->warnings.push_back(
            "more than 5% of rows have a propensity at the clip boundary; "
            "overlap looks poor");
      }
    }
    return num[1] / den[1] - num[0] / den[0];
  };
  report.estimate = point(data, &report);
  report.n_used = data.rows();
  attach_bootstrap(report, data, bootstrap,
                   [&](const Dataset& d) { return point(d, nullptr); });
  return report;
}

EstimateReport estimate_doubly_robust(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, OutcomeModelKind model,
    const PropensityOptions& propensity, const BootstrapSpec& bootstrap) {
  EstimateReport report;
  report.method = "doubly_robust";
  auto point = [&](const Dataset& d, EstimateReport* rep) {
    require_rows(d);
    auto a = column_values(d, action);
    auto y = column_values(d, outcome);
    require_binary01(a);
    OutcomeModel outcome_fit =
        fit_outcome_model(d, action, outcome, covariates, model, 1.0, 0.0);
    PropensityModel prop = fit_propensity(d, action, covariates, propensity);
    auto p1 = row_propensities(d, prop);
    double total[2] = {0.0, 0.0};
    auto n = static_cast<double>(d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) {
      for (int arm = 0; arm < 2; ++arm) {
        double tilde = outcome_fit.predictions[arm][r];
        double value = tilde;
        if (a[r] == static_cast<double>(arm)) {
          double pa = arm == 1 ? p1[r] : 1.0 - p1[r];
          value += (y[r] - tilde) / pa;
        }
        total[arm] += value;
      }
    }
    if (rep) {
      for (const auto& w : prop.warnings) rep->warnings.push_back(w);
    }
    return total[1] / n - total[0] / n;
  };
  report.estimate = point(data, &report);
  report.n_used = data.rows();
  attach_bootstrap(report, data, bootstrap,
                   [&](const Dataset& d) { return point(d, nullptr); });
  return report;
}

namespace {

// Matched resample of `data`: for every row, draw spec.per_row_treated
// treated neighbors and spec.per_row_control control neighbors from its
// covariate cell, with replacement. Candidate lists are ordered by
// (distance, row index) so the draws are reproducible.
Dataset build_matched(const Dataset& data, const std::string& action,
                      const std::vector<std::string>& covariates,
                      const MatchSpec& spec, std::size_t* reuse_out) {
  std::size_t ac = data.col(action);
  std::vector<std::size_t> xc;
  for (const auto& name : covariates) xc.push_back(data.col(name));
  auto a = column_values(data, action);
  auto [control, treated] = two_arms(a);

  std::vector<std::vector<double>> tuples(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    tuples[r] = row_tuple(data, xc, r);
  }

  // Exact mode indexes each covariate cell once; rows stay in row order,
  // which is the (distance, row index) order at distance zero.
  std::map<std::pair<double, std::vector<double>>, std::vector<std::size_t>>
      cells;
  if (spec.exact) {
    for (std::size_t r = 0; r < data.rows(); ++r) {
      cells[{data.at(r, ac), tuples[r]}].push_back(r);
    }
  }

  // Epsilon mode ranks by (distance, row index) so ties and draw order are
  // reproducible. Exact mode hands back the prebuilt cell without copying.
  std::vector<std::size_t> ranked_rows;
  auto candidates_for = [&](std::size_t row,
                            double arm) -> const std::vector<std::size_t>* {
    if (spec.exact) {
      auto it = cells.find({arm, tuples[row]});
      return it == cells.end() ? nullptr : &it->second;
    }
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t j = 0; j < data.rows(); ++j) {
      if (data.at(j, ac) != arm) continue;
      double d2 = 0.0;
      for (std::size_t i = 0; i < xc.size(); ++i) {
        double diff = tuples[j][i] - tuples[row][i];
        d2 += diff * diff;
      }
      double dist = std::sqrt(d2);
      if (dist <= spec.epsilon) ranked.emplace_back(dist, j);
    }
    std::sort(ranked.begin(), ranked.end());
    ranked_rows.clear();
    for (const auto& [dist, j] : ranked) ranked_rows.push_back(j);
    return ranked_rows.empty() ? nullptr : &ranked_rows;
  };

  Dataset out;
  out.columns = data.columns;
  out.provenance = data.provenance;
  out.provenance.push_back("matched from " + std::to_string(data.rows()) +
                           " rows");
  std::set<std::string> unmatched;
  std::map<std::size_t, int> draw_counts;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    struct Need {
      double arm;
      int count;
      const char* stream;
    };
    Need needs[2] = {{treated, spec.per_row_treated, "match-treated"},
                     {control, spec.per_row_control, "match-control"}};
    for (const auto& need : needs) {
      if (need.count <= 0) continue;
      const std::vector<std::size_t>* pool = candidates_for(r, need.arm);
      if (!pool) {
        unmatched.insert(action + "=" + format_double(need.arm) + " near " +
                         cell_label(covariates, tuples[r]));
        continue;
      }
      StreamRng rng = derive_stream(spec.rng, r, need.stream);
      for (int d = 0; d < need.count; ++d) {
        std::size_t pick = (*pool)[rng.choice(pool->size())];
        ++draw_counts[pick];
        std::vector<double> row(data.cols());
        for (std::size_t c = 0; c < data.cols(); ++c) row[c] = data.at(pick, c);
        out.append_row(row);
      }
    }
  }
  if (!unmatched.empty()) {
    std::string msg = "no match candidates for:";
    for (const auto& u : unmatched) msg += " [" + u + "]";
    throw UnmatchedCell(msg);
  }
  std::size_t reuse = 0;
  for (const auto& [row, count] : draw_counts) {
    if (count > 1) reuse += static_cast<std::size_t>(count - 1);
  }
  if (reuse_out) *reuse_out = reuse;
  return out;
}

}  // namespace

std::pair<Dataset, EstimateReport> estimate_matching(
    const Dataset& data, const std::string& action, const std::string& outcome,
    const std::vector<std::string>& covariates, const MatchSpec& spec,
    const BootstrapSpec& bootstrap) {
  require_rows(data);
  if (!spec.exact && spec.epsilon < 0.0) {
    throw std::invalid_argument("matching epsilon must be >= 0");
  }
  if (spec.per_row_treated < 0 || spec.per_row_control < 0 ||
      spec.per_row_treated + spec.per_row_control == 0) {
    throw std::invalid_argument("matching needs a positive draw count");
  }
  std::size_t reuse = 0;
  Dataset matched = build_matched(data, action, covariates, spec, &reuse);

  EstimateReport report;
  report.method = "matching";
  auto a = column_values(matched, action);
  auto y = column_values(matched, outcome);
  auto [control, treated] = two_arms(a);
  report.estimate = arm_mean(a, y, treated) - arm_mean(a, y, control);
  report.n_used = matched.rows();
  report.diagnostics["n_matched"] = static_cast<double>(matched.rows());
  report.diagnostics["reused_draws"] = static_cast<double>(reuse);
  if (reuse > 0) {
    report.warnings.push_back(
        "matching drew with replacement; " + std::to_string(reuse) +
        " draws repeated a row");
  }
  attach_bootstrap(report, data, bootstrap, [&](const Dataset& d) {
    Dataset m = build_matched(d, action, covariates, spec, nullptr);
    auto ab = column_values(m, action);
    auto yb = column_values(m, outcome);
    auto [c2, t2] = two_arms(ab);
    return arm_mean(ab, yb, t2) - arm_mean(ab, yb, c2);
  });
  return {std::move(matched), report};
}

namespace {

struct SimpleFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

SimpleFit univariate_ls(const std::vector<double>& x,
                        const std::vector<double>& y) {
  auto n = static_cast<double>(x.size());
  double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) {
    throw DegenerateData("regressor is constant");
  }
  SimpleFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy == 0.0 ? 1.0 : (fit.slope * sxy) / syy;
  (void)n;
  return fit;
}

}  // namespace

EstimateReport estimate_iv_2sls(const Dataset& data, const std::string& action,
                                const std::string& outcome,
                                const std::string& instrument,
                                bool impute_missing, double weak_r2_floor,
                                const BootstrapSpec& bootstrap) {
  EstimateReport report;
  report.method = "iv_2sls";
  auto point = [&](const Dataset& d, EstimateReport* rep) {
    require_rows(d);
    auto a = column_values(d, action);
    auto y = column_values(d, outcome);
    auto z = column_values(d, instrument);

    std::size_t missing = 0;
    for (double v : z) missing += std::isnan(v) ? 1 : 0;
    if (missing > 0 && impute_missing) {
      std::vector<double> za, zz;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isnan(z[i])) {
          za.push_back(a[i]);
          zz.push_back(z[i]);
        }
      }
      if (zz.size() < 2) {
        throw DegenerateData("not enough complete rows to impute instrument");
      }
      SimpleFit imputer = univariate_ls(za, zz);
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (std::isnan(z[i])) z[i] = imputer.intercept + imputer.slope * a[i];
      }
      if (rep) {
        rep->diagnostics["n_imputed"] = static_cast<double>(missing);
      }
    } else if (missing > 0) {
      std::vector<double> a2, y2, z2;
      for (std::size_t i = 0; i < z.size(); ++i) {
        if (!std::isnan(z[i])) {
          a2.push_back(a[i]);
          y2.push_back(y[i]);
          z2.push_back(z[i]);
        }
      }
      a = std::move(a2);
      y = std::move(y2);
      z = std::move(z2);
      if (rep) {
        rep->diagnostics["n_dropped"] = static_cast<double>(missing);
        rep->warnings.push_back(std::to_string(missing) +
                                " rows with a missing instrument were "
                                "dropped");
      }
    }
    if (a.size() < 3) throw DegenerateData("too few rows for 2SLS");

    SimpleFit stage1 = univariate_ls(z, a);
    if (stage1.r2 < weak_r2_floor) {
      throw DegenerateData("weak instrument: first-stage R^2 " +
                           format_double(stage1.r2) + " is below " +
                           format_double(weak_r2_floor));
    }
    std::vector<double> ahat(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ahat[i] = stage1.intercept + stage1.slope * z[i];
    }
    SimpleFit stage2 = univariate_ls(ahat, y);
    if (rep) {
      rep->diagnostics["first_stage_r2"] = stage1.r2;
      rep->diagnostics["first_stage_slope"] = stage1.slope;
      rep->n_used = a.size();
    }
    return stage2.slope;
  };
  report.estimate = point(data, &report);
  if (report.n_used == 0) report.n_used = data.rows();
  attach_bootstrap(report, data, bootstrap,
                   [&](const Dataset& d) { return point(d, nullptr); });
  return report;
}

EstimateReport estimate_did(const Dataset& data, const std::string& action,
                            const std::string& pre_outcome,
                            const std::string& post_outcome,
                            const BootstrapSpec& bootstrap) {
  auto point = [&](const Dataset& d) {
    require_rows(d);
    auto a = column_values(d, action);
    auto pre = column_values(d, pre_outcome);
    auto post = column_values(d, post_outcome);
    auto [control, treated] = two_arms(a);
    std::vector<double> delta(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) delta[i] = post[i] - pre[i];
    return arm_mean(a, delta, treated) - arm_mean(a, delta, control);
  };
  EstimateReport report;
  report.method = "did";
  report.estimate = point(data);
  report.n_used = data.rows();
  auto a = column_values(data, action);
  auto pre = column_values(data, pre_outcome);
  auto post = column_values(data, post_outcome);
  auto [control, treated] = two_arms(a);
  report.diagnostics["pre_gap"] =
      arm_mean(a, pre, treated) - arm_mean(a, pre, control);
  report.diagnostics["post_gap"] =
      arm_mean(a, post, treated) - arm_mean(a, post, control);
  attach_bootstrap(report, data, bootstrap, point);
  return report;
}

EstimateReport estimate_rdd(const Dataset& data, const std::string& running,
                            const std::string& outcome, double threshold,
                            double bandwidth, int degree,
                            const BootstrapSpec& bootstrap) {
  if (degree != 1 && degree != 2) {
    throw std::invalid_argument("rdd degree must be 1 or 2");
  }
  if (!(bandwidth > 0.0)) {
    throw std::invalid_argument("rdd bandwidth must be positive");
  }
  auto point = [&](const Dataset& d, EstimateReport* rep) {
    require_rows(d);
    auto x = column_values(d, running);
    auto y = column_values(d, outcome);
    // Boundary value of a per-side polynomial in (x - threshold); the side
    // at threshold and above counts as treated.
    auto side_value = [&](bool right) {
      Dataset side;
      side.columns = degree == 2 ? std::vector<std::string>{"u", "u2", "y"}
                                 : std::vector<std::string>{"u", "y"};
      for (std::size_t i = 0; i < x.size(); ++i) {
        double u = x[i] - threshold;
        if (std::abs(u) > bandwidth) continue;
        if (right != (u >= 0.0)) continue;
        if (degree == 2) {
          side.append_row({u, u * u, y[i]});
        } else {
          side.append_row({u, y[i]});
        }
      }
      if (side.rows() < static_cast<std::size_t>(degree + 2)) {
        throw DegenerateData(std::string(right ? "right" : "left") +
                             " side of the threshold has " +
                             std::to_string(side.rows()) +
                             " points; need at least " +
                             std::to_string(degree + 2));
      }
      std::vector<std::string> feats(side.columns.begin(),
                                     side.columns.end() - 1);
      LinearModel fit = fit_least_squares(side, feats, "y");
      if (rep) {
        rep->diagnostics[right ? "n_right" : "n_left"] =
            static_cast<double>(side.rows());
        rep->diagnostics[right ? "right_value" : "left_value"] = fit.intercept;
      }
      return fit.intercept;
    };
    double left = side_value(false);
    double right = side_value(true);
    return right - left;
  };
  EstimateReport report;
  report.method = "rdd";
  report.estimate = point(data, &report);
  report.n_used = static_cast<std::size_t>(
      report.diagnostics["n_left"] + report.diagnostics["n_right"]);
  attach_bootstrap(report, data, bootstrap,
                   [&](const Dataset& d) { return point(d, nullptr); });
  return report;
}

EstimateReport estimate_dml(const Dataset& data, const std::string& action,
                            const std::string& outcome,
                            const std::vector<std::string>& covariates, int k,
                            const RngSpec& fold_rng,
                            const BootstrapSpec& bootstrap) {
  if (k < 2) throw std::invalid_argument("dml needs at least 2 folds");
  auto point = [&](const Dataset& d, EstimateReport* rep) {
    require_rows(d);
    const std::size_t n = d.rows();
    if (static_cast<std::size_t>(k) * 10 > n) {
      throw std::invalid_argument(
          "dml fold count must not exceed one tenth of the rows");
    }
    // Random fold assignment: Fisher-Yates shuffle, then deal round-robin.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    StreamRng shuffle = derive_stream(fold_rng, 0, "dml-folds");
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = shuffle.choice(i);
      std::swap(order[i - 1], order[j]);
    }
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[order[i]] = static_cast<int>(i % k);

    std::vector<std::size_t> xc;
    for (const auto& name : covariates) xc.push_back(d.col(name));
    auto a = column_values(d, action);
    auto y = column_values(d, outcome);

    double num = 0.0, den = 0.0, ss_ra = 0.0, ss_ry = 0.0;
    for (int f = 0; f < k; ++f) {
      std::vector<std::size_t> train, test;
      for (std::size_t i = 0; i < n; ++i) {
        (fold[i] == f ? test : train).push_back(i);
      }
      Dataset train_data = d.select_rows(train);
      LinearModel mhat = fit_least_squares(train_data, covariates, action);
      LinearModel ghat = fit_least_squares(train_data, covariates, outcome);
      for (std::size_t i : test) {
        auto x = row_tuple(d, xc, i);
        double ra = a[i] - mhat.predict(x);
        double ry = y[i] - ghat.predict(x);
        num += ra * ry;
        den += ra * ra;
        ss_ra += ra * ra;
        ss_ry += ry * ry;
      }
    }
    if (den <= 1e-12) {
      throw DegenerateData(
          "residualized action has no variance; the covariates determine the "
          "action");
    }
    if (rep) {
      rep->diagnostics["folds"] = static_cast<double>(k);
      rep->diagnostics["resid_var_action"] = ss_ra / static_cast<double>(n);
      rep->diagnostics["resid_var_outcome"] = ss_ry / static_cast<double>(n);
    }
    return num / den;
  };
  EstimateReport report;
  report.method = "dml";
  report.estimate = point(data, &report);
  report.n_used = data.rows();
  attach_bootstrap(report, data, bootstrap,
                   [&](const Dataset& d) { return point(d, nullptr); });
  return report;
}

}  // namespace causalkit
