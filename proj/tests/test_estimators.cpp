#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "causalkit/dataset.hpp"
#include "causalkit/errors.hpp"
#include "causalkit/estimators.hpp"
#include "causalkit/rng.hpp"

using namespace causalkit;

namespace {

Dataset make_dataset(std::vector<std::string> columns) {
  Dataset d;
  d.columns = std::move(columns);
  return d;
}

void repeat_row(Dataset& d, const std::vector<double>& row, int times) {
  for (int i = 0; i < times; ++i) d.append_row(row);
}

// 100 rows distributed exactly like the confounded binary toy joint:
// p(x)=1/2, p(a=1|x) = 0.2/0.8, p(y=1|a,x) per the cpt. Columns include the
// true propensity p(a=1|x) so weighting estimators can be checked exactly.
Dataset vaccine_hundred() {
  Dataset d = make_dataset({"x", "a", "y", "p", "phalf"});
  repeat_row(d, {0, 0, 0, 0.2, 0.5}, 36);
  repeat_row(d, {0, 0, 1, 0.2, 0.5}, 4);
  repeat_row(d, {0, 1, 0, 0.2, 0.5}, 6);
  repeat_row(d, {0, 1, 1, 0.2, 0.5}, 4);
  repeat_row(d, {1, 0, 0, 0.8, 0.5}, 4);
  repeat_row(d, {1, 0, 1, 0.8, 0.5}, 6);
  repeat_row(d, {1, 1, 0, 0.8, 0.5}, 4);
  repeat_row(d, {1, 1, 1, 0.8, 0.5}, 36);
  return d;
}

// A three-level covariate with V-shaped treated outcomes, so a linear outcome
// model is genuinely misspecified. Cell counts realize the propensities
// exactly: p(a=1|x) = 0.2, 0.5, 0.8 for x = 0, 1, 2, and within-cell outcome
// rates are exact too, which makes the correctly weighted estimators land on
// the truth with no sampling error: ATE = (0.9+0.1+0.9)/3 - (0.1+0.5+0.3)/3
// = 1/3.
Dataset vshape_300() {
  Dataset d = make_dataset({"x", "a", "y", "p", "phalf"});
  repeat_row(d, {0, 1, 1, 0.2, 0.5}, 18);
  repeat_row(d, {0, 1, 0, 0.2, 0.5}, 2);
  repeat_row(d, {0, 0, 1, 0.2, 0.5}, 8);
  repeat_row(d, {0, 0, 0, 0.2, 0.5}, 72);
  repeat_row(d, {1, 1, 1, 0.5, 0.5}, 5);
  repeat_row(d, {1, 1, 0, 0.5, 0.5}, 45);
  repeat_row(d, {1, 0, 1, 0.5, 0.5}, 25);
  repeat_row(d, {1, 0, 0, 0.5, 0.5}, 25);
  repeat_row(d, {2, 1, 1, 0.8, 0.5}, 72);
  repeat_row(d, {2, 1, 0, 0.8, 0.5}, 8);
  repeat_row(d, {2, 0, 1, 0.8, 0.5}, 6);
  repeat_row(d, {2, 0, 0, 0.8, 0.5}, 14);
  return d;
}

constexpr double kThird = 1.0 / 3.0;

PropensityOptions column_options(const std::string& name) {
  PropensityOptions opts;
  opts.kind = PropensityModel::Kind::Column;
  opts.column = name;
  return opts;
}

}  // namespace

TEST_CASE("least squares recovers exact coefficients") {
  Dataset d = make_dataset({"x", "z", "y"});
  for (double x : {0.0, 1.0, 2.0, 3.0}) {
    for (double z : {0.0, 1.0, -1.0}) {
      d.append_row({x, z, 2.0 * x + 3.0 * z - 1.0});
    }
  }
  LinearModel m = fit_least_squares(d, {"x", "z"}, "y");
  REQUIRE(m.weights.size() == 2);
  CHECK(m.weights[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(m.weights[1] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(m.intercept == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(m.predict({2.0, -1.0}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_AS(m.predict({1.0}), std::invalid_argument);
}

TEST_CASE("collinear designs are refused unless ridged") {
  Dataset d = make_dataset({"x", "z", "y"});
  for (double x : {0.0, 1.0, 2.0, 3.0}) d.append_row({x, x, 2.0 * x});
  CHECK_THROWS_WITH_AS(fit_least_squares(d, {"x", "z"}, "y"),
                       doctest::Contains("rank deficient"), RankDeficient);
  LinearModel ridged = fit_least_squares(d, {"x", "z"}, "y", 1e-6);
  CHECK(ridged.weights[0] + ridged.weights[1] ==
        doctest::Approx(2.0).epsilon(1e-3));
  CHECK_THROWS_AS(fit_least_squares(make_dataset({"x", "y"}), {"x"}, "y"),
                  DegenerateData);
}

TEST_CASE("table propensities smooth counts and fall back when unseen") {
  Dataset d = make_dataset({"x", "a"});
  repeat_row(d, {0, 1}, 2);
  repeat_row(d, {0, 0}, 3);
  repeat_row(d, {1, 1}, 3);
  repeat_row(d, {1, 0}, 1);
  PropensityOptions opts;
  opts.kind = PropensityModel::Kind::Table;
  opts.alpha = 1.0;
  PropensityModel m = fit_propensity(d, "a", {"x"}, opts);
  CHECK(m.predict({0.0}) == doctest::Approx(3.0 / 7.0).epsilon(1e-12));
  CHECK(m.predict({1.0}) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK(m.predict({9.0}) == doctest::Approx(6.0 / 11.0).epsilon(1e-12));

  opts.clip = 0.4;
  PropensityModel clipped = fit_propensity(d, "a", {"x"}, opts);
  CHECK(clipped.predict({1.0}) == doctest::Approx(0.6).epsilon(1e-12));

  opts.clip = 0.0;
  CHECK_THROWS_AS(fit_propensity(d, "a", {"x"}, opts), std::invalid_argument);
  opts.clip = 0.5;
  CHECK_THROWS_AS(fit_propensity(d, "a", {"x"}, opts), std::invalid_argument);
  opts.clip = 0.01;
  opts.alpha = -1.0;
  CHECK_THROWS_AS(fit_propensity(d, "a", {"x"}, opts), std::invalid_argument);
}

TEST_CASE("logistic propensities converge on well-behaved data") {
  Dataset d = make_dataset({"x", "a"});
  StreamRng rng = derive_stream(RngSpec{33, kRngAlgorithmId}, 0, "logistic");
  for (int i = 0; i < 20000; ++i) {
    double x = rng.normal();
    double p = 1.0 / (1.0 + std::exp(-(1.5 * x - 0.5)));
    d.append_row({x, rng.bernoulli(p) ? 1.0 : 0.0});
  }
  PropensityOptions opts;
  opts.kind = PropensityModel::Kind::Logistic;
  PropensityModel m = fit_propensity(d, "a", {"x"}, opts);
  CHECK(m.warnings.empty());
  CHECK(m.weights[0] == doctest::Approx(1.5).epsilon(0.07));
  CHECK(m.intercept == doctest::Approx(-0.5).epsilon(0.07));
}

TEST_CASE("separated logistic data warns instead of diverging") {
  Dataset d = make_dataset({"x", "a"});
  for (double x : {-1.5, -1.0, -0.5}) d.append_row({x, 0.0});
  for (double x : {0.5, 1.0, 1.5}) d.append_row({x, 1.0});
  PropensityOptions opts;
  opts.kind = PropensityModel::Kind::Logistic;
  PropensityModel m = fit_propensity(d, "a", {"x"}, opts);
  CHECK_FALSE(m.warnings.empty());
  CHECK(std::isfinite(m.weights[0]));
  double p = m.predict({3.0});
  CHECK(p <= 1.0 - m.clip);
  CHECK(p >= m.clip);
}

TEST_CASE("column propensities validate their column") {
  Dataset d = vaccine_hundred();
  CHECK_THROWS_AS(fit_propensity(d, "a", {}, column_options("")),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_propensity(d, "a", {}, column_options("zzz")),
                  std::out_of_range);
  PropensityModel m = fit_propensity(d, "a", {}, column_options("p"));
  CHECK(m.predict({0.8}) == 0.8);
  CHECK(m.predict({0.001}) == 0.01);  // clipped
  CHECK_THROWS_AS(m.predict({0.8, 0.2}), std::invalid_argument);
}

TEST_CASE("naive difference of means, exactly") {
  Dataset d = vaccine_hundred();
  EstimateReport r = estimate_naive(d, "a", "y");
  CHECK(r.method == "naive");
  CHECK(r.estimate == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.n_used == 100);
  CHECK(r.diagnostics.at("n_treated") == 50.0);
  CHECK(r.diagnostics.at("n_control") == 50.0);
  CHECK_FALSE(r.std_error.has_value());

  Dataset one_arm = make_dataset({"a", "y"});
  repeat_row(one_arm, {1, 2}, 5);
  CHECK_THROWS_AS(estimate_naive(one_arm, "a", "y"), DegenerateData);
  CHECK_THROWS_AS(estimate_naive(make_dataset({"a", "y"}), "a", "y"),
                  DegenerateData);
}

TEST_CASE("regression adjustment removes confounding exactly on tables") {
  Dataset d = vaccine_hundred();
  EstimateReport r = estimate_regression_adjustment(
      d, "a", "y", {"x"}, OutcomeModelKind::Table);
  CHECK(r.estimate == doctest::Approx(0.30).epsilon(1e-12));

  // A cell where one arm is absent cannot be adjusted for.
  Dataset holes = make_dataset({"x", "a", "y"});
  repeat_row(holes, {0, 1, 1}, 3);
  repeat_row(holes, {0, 0, 0}, 3);
  repeat_row(holes, {1, 0, 1}, 3);  // no treated rows with x=1
  CHECK_THROWS_AS(estimate_regression_adjustment(holes, "a", "y", {"x"},
                                                 OutcomeModelKind::Table),
                  PositivityError);
}

TEST_CASE("true-propensity weighting is exact on realized proportions") {
  Dataset d = vaccine_hundred();
  EstimateReport ipw = estimate_ipw(d, "a", "y", {}, column_options("p"));
  CHECK(ipw.estimate == doctest::Approx(0.30).epsilon(1e-12));
  CHECK(ipw.diagnostics.at("min_propensity") == doctest::Approx(0.2));
  CHECK(ipw.diagnostics.at("clipped_fraction") == 0.0);
  CHECK(ipw.warnings.empty());

  Dataset v = vshape_300();
  EstimateReport ipw3 = estimate_ipw(v, "a", "y", {}, column_options("p"));
  CHECK(ipw3.estimate == doctest::Approx(kThird).epsilon(1e-12));

  // Non-binary actions are refused.
  Dataset multi = make_dataset({"a", "y", "p"});
  repeat_row(multi, {1, 0, 0.5}, 3);
  repeat_row(multi, {2, 1, 0.5}, 3);
  CHECK_THROWS_AS(estimate_ipw(multi, "a", "y", {}, column_options("p")),
                  DegenerateData);
}

TEST_CASE("weights at the clip floor trigger the overlap warning") {
  Dataset d = make_dataset({"a", "y", "p"});
  repeat_row(d, {1, 1, 0.001}, 10);  // clipped up to 0.01
  repeat_row(d, {1, 1, 0.5}, 40);
  repeat_row(d, {0, 0, 0.5}, 50);
  EstimateReport r = estimate_ipw(d, "a", "y", {}, column_options("p"));
  CHECK(r.diagnostics.at("clipped_fraction") == doctest::Approx(0.1));
  CHECK(r.diagnostics.at("max_weight") == doctest::Approx(100.0));
  REQUIRE_FALSE(r.warnings.empty());
  CHECK(r.warnings[0].find("overlap") != std::string::npos);
}

TEST_CASE("ipw equals naive when the propensity is flat") {
  Dataset d = vaccine_hundred();
  PropensityOptions table;
  table.kind = PropensityModel::Kind::Table;
  EstimateReport ipw = estimate_ipw(d, "a", "y", {}, table);
  EstimateReport naive = estimate_naive(d, "a", "y");
  CHECK(std::abs(ipw.estimate - naive.estimate) <= 1e-12);
}

TEST_CASE("doubly robust is right when either component is right") {
  Dataset v = vshape_300();

  // Correct outcome table, useless propensity: the within-cell residuals
  // cancel and the table answer stands.
  EstimateReport good_outcome = estimate_doubly_robust(
      v, "a", "y", {"x"}, OutcomeModelKind::Table, column_options("phalf"));
  CHECK(good_outcome.estimate == doctest::Approx(kThird).epsilon(1e-9));

  // Misspecified linear outcome, true propensity: the weighting correction
  // absorbs the model error because realized arm shares match p exactly.
  EstimateReport good_weights = estimate_doubly_robust(
      v, "a", "y", {"x"}, OutcomeModelKind::Linear, column_options("p"));
  CHECK(good_weights.estimate == doctest::Approx(kThird).epsilon(1e-9));

  // Both right, still right.
  EstimateReport both = estimate_doubly_robust(
      v, "a", "y", {"x"}, OutcomeModelKind::Table, column_options("p"));
  CHECK(both.estimate == doctest::Approx(kThird).epsilon(1e-9));

  // The misspecified outcome model alone is visibly off.
  EstimateReport linear_only = estimate_regression_adjustment(
      v, "a", "y", {"x"}, OutcomeModelKind::Linear);
  CHECK(std::abs(linear_only.estimate - kThird) > 0.02);
}

TEST_CASE("exact matching rebalances cells deterministically") {
  // Outcomes are constant within each (cell, arm), so the estimate does not
  // depend on which candidate the stream picks: 30 cells at +1, 70 at -1.
  Dataset d = make_dataset({"x", "a", "y"});
  repeat_row(d, {0, 1, 1}, 10);
  repeat_row(d, {0, 0, 0}, 20);
  repeat_row(d, {1, 1, 0}, 35);
  repeat_row(d, {1, 0, 1}, 35);

  MatchSpec spec;
  spec.exact = true;
  spec.rng = RngSpec{77, kRngAlgorithmId};
  auto [matched, report] = estimate_matching(d, "a", "y", {"x"}, spec);
  CHECK(report.estimate == doctest::Approx(-0.4).epsilon(1e-12));
  CHECK(matched.rows() == 200);
  CHECK(report.n_used == 200);
  CHECK(report.diagnostics.at("n_matched") == 200.0);
  CHECK(report.diagnostics.at("reused_draws") > 0.0);
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(report.warnings[0].find("replacement") != std::string::npos);

  auto [matched2, report2] = estimate_matching(d, "a", "y", {"x"}, spec);
  CHECK(matched.values == matched2.values);
  CHECK(report2.estimate == report.estimate);
}

TEST_CASE("treated draws ignore the control draw count") {
  Dataset d = make_dataset({"x", "a", "y"});
  for (int i = 0; i < 12; ++i) {
    d.append_row({static_cast<double>(i % 2), static_cast<double>(i % 3 == 0),
                  static_cast<double>(i)});
  }
  MatchSpec one;
  one.rng = RngSpec{9, kRngAlgorithmId};
  MatchSpec two = one;
  two.per_row_control = 2;
  auto [m1, r1] = estimate_matching(d, "a", "y", {"x"}, one);
  auto [m2, r2] = estimate_matching(d, "a", "y", {"x"}, two);
  auto treated_outcomes = [](const Dataset& m) {
    std::vector<double> out;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.at(r, m.col("a")) == 1.0) out.push_back(m.at(r, m.col("y")));
    }
    return out;
  };
  CHECK(treated_outcomes(m1) == treated_outcomes(m2));
  CHECK(m2.rows() == m1.rows() + d.rows());
}

TEST_CASE("matching reports the cells it cannot serve") {
  Dataset d = make_dataset({"x", "a", "y"});
  repeat_row(d, {0, 1, 1}, 3);
  repeat_row(d, {0, 0, 0}, 3);
  repeat_row(d, {2, 0, 1}, 2);  // no treated rows anywhere near x=2
  MatchSpec spec;
  CHECK_THROWS_WITH_AS(estimate_matching(d, "a", "y", {"x"}, spec),
                       doctest::Contains("a=1 near x=2"), UnmatchedCell);

  MatchSpec bad;
  bad.exact = false;
  bad.epsilon = -1.0;
  CHECK_THROWS_AS(estimate_matching(d, "a", "y", {"x"}, bad),
                  std::invalid_argument);
  MatchSpec none;
  none.per_row_treated = 0;
  none.per_row_control = 0;
  CHECK_THROWS_AS(estimate_matching(d, "a", "y", {"x"}, none),
                  std::invalid_argument);
}

TEST_CASE("epsilon matching respects the neighborhood radius") {
  Dataset d = make_dataset({"x", "a", "y"});
  repeat_row(d, {0.0, 1, 1}, 4);
  repeat_row(d, {0.1, 0, 0}, 4);
  repeat_row(d, {0.2, 1, 1}, 4);
  MatchSpec spec;
  spec.exact = false;
  spec.epsilon = 0.3;
  auto [matched, report] = estimate_matching(d, "a", "y", {"x"}, spec);
  CHECK(report.estimate == doctest::Approx(1.0).epsilon(1e-12));

  d.append_row({10.0, 0, 0});  // nothing treated within 0.3 of x=10
  CHECK_THROWS_AS(estimate_matching(d, "a", "y", {"x"}, spec), UnmatchedCell);
}

TEST_CASE("two-stage least squares with a perfect instrument is ols") {
  Dataset d = make_dataset({"z", "a", "y"});
  for (double a : {0.0, 1.0, 2.0, 3.0}) d.append_row({a, a, 3.0 * a + 1.0});
  EstimateReport r = estimate_iv_2sls(d, "a", "y", "z");
  CHECK(r.estimate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(r.diagnostics.at("first_stage_r2") == doctest::Approx(1.0));
  CHECK(r.diagnostics.at("first_stage_slope") == doctest::Approx(1.0));
}

TEST_CASE("weak and degenerate instruments are refused") {
  Dataset uncorr = make_dataset({"z", "a", "y"});
  uncorr.append_row({0, 0, 0});
  uncorr.append_row({0, 1, 1});
  uncorr.append_row({1, 0, 0});
  uncorr.append_row({1, 1, 1});
  CHECK_THROWS_WITH_AS(estimate_iv_2sls(uncorr, "a", "y", "z"),
                       doctest::Contains("weak instrument"), DegenerateData);

  Dataset flat = make_dataset({"z", "a", "y"});
  for (double a : {0.0, 1.0, 2.0}) flat.append_row({1.0, a, a});
  CHECK_THROWS_AS(estimate_iv_2sls(flat, "a", "y", "z"), DegenerateData);

  Dataset tiny = make_dataset({"z", "a", "y"});
  tiny.append_row({0, 0, 0});
  tiny.append_row({1, 1, 1});
  CHECK_THROWS_AS(estimate_iv_2sls(tiny, "a", "y", "z"), DegenerateData);
}

TEST_CASE("missing instruments can be dropped or imputed") {
  double nan = std::nan("");
  Dataset d = make_dataset({"z", "a", "y"});
  for (double a : {0.0, 1.0, 2.0, 3.0}) d.append_row({a, a, 3.0 * a + 1.0});
  d.append_row({nan, 4.0, 13.0});
  d.append_row({nan, 5.0, 16.0});

  EstimateReport dropped = estimate_iv_2sls(d, "a", "y", "z");
  CHECK(dropped.estimate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(dropped.diagnostics.at("n_dropped") == 2.0);
  CHECK(dropped.n_used == 4);
  REQUIRE_FALSE(dropped.warnings.empty());
  CHECK(dropped.warnings[0].find("missing instrument") != std::string::npos);

  // The complete rows satisfy z = a exactly, so imputation reproduces the
  // instrument and the slope stays exact.
  EstimateReport imputed = estimate_iv_2sls(d, "a", "y", "z", true);
  CHECK(imputed.estimate == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(imputed.diagnostics.at("n_imputed") == 2.0);
  CHECK(imputed.n_used == 6);
}

TEST_CASE("difference in differences on a hand-solved panel") {
  Dataset d = make_dataset({"a", "pre", "post"});
  d.append_row({1, 1, 5});
  d.append_row({1, 2, 7});
  d.append_row({0, 1, 2});
  d.append_row({0, 3, 4});
  EstimateReport r = estimate_did(d, "a", "pre", "post");
  CHECK(r.estimate == doctest::Approx(3.5).epsilon(1e-12));
  CHECK(r.diagnostics.at("pre_gap") == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(r.diagnostics.at("post_gap") == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("rdd recovers an exact jump from noiseless sides") {
  Dataset d = make_dataset({"x", "y"});
  for (double x : {-0.4, -0.3, -0.2, -0.1}) d.append_row({x, 1.0 + 2.0 * x});
  for (double x : {0.0, 0.1, 0.2, 0.3}) d.append_row({x, 3.0 + 2.0 * x});
  EstimateReport r = estimate_rdd(d, "x", "y", 0.0, 0.5, 1);
  CHECK(r.estimate == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.diagnostics.at("left_value") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.diagnostics.at("right_value") == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(r.diagnostics.at("n_left") == 4.0);
  CHECK(r.diagnostics.at("n_right") == 4.0);
  CHECK(r.n_used == 8);

  // Quadratic sides need the quadratic fit.
  Dataset q = make_dataset({"x", "y"});
  for (double x : {-0.4, -0.3, -0.2, -0.1}) q.append_row({x, 1.0 + x * x});
  for (double x : {0.0, 0.1, 0.2, 0.3}) q.append_row({x, 2.0 + x * x});
  EstimateReport r2 = estimate_rdd(q, "x", "y", 0.0, 0.5, 2);
  CHECK(r2.estimate == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rdd argument and support validation") {
  Dataset d = make_dataset({"x", "y"});
  for (double x : {-0.4, -0.3, -0.2, -0.1}) d.append_row({x, 0.0});
  for (double x : {0.0, 0.1, 0.2, 0.3}) d.append_row({x, 2.0});
  CHECK_THROWS_AS(estimate_rdd(d, "x", "y", 0.0, 0.5, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_rdd(d, "x", "y", 0.0, 0.0, 1),
                  std::invalid_argument);
  // A 0.15 bandwidth leaves one point on the left side.
  CHECK_THROWS_WITH_AS(estimate_rdd(d, "x", "y", 0.0, 0.15, 1),
                       doctest::Contains("left side"), DegenerateData);
}

TEST_CASE("cross-fitted partialling-out nails a noise-free linear effect") {
  Dataset d = make_dataset({"x", "a", "y"});
  StreamRng rng = derive_stream(RngSpec{808, kRngAlgorithmId}, 0, "dml-data");
  for (int i = 0; i < 400; ++i) {
    double x = rng.normal();
    double a = x + rng.normal();
    d.append_row({x, a, 2.0 * a + 3.0 * x});
  }
  // Plain regression of y on a is confounded through x.
  LinearModel ols = fit_least_squares(d, {"a"}, "y");
  CHECK(ols.weights[0] == doctest::Approx(3.5).epsilon(0.1));

  // Both nuisance fits are linear in the same design, so the residual slope
  // is algebraically exact, fold split or not.
  EstimateReport r = estimate_dml(d, "a", "y", {"x"}, 5, RngSpec{});
  CHECK(r.estimate == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(r.diagnostics.at("folds") == 5.0);

  EstimateReport again = estimate_dml(d, "a", "y", {"x"}, 5, RngSpec{});
  CHECK(r.estimate == again.estimate);
  EstimateReport other = estimate_dml(d, "a", "y", {"x"}, 5,
                                      RngSpec{4242, kRngAlgorithmId});
  CHECK(other.estimate == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("dml argument validation and degeneracy") {
  Dataset d = make_dataset({"x", "a", "y"});
  for (int i = 0; i < 50; ++i) {
    double x = static_cast<double>(i);
    d.append_row({x, 2.0 * x, x});
  }
  CHECK_THROWS_AS(estimate_dml(d, "a", "y", {"x"}, 1, RngSpec{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(estimate_dml(d, "a", "y", {"x"}, 6, RngSpec{}),
                  std::invalid_argument);
  // The action is an exact function of the covariate: nothing left to use.
  CHECK_THROWS_AS(estimate_dml(d, "a", "y", {"x"}, 5, RngSpec{}),
                  DegenerateData);
}

TEST_CASE("bootstrap errors are reproducible and failures are counted") {
  Dataset d = vaccine_hundred();
  BootstrapSpec boot;
  boot.reps = 30;
  boot.rng = RngSpec{2024, kRngAlgorithmId};
  EstimateReport r1 = estimate_naive(d, "a", "y", boot);
  REQUIRE(r1.std_error.has_value());
  CHECK(*r1.std_error > 0.0);
  CHECK(r1.diagnostics.at("bootstrap_reps") == 30.0);
  EstimateReport r2 = estimate_naive(d, "a", "y", boot);
  CHECK(*r1.std_error == *r2.std_error);

  // One lonely treated row in its covariate cell: resamples that lose it
  // cannot fit the outcome table and are dropped, visibly.
  Dataset fragile = make_dataset({"x", "a", "y"});
  repeat_row(fragile, {0, 1, 1}, 8);
  repeat_row(fragile, {0, 0, 0}, 8);
  repeat_row(fragile, {1, 0, 1}, 3);
  fragile.append_row({1, 1, 1});
  BootstrapSpec fb;
  fb.reps = 100;
  fb.rng = RngSpec{55, kRngAlgorithmId};
  EstimateReport fr = estimate_regression_adjustment(
      fragile, "a", "y", {"x"}, OutcomeModelKind::Table, fb);
  REQUIRE(fr.std_error.has_value());
  CHECK(fr.diagnostics.at("bootstrap_failures") > 0.0);
  bool mentioned = false;
  for (const auto& w : fr.warnings) {
    mentioned = mentioned || w.find("bootstrap replicates failed") !=
                                 std::string::npos;
  }
  CHECK(mentioned);
}

TEST_CASE("reports serialize to json with null std errors") {
  EstimateReport r;
  r.method = "naive";
  r.estimate = 0.25;
  r.n_used = 10;
  r.diagnostics["n_treated"] = 5.0;
  std::string j = r.to_json();
  CHECK(j.find("\"std_error\": null") != std::string::npos);
  CHECK(j.find("\"method\": \"naive\"") != std::string::npos);
  r.std_error = 0.5;
  CHECK(r.to_json().find("\"std_error\": 0.5") != std::string::npos);
}
