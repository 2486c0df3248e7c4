#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "causalkit/dag.hpp"
#include "causalkit/dsl.hpp"
#include "causalkit/errors.hpp"
#include "causalkit/expr.hpp"
#include "causalkit/paths.hpp"
#include "causalkit/rng.hpp"
#include "causalkit/scm.hpp"

using namespace causalkit;

namespace {

Scm parse_or_die(const char* text) {
  auto r = parse_scm(text);
  REQUIRE_MESSAGE(r.ok(), format_parse_errors(r.errors));
  return *r.scm;
}

}  // namespace

TEST_CASE("rng streams are deterministic and independent") {
  RngSpec spec;
  StreamRng a = derive_stream(spec, 0, "alpha");
  StreamRng a2 = derive_stream(spec, 0, "alpha");
  StreamRng b = derive_stream(spec, 0, "beta");
  StreamRng a1 = derive_stream(spec, 1, "alpha");
  std::uint64_t first = a.next_u64();
  CHECK(first == a2.next_u64());
  CHECK(first != b.next_u64());
  CHECK(first != a1.next_u64());
}

TEST_CASE("rng stream values are frozen") {
  // Pinned outputs guard the generator against accidental algorithm drift;
  // datasets and trials replay byte-identically only if these hold.
  StreamRng s = derive_stream(RngSpec{}, 0, "rows");
  CHECK(s.next_u64() == 11370273824631186586ull);
}

TEST_CASE("rng rejects unknown algorithm ids") {
  RngSpec spec;
  spec.algorithm = "mystery/v2";
  CHECK_THROWS_AS(derive_stream(spec, 0, "x"), std::invalid_argument);
  CHECK_THROWS_AS(derive_spec(spec, 0, "x"), std::invalid_argument);
}

TEST_CASE("rng utility draws stay in range") {
  StreamRng s = derive_stream(RngSpec{}, 7, "range");
  for (int i = 0; i < 1000; ++i) {
    double u = s.u01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double uo = s.u01_open();
    CHECK(uo > 0.0);
    CHECK(uo <= 1.0);
    std::size_t c = s.choice(7);
    CHECK(c < 7);
  }
  CHECK_THROWS_AS(s.choice(0), std::invalid_argument);
}

TEST_CASE("expression evaluation covers operators and noise substitution") {
  // (2 * x - 1) / 4 with x = 3 -> 1.25
  auto e = make_binary(
      BinOp::Div,
      make_binary(BinOp::Sub,
                  make_binary(BinOp::Mul, make_literal(2.0), make_var("x")),
                  make_literal(1.0)),
      make_literal(4.0));
  CHECK(eval_expr(*e, {{"x", 3.0}}, 0.0) == doctest::Approx(1.25));

  auto cmp = make_binary(BinOp::Ge, make_var("x"), make_literal(3.0));
  CHECK(eval_expr(*cmp, {{"x", 3.0}}, 0.0) == 1.0);
  CHECK(eval_expr(*cmp, {{"x", 2.9}}, 0.0) == 0.0);

  auto noisy = make_binary(BinOp::Add, make_var("x"),
                           make_noise(NoiseSpec::normal(0.0, 1.0)));
  CHECK(eval_expr(*noisy, {{"x", 1.0}}, 0.5) == doctest::Approx(1.5));

  auto call = make_call(FnOp::Max, make_literal(2.0), make_var("x"));
  CHECK(eval_expr(*call, {{"x", 5.0}}, 0.0) == 5.0);
  // indicator is truthiness: any nonzero value maps to 1.
  auto ind = make_call(FnOp::Indicator, make_var("x"), nullptr);
  CHECK(eval_expr(*ind, {{"x", -2.0}}, 0.0) == 1.0);
  CHECK(eval_expr(*ind, {{"x", 2.0}}, 0.0) == 1.0);
  CHECK(eval_expr(*ind, {{"x", 0.0}}, 0.0) == 0.0);
}

TEST_CASE("expr_equal handles one-argument calls") {
  auto a = make_call(FnOp::Indicator, make_var("x"), nullptr);
  auto b = make_call(FnOp::Indicator, make_var("x"), nullptr);
  auto c = make_call(FnOp::Indicator, make_var("y"), nullptr);
  CHECK(expr_equal(*a, *b));
  CHECK_FALSE(expr_equal(*a, *c));
}

TEST_CASE("count_noise and noise_of find the embedded term") {
  auto noisy = make_binary(
      BinOp::Mul, make_var("x"),
      make_call(FnOp::Max, make_literal(0.0),
                make_noise(NoiseSpec::bernoulli(0.25))));
  CHECK(count_noise(*noisy) == 1);
  CHECK(noise_of(*noisy) == NoiseSpec::bernoulli(0.25));
  std::set<std::string> vars;
  collect_vars(*noisy, vars);
  CHECK(vars == std::set<std::string>{"x"});
}

TEST_CASE("dag structure queries") {
  Dag d;
  d.add_node("a");
  d.add_node("b");
  d.add_node("c");
  d.add_edge("a", "b");
  d.add_edge("b", "c");
  d.add_edge("a", "c");
  CHECK_THROWS_AS(d.add_node("a"), std::invalid_argument);

  auto report = structure_query(d);
  CHECK(report.order == std::vector<std::string>{"a", "b", "c"});
  CHECK(report.parents["c"] == std::vector<std::string>{"a", "b"});
  CHECK(report.children["a"] == std::vector<std::string>{"b", "c"});
  CHECK(descendants(d, "a") == std::set<std::string>{"b", "c"});
  CHECK(ancestors(d, "c") == std::set<std::string>{"a", "b"});
}

TEST_CASE("cyclic graphs are reported") {
  Dag d;
  d.add_node("a");
  d.add_node("b");
  d.add_edge("a", "b");
  d.add_edge("b", "a");
  CHECK_FALSE(topo_order(d).has_value());
  CHECK_THROWS_AS(structure_query(d), std::invalid_argument);
}

TEST_CASE("topological order breaks ties by declaration or name") {
  Dag d;
  d.add_node("z");
  d.add_node("a");  // no edges: pure tie
  CHECK(*topo_order(d) == std::vector<std::string>{"z", "a"});
  CHECK(*topo_order_lexicographic(d) == std::vector<std::string>{"a", "z"});
}

TEST_CASE("validate flags the standard modelling mistakes") {
  Scm m;
  m.dag.add_node("a");
  m.dag.add_node("b");
  m.dag.add_edge("a", "b");
  m.domains["a"] = Domain::discrete({0.0, 1.0});
  m.domains["b"] = Domain::discrete({0.0, 1.0});
  DiscreteCpt ca;
  ca.rows[{}] = {0.5, 0.5};
  m.mechanisms["a"] = ca;
  DiscreteCpt cb;
  cb.parents = {"a"};
  cb.rows[{0.0}] = {0.3, 0.7};
  cb.rows[{1.0}] = {0.2, 0.8};
  m.mechanisms["b"] = cb;
  CHECK(validate(m).empty());

  SUBCASE("probabilities must sum to one") {
    std::get<DiscreteCpt>(m.mechanisms["b"]).rows[{0.0}] = {0.3, 0.3};
    auto issues = validate(m);
    REQUIRE_FALSE(issues.empty());
    CHECK(format_issues(issues).find("b") != std::string::npos);
  }
  SUBCASE("rows must cover every parent assignment") {
    std::get<DiscreteCpt>(m.mechanisms["b"]).rows.erase({1.0});
    CHECK_FALSE(validate(m).empty());
  }
  SUBCASE("mechanism parents must match incoming edges") {
    std::get<DiscreteCpt>(m.mechanisms["b"]).parents = {};
    std::get<DiscreteCpt>(m.mechanisms["b"]).rows.clear();
    std::get<DiscreteCpt>(m.mechanisms["b"]).rows[{}] = {0.5, 0.5};
    CHECK_FALSE(validate(m).empty());
  }
  SUBCASE("cycles are validation issues, not crashes") {
    m.dag.add_edge("b", "a");
    CHECK_FALSE(validate(m).empty());
  }
  SUBCASE("missing mechanisms are reported") {
    m.mechanisms.erase("b");
    CHECK_FALSE(validate(m).empty());
  }
  SUBCASE("constant value must sit inside a discrete domain") {
    m.dag.edges.clear();
    m.mechanisms["b"] = Constant{2.0};
    CHECK_FALSE(validate(m).empty());
    m.mechanisms["b"] = Constant{1.0};
    CHECK(validate(m).empty());
  }
}

TEST_CASE("do_surgery replaces mechanisms and severs incoming edges") {
  Scm toy = parse_or_die(R"(
var x ~ bernoulli(0.5);
var a : {0, 1} cpt
  | x=0 -> 0.8, 0.2
  | x=1 -> 0.2, 0.8
;
var y : {0, 1} cpt
  | a=0, x=0 -> 0.9, 0.1
  | a=0, x=1 -> 0.4, 0.6
  | a=1, x=0 -> 0.6, 0.4
  | a=1, x=1 -> 0.1, 0.9
;
)");
  Scm cut = do_surgery(toy, {{"a", 1.0}});
  CHECK(std::holds_alternative<Constant>(cut.mechanisms.at("a")));
  CHECK(std::get<Constant>(cut.mechanisms.at("a")).value == 1.0);
  CHECK(cut.dag.parents("a").empty());
  // parents come back in declaration order of the source nodes
  CHECK(cut.dag.parents("y") == std::vector<std::string>{"x", "a"});
  // outgoing edges survive, input untouched
  CHECK(toy.dag.parents("a") == std::vector<std::string>{"x"});
  CHECK(validate(cut).empty());

  SUBCASE("surgery is idempotent") {
    CHECK(scm_equal(do_surgery(cut, {{"a", 1.0}}), cut));
  }
  SUBCASE("disjoint surgeries commute") {
    Scm xy = do_surgery(do_surgery(toy, {{"x", 1.0}}), {{"a", 0.0}});
    Scm yx = do_surgery(do_surgery(toy, {{"a", 0.0}}), {{"x", 1.0}});
    CHECK(scm_equal(xy, yx));
    CHECK(scm_equal(xy, do_surgery(toy, {{"x", 1.0}, {"a", 0.0}})));
  }
  SUBCASE("unknown node and out-of-domain value throw") {
    CHECK_THROWS_AS(do_surgery(toy, {{"q", 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(do_surgery(toy, {{"a", 2.0}}), std::invalid_argument);
  }
}

TEST_CASE("scm_equal ignores declaration order but not structure") {
  Scm a = parse_or_die("var u ~ bernoulli(0.5);\nvar w ~ bernoulli(0.25);");
  Scm b = parse_or_die("var w ~ bernoulli(0.25);\nvar u ~ bernoulli(0.5);");
  CHECK(scm_equal(a, b));
  Scm c = parse_or_die("var u ~ bernoulli(0.5);\nvar w ~ bernoulli(0.5);");
  CHECK_FALSE(scm_equal(a, c));
}

TEST_CASE("path classification on the textbook shapes") {
  Dag d;
  for (const char* n : {"a", "m", "b"}) d.add_node(n);

  SUBCASE("chain a -> m -> b") {
    d.add_edge("a", "m");
    d.add_edge("m", "b");
    auto open = classify_paths(d, "a", "b", {});
    REQUIRE(open.paths.size() == 1);
    CHECK(open.paths[0].roles == std::vector<NodeRole>{NodeRole::Chain});
    CHECK(open.paths[0].open);
    CHECK(open.paths[0].causal);
    CHECK_FALSE(open.d_separated);
    CHECK(classify_paths(d, "a", "b", {"m"}).d_separated);
  }
  SUBCASE("fork a <- m -> b") {
    d.add_edge("m", "a");
    d.add_edge("m", "b");
    auto open = classify_paths(d, "a", "b", {});
    REQUIRE(open.paths.size() == 1);
    CHECK(open.paths[0].roles == std::vector<NodeRole>{NodeRole::Fork});
    CHECK_FALSE(open.paths[0].causal);
    CHECK_FALSE(open.d_separated);
    CHECK(classify_paths(d, "a", "b", {"m"}).d_separated);
  }
  SUBCASE("collider a -> m <- b") {
    d.add_edge("a", "m");
    d.add_edge("b", "m");
    CHECK(classify_paths(d, "a", "b", {}).d_separated);
    CHECK_FALSE(classify_paths(d, "a", "b", {"m"}).d_separated);
    // observing a descendant of the collider also opens it
    d.add_node("k");
    d.add_edge("m", "k");
    CHECK_FALSE(classify_paths(d, "a", "b", {"k"}).d_separated);
  }
}

TEST_CASE("path classification guards its preconditions") {
  Dag d;
  d.add_node("a");
  d.add_node("b");
  CHECK_THROWS_AS(classify_paths(d, "a", "a", {}), std::invalid_argument);
  CHECK_THROWS_AS(classify_paths(d, "a", "b", {"a"}), std::invalid_argument);
  CHECK_THROWS_AS(classify_paths(d, "a", "zz", {}), std::invalid_argument);

  Dag big;
  for (int i = 0; i < 17; ++i) big.add_node("n" + std::to_string(i));
  CHECK_THROWS_AS(classify_paths(big, "n0", "n1", {}), std::invalid_argument);
  CHECK_NOTHROW(classify_paths(big, "n0", "n1", {}, 17));
}

TEST_CASE("disconnected nodes are trivially separated") {
  Dag d;
  d.add_node("a");
  d.add_node("b");
  auto report = classify_paths(d, "a", "b", {});
  CHECK(report.paths.empty());
  CHECK(report.d_separated);
}
