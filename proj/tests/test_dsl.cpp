#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "causalkit/dsl.hpp"
#include "causalkit/rng.hpp"
#include "causalkit/scm.hpp"

using namespace causalkit;

namespace {

Scm parse_or_die(const std::string& text) {
  auto r = parse_scm(text);
  REQUIRE_MESSAGE(r.ok(), format_parse_errors(r.errors));
  return *r.scm;
}

bool has_error_kind(const ParseResult& r, const std::string& kind) {
  for (const auto& e : r.errors) {
    if (e.kind == kind) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("format_double is shortest and exact") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-0.5) == "-0.5");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(1e300) == "1e+300");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  // exactness: text parses back to the same bits
  for (double v : {0.3, 2.0 / 7.0, 1.4142135623730951, 123456.789e-5}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("mechanism classification from source text") {
  Scm m = parse_or_die(R"(
var x ~ normal(0, 1);
var noise_free := 2*x + 1;
var lg := 0.5*x + 3 + normal(0, 2);
var det : {0, 1} := (x > 0);
var bare := (x > 0);
var c := 4;
var coin ~ bernoulli(0.25);
var pick ~ uniform(-1, 0, 1);
)");
  CHECK(std::holds_alternative<LinearGaussian>(m.mechanisms.at("x")));
  CHECK(std::holds_alternative<Deterministic>(m.mechanisms.at("noise_free")));
  auto& lg = std::get<LinearGaussian>(m.mechanisms.at("lg"));
  CHECK(lg.weights.at("x") == 0.5);
  CHECK(lg.intercept == 3.0);
  CHECK(lg.noise_std == 2.0);
  CHECK(std::holds_alternative<Deterministic>(m.mechanisms.at("det")));
  CHECK(m.domains.at("det") == Domain::discrete({0.0, 1.0}));
  // without an annotation, only parentless noise-free constants get a
  // discrete domain; expressions over parents stay continuous
  CHECK(m.domains.at("bare").continuous);
  CHECK(std::get<Constant>(m.mechanisms.at("c")).value == 4.0);
  CHECK(m.domains.at("c") == Domain::discrete({4.0}));
  CHECK(std::holds_alternative<DiscreteCpt>(m.mechanisms.at("coin")));
  CHECK(m.domains.at("pick") == Domain::discrete({-1.0, 0.0, 1.0}));
}

TEST_CASE("edges come from mechanism references") {
  Scm m = parse_or_die(R"(
var a ~ bernoulli(0.5);
var b ~ bernoulli(0.5);
var c : {0, 1} cpt
  | a=0, b=0 -> 1, 0
  | a=0, b=1 -> 0.5, 0.5
  | a=1, b=0 -> 0.5, 0.5
  | a=1, b=1 -> 0, 1
;
var d := c * 2 + a;
)");
  CHECK(m.dag.parents("c") == std::vector<std::string>{"a", "b"});
  CHECK(m.dag.parents("d") == std::vector<std::string>{"a", "c"});
}

TEST_CASE("parser reports every error with positions") {
  auto r = parse_scm(R"(
var ok ~ bernoulli(0.5);
var dup ~ bernoulli(0.5);
var dup ~ bernoulli(0.5);
var ghost := missing + 1;
var badp ~ bernoulli(1.5);
)");
  CHECK_FALSE(r.ok());
  CHECK(r.errors.size() >= 3);
  CHECK(has_error_kind(r, "duplicate-definition"));
  CHECK(has_error_kind(r, "unknown-symbol"));
  for (const auto& e : r.errors) CHECK(e.span.line >= 2);
  std::string rendered = format_parse_errors(r.errors);
  CHECK(rendered.find("dup") != std::string::npos);
  CHECK(rendered.find("missing") != std::string::npos);
}

TEST_CASE("parser rejects malformed constructs without stopping early") {
  CHECK_FALSE(parse_scm("var x ~ nope(1);").ok());
  CHECK_FALSE(parse_scm("var x := ;").ok());
  CHECK_FALSE(parse_scm("var x ~ bernoulli(0.5)").ok());  // missing ';'
  CHECK_FALSE(parse_scm("var x : {0, 1} cpt | -> 0.4, 0.7;").ok());
  CHECK_FALSE(parse_scm("var x := normal(0,1) + normal(0,1);").ok());
  CHECK_FALSE(parse_scm("var x := x + 1;").ok());  // self reference
  // two broken declarations -> two errors, not one
  auto r = parse_scm("var x ~ nope(1);\nvar y ~ nope(2);");
  CHECK(r.errors.size() == 2);
}

TEST_CASE("cpt shape errors carry their own kind") {
  auto r = parse_scm(R"(
var a ~ bernoulli(0.5);
var b : {0, 1} cpt
  | a=0 -> 0.5, 0.5
;
)");
  CHECK_FALSE(r.ok());
  CHECK(has_error_kind(r, "cpt-shape"));

  auto wrong_arity = parse_scm(R"(
var a ~ bernoulli(0.5);
var b : {0, 1} cpt
  | a=0 -> 0.5, 0.25, 0.25
  | a=1 -> 0.5, 0.5
;
)");
  CHECK_FALSE(wrong_arity.ok());
}

TEST_CASE("domain mismatches are caught at parse time") {
  CHECK_FALSE(parse_scm("var a : {0, 1} ~ uniform(0, 2);").ok());
  CHECK_FALSE(parse_scm("var a : {0, 2} ~ bernoulli(0.5);").ok());
  CHECK(parse_scm("var a : {0, 1} ~ bernoulli(0.5);").ok());
  auto r = parse_scm("var a : {3} := 4;");
  CHECK_FALSE(r.ok());
  CHECK(has_error_kind(r, "domain-mismatch"));
}

TEST_CASE("pmf entries stay aligned with reordered domain values") {
  // {1, 0} lists the domain backwards; the probability columns follow the
  // listed order, so p(a=1) is still 0.3 after a round trip.
  Scm m = parse_or_die("var a : {1, 0} ~ bernoulli(0.3);");
  const auto& cpt = std::get<DiscreteCpt>(m.mechanisms.at("a"));
  CHECK(m.domains.at("a").values == std::vector<double>{1.0, 0.0});
  CHECK(cpt.rows.at({}) == std::vector<double>{0.3, 0.7});
  CHECK(scm_equal(parse_or_die(serialize_scm(m)), m));
}

TEST_CASE("apostrophe names parse and serialize") {
  Scm m = parse_or_die("var v' ~ normal(0, 1);\nvar v'' := v' + normal(0, 1);");
  CHECK(m.dag.has_node("v'"));
  CHECK(m.dag.parents("v''") == std::vector<std::string>{"v'"});
  std::string text = serialize_scm(m);
  CHECK(scm_equal(parse_or_die(text), m));
}

TEST_CASE("comments and whitespace are free-form") {
  Scm a = parse_or_die(
      "# leading comment\nvar x ~ bernoulli(0.5); # trailing\n\n\t"
      "var y := x + 1;\n# end\n");
  Scm b = parse_or_die("var x ~ bernoulli(0.5);var y := x+1;");
  CHECK(scm_equal(a, b));
}

TEST_CASE("canonical form is stable and order-independent") {
  // same model, declarations permuted and spelled differently
  Scm a = parse_or_die(R"(
var z ~ normal(0, 1);
var u := 0.2*z + normal(0, 1);
)");
  Scm b = parse_or_die(R"(
var u := normal(0, 1) + z*0.2;
var z ~ normal(0, 1);
)");
  CHECK(scm_equal(a, b));
  CHECK(serialize_scm(a) == serialize_scm(b));
  std::string canon = serialize_scm(a);
  CHECK(serialize_scm(parse_or_die(canon)) == canon);
}

TEST_CASE("round trip holds across mechanism kinds") {
  const char* samples[] = {
      "var x ~ normal(-0.5, 2);",
      "var x ~ point(1.5);",
      "var x ~ uniform(0, 0.5, 1);",
      "var x ~ normal(0, 1);\nvar y := min(x, 0) + normal(0, 1);",
      "var x ~ normal(0, 1);\nvar y : {0, 1} := (x >= 0.5);",
      "var x ~ normal(0, 1);\nvar y := indicator(x) * x + 2;",
      "var x ~ normal(0, 1);\nvar y := -x + 1 + normal(0, 0.5);",
      "var a ~ bernoulli(0.5);\nvar b : {0, 1} cpt\n  | a=0 -> 1, 0\n"
      "  | a=1 -> 0.25, 0.75\n;",
  };
  for (const char* text : samples) {
    CAPTURE(text);
    Scm first = parse_or_die(text);
    std::string canon = serialize_scm(first);
    CAPTURE(canon);
    Scm second = parse_or_die(canon);
    CHECK(scm_equal(first, second));
    CHECK(serialize_scm(second) == canon);
  }
}

TEST_CASE("serializer emits parseable special floats") {
  Scm m = parse_or_die("var x ~ point(0.30000000000000004);");
  Scm back = parse_or_die(serialize_scm(m));
  CHECK(std::get<Constant>(back.mechanisms.at("x")).value ==
        0.30000000000000004);
}

TEST_CASE("parser survives a burst of garbage without throwing") {
  StreamRng fz = derive_stream(RngSpec{}, 99, "quick-fuzz");
  const std::string charset =
      "var cpt real{};:=~()->,.0123456789abc'#|<>=!+-*/ \n";
  for (int i = 0; i < 20000; ++i) {
    std::size_t len = fz.choice(50);
    std::string s;
    for (std::size_t j = 0; j < len; ++j) {
      s += fz.bernoulli(0.8) ? charset[fz.choice(charset.size())]
                             : static_cast<char>(fz.choice(256));
    }
    CHECK_NOTHROW(parse_scm(s));
  }
}
