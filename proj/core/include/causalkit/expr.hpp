#pragma once

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "causalkit/rng.hpp"

namespace causalkit {

// Distribution of a single noise term. `point` is the degenerate case and is
// what a noise-free deterministic mechanism carries.
struct NoiseSpec {
  enum class Kind { Point, Normal, Bernoulli, Choice };
  Kind kind = Kind::Point;
  double a = 0.0;              // point: value; normal: mean; bernoulli: p
  double b = 0.0;              // normal: std
  std::vector<double> values;  // choice: uniform over these

  static NoiseSpec point(double v) { return {Kind::Point, v, 0.0, {}}; }
  static NoiseSpec normal(double mean, double std) {
    return {Kind::Normal, mean, std, {}};
  }
  static NoiseSpec bernoulli(double p) { return {Kind::Bernoulli, p, 0.0, {}}; }
  static NoiseSpec choice(std::vector<double> vals) {
    return {Kind::Choice, 0.0, 0.0, std::move(vals)};
  }

  bool is_discrete() const { return kind != Kind::Normal || b == 0.0; }
  double sample(StreamRng& rng) const;
  // (value, probability) pairs; throws DomainError for continuous kinds.
  std::vector<std::pair<double, double>> support() const;
  bool operator==(const NoiseSpec&) const = default;
};

// Arithmetic over parent values, literals and at most one noise term.
// Comparisons evaluate to 0/1 so threshold assignments like
// (x + normal(0,1)) > 0 are ordinary expressions.
enum class BinOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne };
enum class FnOp { Min, Max, Indicator };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Kind { Literal, Var, Noise, Neg, Binary, Call };
  Kind kind = Kind::Literal;
  double literal = 0.0;
  std::string var;
  NoiseSpec noise;
  BinOp bin = BinOp::Add;
  FnOp fn = FnOp::Min;
  ExprPtr lhs, rhs;  // Neg uses lhs only; Call uses lhs/rhs as arguments
};

ExprPtr make_literal(double v);
ExprPtr make_var(std::string name);
ExprPtr make_noise(NoiseSpec spec);
ExprPtr make_neg(ExprPtr e);
ExprPtr make_binary(BinOp op, ExprPtr l, ExprPtr r);
ExprPtr make_call(FnOp fn, ExprPtr a, ExprPtr b);

// Evaluates with the given noise draw substituted at the noise leaf.
double eval_expr(const Expr& e,
                 const std::vector<std::pair<std::string, double>>& env,
                 double noise_value);

void collect_vars(const Expr& e, std::set<std::string>& out);
std::size_t count_noise(const Expr& e);
// The unique noise spec, or point(0) when the expression has none.
NoiseSpec noise_of(const Expr& e);

bool expr_equal(const Expr& a, const Expr& b);
// Fully parenthesized canonical form; parsing it back yields an equal AST.
std::string print_expr(const Expr& e);

}  // namespace causalkit
