#include "causalkit/expr.hpp"

#include <cmath>
#include <stdexcept>

#include "causalkit/dsl.hpp"  // format_double
#include "causalkit/errors.hpp"

namespace causalkit {

double NoiseSpec::sample(StreamRng& rng) const {
  switch (kind) {
    case Kind::Point:
      return a;
    case Kind::Normal:
      return a + b * rng.normal();
    case Kind::Bernoulli:
      return rng.bernoulli(a) ? 1.0 : 0.0;
    case Kind::Choice:
      return values[rng.choice(values.size())];
  }
  throw std::logic_error("unreachable noise kind");
}

std::vector<std::pair<double, double>> NoiseSpec::support() const {
  switch (kind) {
    case Kind::Point:
      return {{a, 1.0}};
    case Kind::Normal:
      if (b == 0.0) return {{a, 1.0}};
      throw DomainError("normal noise has no finite support; enumeration needs discrete noise");
    case Kind::Bernoulli:
      return {{0.0, 1.0 - a}, {1.0, a}};
    case Kind::Choice: {
      std::vector<std::pair<double, double>> out;
      double p = 1.0 / static_cast<double>(values.size());
      for (double v : values) out.emplace_back(v, p);
      return out;
    }
  }
  throw std::logic_error("unreachable noise kind");
}

ExprPtr make_literal(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Literal;
  e->literal = v;
  return e;
}

ExprPtr make_var(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->var = std::move(name);
  return e;
}

ExprPtr make_noise(NoiseSpec spec) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Noise;
  e->noise = std::move(spec);
  return e;
}

ExprPtr make_neg(ExprPtr inner) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Neg;
  e->lhs = std::move(inner);
  return e;
}

ExprPtr make_binary(BinOp op, ExprPtr l, ExprPtr r) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Binary;
  e->bin = op;
  e->lhs = std::move(l);
  e->rhs = std::move(r);
  return e;
}

ExprPtr make_call(FnOp fn, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Call;
  e->fn = fn;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

double eval_expr(const Expr& e,
                 const std::vector<std::pair<std::string, double>>& env,
                 double noise_value) {
  switch (e.kind) {
    case Expr::Kind::Literal:
      return e.literal;
    case Expr::Kind::Var:
      for (const auto& [name, value] : env) {
        if (name == e.var) return value;
      }
      throw std::out_of_range("expression references '" + e.var +
                              "' which is not bound");
    case Expr::Kind::Noise:
      return noise_value;
    case Expr::Kind::Neg:
      return -eval_expr(*e.lhs, env, noise_value);
    case Expr::Kind::Binary: {
      double l = eval_expr(*e.lhs, env, noise_value);
      double r = eval_expr(*e.rhs, env, noise_value);
      switch (e.bin) {
        case BinOp::Add: return l + r;
        case BinOp::Sub: return l - r;
        case BinOp::Mul: return l * r;
        case BinOp::Div: return l / r;
        case BinOp::Lt:  return l < r ? 1.0 : 0.0;
        case BinOp::Le:  return l <= r ? 1.0 : 0.0;
        case BinOp::Gt:  return l > r ? 1.0 : 0.0;
        case BinOp::Ge:  return l >= r ? 1.0 : 0.0;
        case BinOp::Eq:  return l == r ? 1.0 : 0.0;
        case BinOp::Ne:  return l != r ? 1.0 : 0.0;
      }
      throw std::logic_error("unreachable binary op");
    }
    case Expr::Kind::Call: {
      double a = eval_expr(*e.lhs, env, noise_value);
      if (e.fn == FnOp::Indicator) return a != 0.0 ? 1.0 : 0.0;
      double b = eval_expr(*e.rhs, env, noise_value);
      return e.fn == FnOp::Min ? std::fmin(a, b) : std::fmax(a, b);
    }
  }
  throw std::logic_error("unreachable expr kind");
}

void collect_vars(const Expr& e, std::set<std::string>& out) {
  switch (e.kind) {
    case Expr::Kind::Var:
      out.insert(e.var);
      return;
    case Expr::Kind::Neg:
      collect_vars(*e.lhs, out);
      return;
    case Expr::Kind::Binary:
      collect_vars(*e.lhs, out);
      collect_vars(*e.rhs, out);
      return;
    case Expr::Kind::Call:
      collect_vars(*e.lhs, out);
      if (e.rhs) collect_vars(*e.rhs, out);
      return;
    default:
      return;
  }
}

std::size_t count_noise(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Noise:
      return 1;
    case Expr::Kind::Neg:
      return count_noise(*e.lhs);
    case Expr::Kind::Binary:
      return count_noise(*e.lhs) + count_noise(*e.rhs);
    case Expr::Kind::Call:
      return count_noise(*e.lhs) + (e.rhs ? count_noise(*e.rhs) : 0);
    default:
      return 0;
  }
}

namespace {

const NoiseSpec* find_noise(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Noise:
      return &e.noise;
    case Expr::Kind::Neg:
      return find_noise(*e.lhs);
    case Expr::Kind::Binary: {
      if (const auto* n = find_noise(*e.lhs)) return n;
      return find_noise(*e.rhs);
    }
    case Expr::Kind::Call: {
      if (const auto* n = find_noise(*e.lhs)) return n;
      return e.rhs ? find_noise(*e.rhs) : nullptr;
    }
    default:
      return nullptr;
  }
}

}  // namespace

NoiseSpec noise_of(const Expr& e) {
  const NoiseSpec* n = find_noise(e);
  return n ? *n : NoiseSpec::point(0.0);
}

namespace {

// Single-argument calls leave rhs empty, so children compare through here.
bool child_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return !a && !b;
  return expr_equal(*a, *b);
}

}  // namespace

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Literal:
      return a.literal == b.literal;
    case Expr::Kind::Var:
      return a.var == b.var;
    case Expr::Kind::Noise:
      return a.noise == b.noise;
    case Expr::Kind::Neg:
      return child_equal(a.lhs, b.lhs);
    case Expr::Kind::Binary:
      return a.bin == b.bin && child_equal(a.lhs, b.lhs) &&
             child_equal(a.rhs, b.rhs);
    case Expr::Kind::Call:
      return a.fn == b.fn && child_equal(a.lhs, b.lhs) &&
             child_equal(a.rhs, b.rhs);
  }
  return false;
}

namespace {

std::string print_noise(const NoiseSpec& n) {
  switch (n.kind) {
    case NoiseSpec::Kind::Point:
      return "point(" + format_double(n.a) + ")";
    case NoiseSpec::Kind::Normal:
      return "normal(" + format_double(n.a) + ", " + format_double(n.b) + ")";
    case NoiseSpec::Kind::Bernoulli:
      return "bernoulli(" + format_double(n.a) + ")";
    case NoiseSpec::Kind::Choice: {
      std::string out = "uniform(";
      for (std::size_t i = 0; i < n.values.size(); ++i) {
        if (i) out += ", ";
        out += format_double(n.values[i]);
      }
      return out + ")";
    }
  }
  throw std::logic_error("unreachable noise kind");
}

const char* bin_token(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Lt:  return "<";
    case BinOp::Le:  return "<=";
    case BinOp::Gt:  return ">";
    case BinOp::Ge:  return ">=";
    case BinOp::Eq:  return "==";
    case BinOp::Ne:  return "!=";
  }
  return "?";
}

}  // namespace

std::string print_expr(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Literal:
      return format_double(e.literal);
    case Expr::Kind::Var:
      return e.var;
    case Expr::Kind::Noise:
      return print_noise(e.noise);
    case Expr::Kind::Neg:
      return "(-" + print_expr(*e.lhs) + ")";
    case Expr::Kind::Binary:
      return "(" + print_expr(*e.lhs) + " " + bin_token(e.bin) + " " +
             print_expr(*e.rhs) + ")";
    case Expr::Kind::Call: {
      const char* name = e.fn == FnOp::Min       ? "min"
                         : e.fn == FnOp::Max     ? "max"
                                                 : "indicator";
      std::string out = std::string(name) + "(" + print_expr(*e.lhs);
      if (e.fn != FnOp::Indicator) out += ", " + print_expr(*e.rhs);
      return out + ")";
    }
  }
  throw std::logic_error("unreachable expr kind");
}

}  // namespace causalkit
