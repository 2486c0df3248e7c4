#include "causalkit/dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace causalkit {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------- lexing --

enum class Tok {
  Ident, Number, LBrace, RBrace, LParen, RParen, Comma, Colon, Semi, Pipe,
  Arrow, Tilde, Assign, EqEq, Ne, Le, Ge, Lt, Gt, Plus, Minus, Star, Slash,
  EqSign, Bad, End
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_ws();
      Token t = next();
      out.push_back(t);
      if (t.kind == Tok::End) break;
    }
    return out;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;

  bool eof() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') {
      line_++;
      col_ = 1;
    } else {
      col_++;
    }
    return c;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '#') {
        while (!eof() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  Token make(Tok kind, int line, int col, std::string text) {
    Token t;
    t.kind = kind;
    t.text = std::move(text);
    t.span = {line, col, line_, col_ == 1 ? 1 : col_ - 1};
    if (t.span.end_line > line && col_ == 1) t.span.end_line = line_ - 1;
    return t;
  }

  Token next() {
    if (eof()) {
      Token t;
      t.kind = Tok::End;
      t.span = {line_, col_, line_, col_};
      return t;
    }
    int line = line_, col = col_;
    char c = advance();
    auto two = [&](char second, Tok yes, Tok no) {
      if (peek() == second) {
        advance();
        return yes;
      }
      return no;
    };
    switch (c) {
      case '{': return make(Tok::LBrace, line, col, "{");
      case '}': return make(Tok::RBrace, line, col, "}");
      case '(': return make(Tok::LParen, line, col, "(");
      case ')': return make(Tok::RParen, line, col, ")");
      case ',': return make(Tok::Comma, line, col, ",");
      case ';': return make(Tok::Semi, line, col, ";");
      case '|': return make(Tok::Pipe, line, col, "|");
      case '~': return make(Tok::Tilde, line, col, "~");
      case '+': return make(Tok::Plus, line, col, "+");
      case '*': return make(Tok::Star, line, col, "*");
      case '/': return make(Tok::Slash, line, col, "/");
      case ':': return make(two('=', Tok::Assign, Tok::Colon), line, col, ":");
      case '-': return make(two('>', Tok::Arrow, Tok::Minus), line, col, "-");
      case '=': return make(two('=', Tok::EqEq, Tok::EqSign), line, col, "=");
      case '<': return make(two('=', Tok::Le, Tok::Lt), line, col, "<");
      case '>': return make(two('=', Tok::Ge, Tok::Gt), line, col, ">");
      case '!':
        if (peek() == '=') {
          advance();
          return make(Tok::Ne, line, col, "!=");
        }
        return make(Tok::Bad, line, col, "!");
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek())))) {
      std::string text(1, c);
      while (std::isdigit(static_cast<unsigned char>(peek())) ||
             peek() == '.') {
        text += advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        std::size_t save_pos = pos_;
        int save_line = line_, save_col = col_;
        std::string ext(1, advance());
        if (peek() == '+' || peek() == '-') ext += advance();
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
          while (std::isdigit(static_cast<unsigned char>(peek()))) {
            ext += advance();
          }
          text += ext;
        } else {
          pos_ = save_pos;  // lone 'e' belongs to the next token
          line_ = save_line;
          col_ = save_col;
        }
      }
      double value = 0.0;
      auto res = std::from_chars(text.data(), text.data() + text.size(), value);
      if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        Token t = make(Tok::Bad, line, col, text);
        return t;
      }
      Token t = make(Tok::Number, line, col, text);
      t.number = value;
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string text(1, c);
      while (std::isalnum(static_cast<unsigned char>(peek())) ||
             peek() == '_') {
        text += advance();
      }
      while (peek() == '\'') text += advance();  // v', x'' and friends
      return make(Tok::Ident, line, col, text);
    }
    return make(Tok::Bad, line, col, std::string(1, c));
  }
};

// --------------------------------------------------------------- parsing --

struct RowAst {
  std::vector<std::tuple<std::string, SourceSpan, double>> assigns;
  std::vector<double> pmf;
  SourceSpan span;
};

struct DeclAst {
  std::string name;
  SourceSpan name_span;
  bool has_domain = false;
  Domain domain;
  SourceSpan domain_span;
  enum class Form { Dist, Assign, Cpt } form = Form::Assign;
  std::string dist_name;
  std::vector<double> dist_args;
  SourceSpan dist_span;
  ExprPtr expr;
  std::vector<std::pair<std::string, SourceSpan>> refs;
  std::vector<SourceSpan> noise_spans;
  std::vector<RowAst> rows;
  bool dead = false;  // a fatal parse error inside this declaration
};

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "var",  "cpt", "real",     "normal", "bernoulli",
      "uniform", "point", "min", "max",    "indicator"};
  return words;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(Lexer(src).run()) {}

  ParseResult run() {
    while (!at(Tok::End)) {
      if (at(Tok::Ident) && cur().text == "var") {
        parse_decl();
      } else if (at(Tok::Ident) && cur().text == "edges") {
        error("syntax",
              "explicit edges are not supported; parents are inferred from "
              "mechanism references",
              cur().span);
        sync();
      } else {
        error("syntax", "expected 'var' to start a declaration", cur().span);
        sync();
      }
    }
    if (decls_.empty() && errors_.empty()) {
      error("syntax", "expected at least one declaration", SourceSpan{});
    }
    analyze();
    ParseResult result;
    result.errors = std::move(errors_);
    std::stable_sort(result.errors.begin(), result.errors.end(),
                     [](const ParseError& a, const ParseError& b) {
                       return std::pair(a.span.line, a.span.col) <
                              std::pair(b.span.line, b.span.col);
                     });
    if (result.errors.empty()) result.scm = std::move(scm_);
    return result;
  }

 private:
  std::vector<Token> tokens_;
  std::size_t idx_ = 0;
  std::vector<ParseError> errors_;
  std::vector<DeclAst> decls_;
  Scm scm_;
  int depth_ = 0;

  const Token& cur() const { return tokens_[idx_]; }
  bool at(Tok k) const { return cur().kind == k; }
  const Token& take() { return tokens_[idx_ == tokens_.size() - 1 ? idx_ : idx_++]; }

  void error(std::string kind, std::string message, SourceSpan span) {
    errors_.push_back({std::move(kind), std::move(message), span});
  }

  // Skip to just past the next ';' so later declarations still get checked.
  void sync() {
    while (!at(Tok::End) && !at(Tok::Semi)) idx_++;
    if (at(Tok::Semi)) idx_++;
  }

  bool expect(Tok k, const char* what) {
    if (at(k)) {
      idx_++;
      return true;
    }
    error("syntax", std::string("expected ") + what, cur().span);
    return false;
  }

  // number with optional leading minus; used for domain values, dist
  // arguments and cpt row entries.
  bool signed_number(double& out) {
    bool neg = false;
    if (at(Tok::Minus)) {
      idx_++;
      neg = true;
    }
    if (!at(Tok::Number)) {
      error("syntax", "expected a number", cur().span);
      return false;
    }
    out = neg ? -take().number : take().number;
    return true;
  }

  void parse_decl() {
    take();  // 'var'
    DeclAst decl;
    if (!at(Tok::Ident)) {
      error("syntax", "expected a variable name after 'var'", cur().span);
      sync();
      return;
    }
    if (reserved_words().count(cur().text)) {
      error("syntax", "'" + cur().text + "' is a reserved word", cur().span);
      sync();
      return;
    }
    decl.name = cur().text;
    decl.name_span = cur().span;
    take();

    if (at(Tok::Colon)) {
      take();
      decl.domain_span = cur().span;
      if (at(Tok::Ident) && cur().text == "real") {
        take();
        decl.domain = Domain::real();
        decl.has_domain = true;
      } else if (at(Tok::LBrace)) {
        take();
        std::vector<double> values;
        while (true) {
          double v;
          if (!signed_number(v)) {
            sync();
            return;
          }
          values.push_back(v);
          if (at(Tok::Comma)) {
            take();
            continue;
          }
          break;
        }
        if (!expect(Tok::RBrace, "'}' to close the domain")) {
          sync();
          return;
        }
        decl.domain = Domain::discrete(values);
        decl.has_domain = true;
        std::set<double> uniq(values.begin(), values.end());
        if (uniq.size() != values.size()) {
          error("domain-mismatch", "domain repeats a value", decl.domain_span);
        }
      } else {
        error("syntax", "expected 'real' or '{...}' after ':'", cur().span);
        sync();
        return;
      }
    }

    if (at(Tok::Tilde)) {
      take();
      decl.form = DeclAst::Form::Dist;
      if (!parse_dist(decl)) {
        sync();
        return;
      }
    } else if (at(Tok::Assign)) {
      take();
      decl.form = DeclAst::Form::Assign;
      depth_ = 0;
      decl.expr = parse_expr(decl);
      if (!decl.expr) {
        sync();
        return;
      }
    } else if (at(Tok::Ident) && cur().text == "cpt") {
      take();
      decl.form = DeclAst::Form::Cpt;
      if (!parse_rows(decl)) {
        sync();
        return;
      }
    } else {
      error("syntax", "expected '~', ':=' or 'cpt' after the variable name",
            cur().span);
      sync();
      return;
    }

    if (!expect(Tok::Semi, "';' to end the declaration")) {
      sync();
      decl.dead = true;
    }
    decls_.push_back(std::move(decl));
  }

  bool parse_dist(DeclAst& decl) {
    if (!at(Tok::Ident)) {
      error("syntax", "expected a distribution name after '~'", cur().span);
      return false;
    }
    decl.dist_name = cur().text;
    decl.dist_span = cur().span;
    if (decl.dist_name != "normal" && decl.dist_name != "bernoulli" &&
        decl.dist_name != "uniform" && decl.dist_name != "point") {
      error("syntax", "unknown distribution '" + decl.dist_name + "'",
            cur().span);
      return false;
    }
    take();
    if (!expect(Tok::LParen, "'(' after the distribution name")) return false;
    if (!at(Tok::RParen)) {
      while (true) {
        double v;
        if (!signed_number(v)) return false;
        decl.dist_args.push_back(v);
        if (at(Tok::Comma)) {
          take();
          continue;
        }
        break;
      }
    }
    return expect(Tok::RParen, "')' to close the distribution");
  }

  bool parse_rows(DeclAst& decl) {
    if (!at(Tok::Pipe)) {
      error("cpt-shape", "cpt needs at least one '|' row", cur().span);
      return false;
    }
    while (at(Tok::Pipe)) {
      RowAst row;
      row.span = cur().span;
      take();
      if (at(Tok::Ident)) {
        while (true) {
          if (!at(Tok::Ident)) {
            error("syntax", "expected a parent name", cur().span);
            return false;
          }
          std::string pname = cur().text;
          SourceSpan pspan = cur().span;
          take();
          if (!expect(Tok::EqSign, "'=' after the parent name")) return false;
          double v;
          if (!signed_number(v)) return false;
          row.assigns.emplace_back(pname, pspan, v);
          if (at(Tok::Comma)) {
            take();
            continue;
          }
          break;
        }
      }
      if (!expect(Tok::Arrow, "'->' before the probabilities")) return false;
      while (true) {
        double v;
        if (!signed_number(v)) return false;
        row.pmf.push_back(v);
        if (at(Tok::Comma)) {
          take();
          continue;
        }
        break;
      }
      decl.rows.push_back(std::move(row));
    }
    return true;
  }

  // expr := add (cmp add)?          comparisons do not associate
  ExprPtr parse_expr(DeclAst& decl) {
    if (++depth_ > 200) {
      error("syntax", "expression nests too deeply", cur().span);
      depth_--;
      return nullptr;
    }
    ExprPtr left = parse_add(decl);
    if (!left) {
      depth_--;
      return nullptr;
    }
    auto cmp = [&](Tok k, BinOp op) -> bool {
      if (!at(k)) return false;
      take();
      ExprPtr right = parse_add(decl);
      left = right ? make_binary(op, left, right) : nullptr;
      return true;
    };
    cmp(Tok::Lt, BinOp::Lt) || cmp(Tok::Le, BinOp::Le) ||
        cmp(Tok::Gt, BinOp::Gt) || cmp(Tok::Ge, BinOp::Ge) ||
        cmp(Tok::EqEq, BinOp::Eq) || cmp(Tok::Ne, BinOp::Ne);
    depth_--;
    return left;
  }

  ExprPtr parse_add(DeclAst& decl) {
    ExprPtr left = parse_mul(decl);
    while (left && (at(Tok::Plus) || at(Tok::Minus))) {
      BinOp op = at(Tok::Plus) ? BinOp::Add : BinOp::Sub;
      take();
      ExprPtr right = parse_mul(decl);
      left = right ? make_binary(op, left, right) : nullptr;
    }
    return left;
  }

  ExprPtr parse_mul(DeclAst& decl) {
    ExprPtr left = parse_unary(decl);
    while (left && (at(Tok::Star) || at(Tok::Slash))) {
      BinOp op = at(Tok::Star) ? BinOp::Mul : BinOp::Div;
      take();
      ExprPtr right = parse_unary(decl);
      left = right ? make_binary(op, left, right) : nullptr;
    }
    return left;
  }

  ExprPtr parse_unary(DeclAst& decl) {
    if (at(Tok::Minus)) {
      take();
      // Fold a minus straight into a numeric literal so -1*x keeps the
      // shape literal*var (the linear-gaussian recognizer depends on it).
      if (at(Tok::Number)) {
        return make_literal(-take().number);
      }
      if (++depth_ > 200) {
        error("syntax", "expression nests too deeply", cur().span);
        depth_--;
        return nullptr;
      }
      ExprPtr inner = parse_unary(decl);
      depth_--;
      return inner ? make_neg(inner) : nullptr;
    }
    return parse_primary(decl);
  }

  ExprPtr parse_primary(DeclAst& decl) {
    if (at(Tok::Number)) {
      return make_literal(take().number);
    }
    if (at(Tok::LParen)) {
      take();
      ExprPtr inner = parse_expr(decl);
      if (!inner) return nullptr;
      if (!expect(Tok::RParen, "')'")) return nullptr;
      return inner;
    }
    if (at(Tok::Ident)) {
      std::string name = cur().text;
      SourceSpan span = cur().span;
      take();
      if (at(Tok::LParen)) {
        return parse_call(decl, name, span);
      }
      if (reserved_words().count(name)) {
        error("syntax", "'" + name + "' is a reserved word", span);
        return nullptr;
      }
      decl.refs.emplace_back(name, span);
      return make_var(name);
    }
    error("syntax", "expected a value, name or '('", cur().span);
    return nullptr;
  }

  ExprPtr parse_call(DeclAst& decl, const std::string& name, SourceSpan span) {
    take();  // '('
    if (name == "min" || name == "max") {
      ExprPtr a = parse_expr(decl);
      if (!a || !expect(Tok::Comma, "',' between arguments")) return nullptr;
      ExprPtr b = parse_expr(decl);
      if (!b || !expect(Tok::RParen, "')'")) return nullptr;
      return make_call(name == "min" ? FnOp::Min : FnOp::Max, a, b);
    }
    if (name == "indicator") {
      ExprPtr a = parse_expr(decl);
      if (!a || !expect(Tok::RParen, "')'")) return nullptr;
      return make_call(FnOp::Indicator, a, nullptr);
    }
    if (name == "normal" || name == "bernoulli" || name == "uniform" ||
        name == "point") {
      std::vector<double> args;
      if (!at(Tok::RParen)) {
        while (true) {
          double v;
          if (!signed_number(v)) return nullptr;
          args.push_back(v);
          if (at(Tok::Comma)) {
            take();
            continue;
          }
          break;
        }
      }
      if (!expect(Tok::RParen, "')' to close the distribution")) {
        return nullptr;
      }
      NoiseSpec spec;
      if (!build_noise(name, args, span, spec)) return nullptr;
      decl.noise_spans.push_back(span);
      return make_noise(spec);
    }
    error("syntax", "unknown function or distribution '" + name + "'", span);
    return nullptr;
  }

  bool build_noise(const std::string& name, const std::vector<double>& args,
                   SourceSpan span, NoiseSpec& out) {
    if (name == "normal") {
      if (args.size() != 2) {
        error("syntax", "normal takes (mean, std)", span);
        return false;
      }
      if (args[1] < 0) {
        error("domain-mismatch", "normal std must be >= 0", span);
        return false;
      }
      out = NoiseSpec::normal(args[0], args[1]);
    } else if (name == "bernoulli") {
      if (args.size() != 1) {
        error("syntax", "bernoulli takes (p)", span);
        return false;
      }
      if (args[0] < 0 || args[0] > 1) {
        error("domain-mismatch", "bernoulli parameter must lie in [0,1]",
              span);
        return false;
      }
      out = NoiseSpec::bernoulli(args[0]);
    } else if (name == "uniform") {
      if (args.empty()) {
        error("syntax", "uniform takes at least one value", span);
        return false;
      }
      std::set<double> uniq(args.begin(), args.end());
      if (uniq.size() != args.size()) {
        error("domain-mismatch", "uniform repeats a value", span);
        return false;
      }
      out = NoiseSpec::choice(args);
    } else {  // point
      if (args.size() != 1) {
        error("syntax", "point takes (value)", span);
        return false;
      }
      out = NoiseSpec::point(args[0]);
    }
    return true;
  }

  // ------------------------------------------------------------ analysis --

  void analyze() {
    std::set<std::string> declared;
    for (auto& decl : decls_) {
      if (!declared.insert(decl.name).second) {
        error("duplicate-definition",
              "'" + decl.name + "' is declared more than once",
              decl.name_span);
        decl.dead = true;
      }
    }

    // Pass 1: settle every node's domain so cpt shape checks can run.
    std::map<std::string, Domain> domains;
    for (auto& decl : decls_) {
      if (decl.dead) continue;
      domains[decl.name] = effective_domain(decl);
    }

    // Pass 2: build mechanisms, resolve references, collect edges.
    for (auto& decl : decls_) {
      if (decl.dead) continue;
      scm_.dag.nodes.push_back(decl.name);
      scm_.domains[decl.name] = domains[decl.name];
      switch (decl.form) {
        case DeclAst::Form::Dist:
          build_dist_mechanism(decl, domains);
          break;
        case DeclAst::Form::Assign:
          build_assign_mechanism(decl, domains, declared);
          break;
        case DeclAst::Form::Cpt:
          build_cpt_mechanism(decl, domains, declared);
          break;
      }
    }

    // Names have whole-file scope (declaration order is free), so the
    // reference graph can close a cycle; that is not a representable model.
    reject_reference_cycles();
  }

  void reject_reference_cycles() {
    std::map<std::string, int> indegree;
    for (const auto& node : scm_.dag.nodes) indegree[node] = 0;
    for (const auto& [from, to] : scm_.dag.edges) ++indegree[to];
    std::vector<std::string> frontier;
    for (const auto& [node, deg] : indegree) {
      if (deg == 0) frontier.push_back(node);
    }
    std::size_t removed = frontier.size();
    while (!frontier.empty()) {
      std::string node = std::move(frontier.back());
      frontier.pop_back();
      for (const auto& child : scm_.dag.children(node)) {
        if (--indegree[child] == 0) {
          frontier.push_back(child);
          ++removed;
        }
      }
    }
    if (removed == scm_.dag.nodes.size()) return;
    std::string involved;
    const SourceSpan* where = nullptr;
    for (const auto& decl : decls_) {
      if (decl.dead || indegree[decl.name] == 0) continue;
      involved += (involved.empty() ? "" : ", ") + decl.name;
      if (!where) where = &decl.name_span;
    }
    error("syntax", "declarations form a reference cycle: " + involved,
          where ? *where : SourceSpan{});
  }

  Domain effective_domain(DeclAst& decl) {
    if (decl.has_domain) return decl.domain;
    if (decl.form == DeclAst::Form::Dist) {
      if (decl.dist_name == "bernoulli") return Domain::discrete({0.0, 1.0});
      if (decl.dist_name == "uniform") return Domain::discrete(decl.dist_args);
      if (decl.dist_name == "point" && decl.dist_args.size() == 1) {
        return Domain::discrete({decl.dist_args[0]});
      }
      return Domain::real();
    }
    if (decl.form == DeclAst::Form::Assign && decl.expr &&
        decl.refs.empty() && count_noise(*decl.expr) == 0) {
      double v = eval_expr(*decl.expr, {}, 0.0);
      if (std::isfinite(v)) return Domain::discrete({v});
    }
    return Domain::real();  // cpt without a domain errors in pass 2
  }

  void build_dist_mechanism(DeclAst& decl,
                            const std::map<std::string, Domain>& domains) {
    const Domain& dom = domains.at(decl.name);
    NoiseSpec spec;  // validates arity and parameter ranges
    if (!build_noise(decl.dist_name, decl.dist_args, decl.dist_span, spec)) {
      return;
    }
    if (decl.dist_name == "normal") {
      if (!dom.continuous) {
        error("domain-mismatch",
              "normal distribution needs a continuous domain",
              decl.domain_span);
        return;
      }
      scm_.mechanisms[decl.name] =
          LinearGaussian{{}, decl.dist_args[0], decl.dist_args[1]};
      return;
    }
    if (decl.dist_name == "point") {
      double v = decl.dist_args[0];
      if (!dom.contains(v)) {
        error("domain-mismatch",
              "point value " + format_double(v) + " is outside the domain",
              decl.dist_span);
        return;
      }
      scm_.mechanisms[decl.name] = Constant{v};
      return;
    }
    // bernoulli / uniform become parent-free cpts aligned with the domain.
    if (dom.continuous) {
      error("domain-mismatch",
            decl.dist_name + " needs a discrete domain", decl.dist_span);
      return;
    }
    std::vector<double> pmf(dom.values.size(), 0.0);
    if (decl.dist_name == "bernoulli") {
      int i0 = dom.index_of(0.0), i1 = dom.index_of(1.0);
      if (i0 < 0 || i1 < 0 || dom.values.size() != 2) {
        error("domain-mismatch", "bernoulli needs the domain {0, 1}",
              decl.domain_span);
        return;
      }
      pmf[i0] = 1.0 - decl.dist_args[0];
      pmf[i1] = decl.dist_args[0];
    } else {
      double share = 1.0 / static_cast<double>(decl.dist_args.size());
      for (double v : decl.dist_args) {
        int i = dom.index_of(v);
        if (i < 0) {
          error("domain-mismatch",
                "uniform value " + format_double(v) +
                    " is outside the declared domain",
                decl.dist_span);
          return;
        }
        pmf[i] += share;
      }
    }
    DiscreteCpt cpt;
    cpt.rows[{}] = std::move(pmf);
    scm_.mechanisms[decl.name] = std::move(cpt);
  }

  // Flattens sums of scaled parents plus at most one additive normal noise.
  struct LinAcc {
    std::map<std::string, double> weights;
    double intercept = 0.0;
    bool has_noise = false;
    double mu = 0.0, std = 0.0;
    bool ok = true;
  };

  static void lin_add(const Expr& e, double scale, LinAcc& acc) {
    if (!acc.ok) return;
    switch (e.kind) {
      case Expr::Kind::Literal:
        acc.intercept += scale * e.literal;
        return;
      case Expr::Kind::Var:
        acc.weights[e.var] += scale;
        return;
      case Expr::Kind::Neg:
        lin_add(*e.lhs, -scale, acc);
        return;
      case Expr::Kind::Noise:
        if (e.noise.kind == NoiseSpec::Kind::Normal && scale == 1.0 &&
            !acc.has_noise) {
          acc.has_noise = true;
          acc.mu = e.noise.a;
          acc.std = e.noise.b;
        } else {
          acc.ok = false;
        }
        return;
      case Expr::Kind::Binary:
        switch (e.bin) {
          case BinOp::Add:
            lin_add(*e.lhs, scale, acc);
            lin_add(*e.rhs, scale, acc);
            return;
          case BinOp::Sub:
            lin_add(*e.lhs, scale, acc);
            lin_add(*e.rhs, -scale, acc);
            return;
          case BinOp::Mul:
            if (e.lhs->kind == Expr::Kind::Literal &&
                e.rhs->kind == Expr::Kind::Var) {
              acc.weights[e.rhs->var] += scale * e.lhs->literal;
            } else if (e.lhs->kind == Expr::Kind::Var &&
                       e.rhs->kind == Expr::Kind::Literal) {
              acc.weights[e.lhs->var] += scale * e.rhs->literal;
            } else if (e.lhs->kind == Expr::Kind::Literal &&
                       e.rhs->kind == Expr::Kind::Literal) {
              acc.intercept += scale * e.lhs->literal * e.rhs->literal;
            } else {
              acc.ok = false;
            }
            return;
          case BinOp::Div:
            if (e.rhs->kind == Expr::Kind::Literal &&
                e.lhs->kind == Expr::Kind::Var) {
              acc.weights[e.lhs->var] += scale / e.rhs->literal;
            } else if (e.rhs->kind == Expr::Kind::Literal &&
                       e.lhs->kind == Expr::Kind::Literal) {
              acc.intercept += scale * e.lhs->literal / e.rhs->literal;
            } else {
              acc.ok = false;
            }
            return;
          default:
            acc.ok = false;
            return;
        }
      case Expr::Kind::Call:
        acc.ok = false;
        return;
    }
  }

  void build_assign_mechanism(DeclAst& decl,
                              const std::map<std::string, Domain>& domains,
                              const std::set<std::string>& declared) {
    bool refs_ok = true;
    for (const auto& [name, span] : decl.refs) {
      if (!declared.count(name)) {
        error("unknown-symbol", "'" + name + "' is not declared", span);
        refs_ok = false;
      } else {
        scm_.dag.add_edge(name, decl.name);
      }
    }
    if (count_noise(*decl.expr) > 1) {
      error("syntax", "at most one noise term is allowed per expression",
            decl.noise_spans[1]);
      return;
    }
    if (!refs_ok) return;

    const Domain& dom = domains.at(decl.name);
    if (decl.refs.empty() && count_noise(*decl.expr) == 0) {
      double v = eval_expr(*decl.expr, {}, 0.0);
      if (!std::isfinite(v)) {
        error("domain-mismatch",
              "constant expression does not evaluate to a finite value",
              decl.name_span);
        return;
      }
      if (!dom.contains(v)) {
        error("domain-mismatch",
              "constant value " + format_double(v) + " is outside the domain",
              decl.name_span);
        return;
      }
      scm_.mechanisms[decl.name] = Constant{v};
      return;
    }
    if (dom.continuous) {
      LinAcc acc;
      lin_add(*decl.expr, 1.0, acc);
      if (acc.ok && acc.has_noise) {
        scm_.mechanisms[decl.name] = LinearGaussian{
            std::move(acc.weights), acc.intercept + acc.mu, acc.std};
        return;
      }
    }
    scm_.mechanisms[decl.name] = Deterministic{decl.expr};
  }

  void build_cpt_mechanism(DeclAst& decl,
                           const std::map<std::string, Domain>& domains,
                           const std::set<std::string>& declared) {
    if (!decl.has_domain || decl.domain.continuous) {
      error("cpt-shape", "cpt requires an explicit discrete domain",
            decl.name_span);
      return;
    }
    const Domain& dom = domains.at(decl.name);

    // Parent set comes from the first row; all rows must assign it exactly.
    std::vector<std::string> parents;
    for (const auto& [name, span, value] : decl.rows.front().assigns) {
      if (std::find(parents.begin(), parents.end(), name) != parents.end()) {
        error("cpt-shape", "row assigns '" + name + "' twice", span);
        return;
      }
      parents.push_back(name);
    }
    std::vector<std::string> sorted_parents = parents;
    std::sort(sorted_parents.begin(), sorted_parents.end());

    bool parents_ok = true;
    for (const auto& p : sorted_parents) {
      if (!declared.count(p)) {
        error("unknown-symbol", "'" + p + "' is not declared",
              decl.rows.front().span);
        parents_ok = false;
      } else {
        if (domains.at(p).continuous) {
          error("cpt-shape", "cpt parent '" + p + "' must be discrete",
                decl.rows.front().span);
          parents_ok = false;
        }
        scm_.dag.add_edge(p, decl.name);
      }
    }

    DiscreteCpt cpt;
    cpt.parents = sorted_parents;
    bool rows_ok = parents_ok;
    for (const auto& row : decl.rows) {
      std::set<std::string> row_names;
      for (const auto& [name, span, value] : row.assigns) {
        row_names.insert(name);
      }
      if (row_names.size() != parents.size() ||
          !std::all_of(parents.begin(), parents.end(),
                       [&](const std::string& p) { return row_names.count(p); })) {
        error("cpt-shape", "row assigns a different parent set than the first",
              row.span);
        rows_ok = false;
        continue;
      }
      if (row.pmf.size() != dom.values.size()) {
        error("cpt-shape",
              "row has " + std::to_string(row.pmf.size()) +
                  " probabilities, domain has " +
                  std::to_string(dom.values.size()) + " values",
              row.span);
        rows_ok = false;
        continue;
      }
      double total = 0.0;
      bool negative = false;
      for (double p : row.pmf) {
        total += p;
        negative = negative || p < 0;
      }
      if (negative) {
        error("cpt-shape", "row has a negative probability", row.span);
        rows_ok = false;
        continue;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        error("cpt-shape",
              "row probabilities sum to " + format_double(total) +
                  ", expected 1",
              row.span);
        rows_ok = false;
        continue;
      }
      if (!parents_ok) continue;
      std::vector<double> key(sorted_parents.size());
      bool key_ok = true;
      for (const auto& [name, span, value] : row.assigns) {
        std::size_t pos =
            std::lower_bound(sorted_parents.begin(), sorted_parents.end(),
                             name) -
            sorted_parents.begin();
        const Domain& pd = domains.at(name);
        int vi = pd.index_of(value);
        if (vi < 0) {
          error("domain-mismatch",
                format_double(value) + " is outside the domain of '" + name +
                    "'",
                span);
          key_ok = false;
          break;
        }
        key[pos] = pd.values[vi];  // snap to the canonical domain value
      }
      if (!key_ok) {
        rows_ok = false;
        continue;
      }
      if (!cpt.rows.emplace(key, row.pmf).second) {
        error("cpt-shape", "duplicate row for the same parent assignment",
              row.span);
        rows_ok = false;
      }
    }
    if (!rows_ok) return;

    std::size_t expected = 1;
    for (const auto& p : sorted_parents) {
      expected *= domains.at(p).values.size();
    }
    if (cpt.rows.size() != expected) {
      error("cpt-shape",
            "cpt has " + std::to_string(cpt.rows.size()) + " rows, expected " +
                std::to_string(expected) + " (one per parent assignment)",
            decl.name_span);
      return;
    }
    scm_.mechanisms[decl.name] = std::move(cpt);
  }
};

}  // namespace

ParseResult parse_scm(std::string_view source) {
  return Parser(source).run();
}

std::string format_parse_errors(const std::vector<ParseError>& errors) {
  std::ostringstream out;
  for (const auto& e : errors) {
    out << e.span.line << ":" << e.span.col << ": " << e.kind << ": "
        << e.message << "\n";
  }
  return out.str();
}

// ------------------------------------------------------------ serializing --

namespace {

std::string domain_text(const Domain& dom) {
  if (dom.continuous) return "real";
  std::string out = "{";
  for (std::size_t i = 0; i < dom.values.size(); ++i) {
    if (i) out += ", ";
    out += format_double(dom.values[i]);
  }
  return out + "}";
}

}  // namespace

std::string serialize_scm(const Scm& scm) {
  auto issues = validate(scm);
  if (!issues.empty()) {
    throw std::invalid_argument("cannot serialize an invalid model:\n" +
                                format_issues(issues));
  }
  auto order = topo_order_lexicographic(scm.dag);
  std::ostringstream out;
  for (const auto& node : *order) {
    const Domain& dom = scm.domains.at(node);
    const Mechanism& mech = scm.mechanisms.at(node);
    out << "var " << node << " : " << domain_text(dom);
    if (const auto* cpt = std::get_if<DiscreteCpt>(&mech)) {
      out << " cpt\n";
      for (const auto& [key, pmf] : cpt->rows) {
        out << "  |";
        for (std::size_t i = 0; i < key.size(); ++i) {
          out << (i ? ", " : " ") << cpt->parents[i] << "="
              << format_double(key[i]);
        }
        out << " ->";
        for (std::size_t i = 0; i < pmf.size(); ++i) {
          out << (i ? ", " : " ") << format_double(pmf[i]);
        }
        out << "\n";
      }
      out << ";\n";
    } else if (const auto* lg = std::get_if<LinearGaussian>(&mech)) {
      out << " := ";
      for (const auto& [parent, w] : lg->weights) {
        out << format_double(w) << "*" << parent << " + ";
      }
      out << format_double(lg->intercept) << " + normal(0, "
          << format_double(lg->noise_std) << ");\n";
    } else if (const auto* det = std::get_if<Deterministic>(&mech)) {
      out << " := " << print_expr(*det->expr) << ";\n";
    } else {
      out << " := " << format_double(std::get<Constant>(mech).value) << ";\n";
    }
  }
  return out.str();
}

}  // namespace causalkit
